#include "scs/synthetic.hpp"

#include <algorithm>
#include <stdexcept>

#include "scs/rng.hpp"

namespace scs {

namespace {

const std::vector<std::string>& negative_words() {
    static const std::vector<std::string> w = {"bad",    "terrible",      "awful", "horrible", "dreadful", "boring",
                                               "ugly",   "disappointing", "dull",  "annoying", "painful",  "mediocre"};
    return w;
}

const std::vector<std::string>& positive_words() {
    static const std::vector<std::string> w = {"good",       "great",     "wonderful", "amazing",
                                               "excellent",  "lovely",    "delightful", "fantastic",
                                               "pleasant",   "superb",    "charming",   "brilliant"};
    return w;
}

const std::vector<std::string>& nouns() {
    static const std::vector<std::string> w = {"movie", "film", "book", "story", "meal",  "food",
                                               "place", "show", "song", "game",  "plot",  "acting"};
    return w;
}

const std::vector<std::string>& adverbs() {
    static const std::vector<std::string> w = {"really", "quite", "very", "so", "truly", "rather", "pretty"};
    return w;
}

const std::vector<std::string>& fillers() {
    static const std::vector<std::string> w = {"the", "a", "this", "that", "was", "is", "and", "it",
                                               "seemed", "felt", "overall", "."};
    return w;
}

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
    return v[rng.below(v.size())];
}

// One lowercase sentence whose polarity words all come from the label's
// list. Every pattern carries three polarity slots and little glue, so
// frequency-sampled corruption mostly swaps one polarity word for another.
// Such swaps keep the sentence locally well-formed and are detectable only
// through agreement with the surrounding words — which is exactly the signal
// the scorer must learn for consistency scoring to work.
std::string make_sentence(int label, Rng& rng) {
    const auto& polar = label == 0 ? negative_words() : positive_words();
    const std::string& n = pick(nouns(), rng);
    const std::string& p = pick(polar, rng);
    const std::string& q = pick(polar, rng);
    const std::string& r = pick(polar, rng);
    switch (rng.below(6)) {
        case 0:
            return p + " " + q + " " + n + " was " + r;
        case 1:
            return p + " and " + q + " " + n + " so " + r;
        case 2:
            return p + " " + q + " and " + r;
        case 3:
            return pick(adverbs(), rng) + " " + p + " " + q + " " + r + " " + n;
        case 4:
            return "it was " + p + " " + q + " and " + r;
        default:
            return p + " " + q + " " + r + " " + n;
    }
}

}  // namespace

std::vector<std::string> synthetic_vocabulary() {
    std::vector<std::string> vocab;
    for (const auto* list : {&negative_words(), &positive_words(), &nouns(), &adverbs(), &fillers()})
        vocab.insert(vocab.end(), list->begin(), list->end());
    std::sort(vocab.begin(), vocab.end());
    vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
    return vocab;
}

SyntheticWorld make_synthetic_task(uint64_t seed, int k, int test_per_class, int pool_per_class,
                                   int corpus_size) {
    if (k <= 0) throw std::invalid_argument("k must be positive");
    if (pool_per_class < 2 * k)
        throw std::invalid_argument("pool too small for disjoint K-shot train and dev splits");
    if (test_per_class <= 0 || corpus_size <= 0) throw std::invalid_argument("sizes must be positive");

    SyntheticWorld world;
    world.spec.name = "synthetic";
    world.spec.labels = {{0, "negative"}, {1, "positive"}};
    world.spec.verbalizer.words = {"terrible", "great"};
    world.spec.tmpl = {TemplateKind::SingleSentence, "<S1> It is <V>."};
    world.spec.metric = Metric::Accuracy;

    Rng rng(seed);

    std::vector<std::vector<InputExample>> pool(2);
    for (int label = 0; label < 2; ++label) {
        for (int i = 0; i < pool_per_class; ++i)
            pool[static_cast<size_t>(label)].push_back({make_sentence(label, rng), std::nullopt, label});
    }
    for (int label = 0; label < 2; ++label) {
        for (int i = 0; i < test_per_class; ++i)
            world.test.push_back({make_sentence(label, rng), std::nullopt, label});
    }

    // The corpus mixes plain sentences with sentences carrying the matching
    // label clause, so the prompt pattern itself occurs in pretraining text.
    world.pretrain_corpus.reserve(static_cast<size_t>(corpus_size));
    for (int i = 0; i < corpus_size; ++i) {
        const int label = static_cast<int>(rng.below(2));
        std::string s = make_sentence(label, rng);
        if (rng.uniform() < 0.7) s += " it is " + world.spec.verbalizer.words[static_cast<size_t>(label)] + " .";
        world.pretrain_corpus.push_back(std::move(s));
    }

    // Disjoint K-shot train/dev per class from the shuffled pool.
    for (int label = 0; label < 2; ++label) {
        auto& bucket = pool[static_cast<size_t>(label)];
        std::vector<size_t> order(bucket.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        for (int i = 0; i < k; ++i) world.train.push_back(bucket[order[static_cast<size_t>(i)]]);
        for (int i = k; i < 2 * k; ++i) world.dev.push_back(bucket[order[static_cast<size_t>(i)]]);
        for (auto& ex : bucket) world.train_pool.push_back(std::move(ex));
    }
    return world;
}

}  // namespace scs
