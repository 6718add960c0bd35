#include "scs/train.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "scs/model.hpp"
#include "scs/rng.hpp"
#include "scs/synthetic.hpp"
#include "scs/tokenizer.hpp"

using namespace scs;

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

TaskSpec sentiment_task() {
    TaskSpec spec;
    spec.name = "sentiment";
    spec.labels = {{0, "negative"}, {1, "positive"}};
    spec.verbalizer.words = {"terrible", "great"};
    spec.tmpl = {TemplateKind::SingleSentence, "<S1> It is <V>."};
    return spec;
}

TaskSpec pair_task() {
    TaskSpec spec;
    spec.name = "pairs";
    spec.labels = {{0, "entailment"}, {1, "not_entailment"}};
    spec.verbalizer.words = {"Yes", "No"};
    spec.tmpl = {TemplateKind::SentencePair, "<S1>? <V>, <S2>"};
    return spec;
}

WordTokenizer shared_tokenizer() {
    return WordTokenizer::from_words({"terrible", "great", "yes", "no", "bad", "it", "is", ".", "?", ",",
                                      "a", "fun", "ride", "works", "well"});
}

// Minimal trainable scorer: a single parameter emitted as the logit of every
// token. Keeps optimizer-facing loop behavior observable in isolation.
class ScalarScorer : public TrainableScorer {
public:
    explicit ScalarScorer(double init) : param_{init}, grad_{0.0} {}

    std::vector<TokenLogits> score(std::span<const BuiltPrompt> prompts) const override {
        std::vector<TokenLogits> out(prompts.size());
        for (size_t i = 0; i < prompts.size(); ++i) out[i].z.assign(prompts[i].size(), param_[0]);
        return out;
    }
    std::vector<TokenLogits> forward(std::span<const BuiltPrompt> prompts) override { return score(prompts); }
    void backward(std::span<const std::vector<double>> dlogits) override {
        for (const auto& dz : dlogits)
            for (double d : dz) grad_[0] += d;
    }
    void zero_grad() override { grad_[0] = 0.0; }
    std::span<double> parameters() override { return param_; }
    std::span<const double> parameters_const() const override { return param_; }
    std::span<const double> gradients() const override { return grad_; }

private:
    std::vector<double> param_;
    std::vector<double> grad_;
};

const std::vector<InputExample> kTinyTrain = {
    {"a fun ride", std::nullopt, 1},
    {"bad bad bad", std::nullopt, 0},
    {"fun fun fun", std::nullopt, 1},
    {"a bad ride", std::nullopt, 0},
};
const std::vector<InputExample> kTinyDev = {
    {"fun ride", std::nullopt, 1},
    {"bad ride", std::nullopt, 0},
};

}  // namespace

TEST_CASE("learning-rate schedule ramps linearly and decays to zero") {
    const double peak = 3e-4;

    // total 100, warmup ceil(0.05 * 100) = 5.
    CHECK(lr_at(0, 100, peak, 0.05) == 0.0);
    CHECK(lr_at(2, 100, peak, 0.05) == doctest::Approx(peak * 2.0 / 5.0).epsilon(1e-15));
    CHECK(lr_at(5, 100, peak, 0.05) == doctest::Approx(peak).epsilon(1e-15));
    CHECK(lr_at(50, 100, peak, 0.05) == doctest::Approx(peak * 50.0 / 95.0).epsilon(1e-15));
    CHECK(lr_at(99, 100, peak, 0.05) == doctest::Approx(peak * 1.0 / 95.0).epsilon(1e-15));
    CHECK(lr_at(100, 100, peak, 0.05) == 0.0);
    CHECK(lr_at(101, 100, peak, 0.05) == 0.0);

    // Fractional warmup boundaries round up: ceil(0.05 * 30) = 2.
    CHECK(lr_at(1, 30, peak, 0.05) == doctest::Approx(peak * 0.5).epsilon(1e-15));
    CHECK(lr_at(2, 30, peak, 0.05) == doctest::Approx(peak).epsilon(1e-15));

    // No warmup: decay starts immediately from the peak.
    CHECK(lr_at(0, 10, peak, 0.0) == doctest::Approx(peak).epsilon(1e-15));
    CHECK(lr_at(5, 10, peak, 0.0) == doctest::Approx(peak * 0.5).epsilon(1e-15));

    // Degenerate run where everything is warmup.
    CHECK(lr_at(1, 1, peak, 0.9) == doctest::Approx(peak).epsilon(1e-15));

    CHECK_THROWS_AS(lr_at(0, 0, peak, 0.05), std::invalid_argument);
    CHECK_THROWS_AS(lr_at(-1, 10, peak, 0.05), std::invalid_argument);
}

TEST_CASE("optimizer applies bias-corrected moments and decoupled decay") {
    SUBCASE("first step against the hand-derived update") {
        std::vector<double> p = {1.0};
        std::vector<double> g = {1.0};
        AdamW opt(1, 0.9, 0.999, 1e-8, 0.01);
        opt.step(p, g, 0.1);
        // mhat = vhat = 1 after bias correction, so the update is
        // lr * (1/(1+eps) + wd * 1).
        const double expected = 1.0 - 0.1 * (1.0 / (1.0 + 1e-8) + 0.01 * 1.0);
        CHECK(p[0] == doctest::Approx(expected).epsilon(1e-15));
    }
    SUBCASE("zero gradient leaves pure weight decay") {
        std::vector<double> p = {2.0};
        std::vector<double> g = {0.0};
        AdamW opt(1, 0.9, 0.999, 1e-8, 0.01);
        opt.step(p, g, 0.5);
        CHECK(p[0] == doctest::Approx(2.0 * (1.0 - 0.5 * 0.01)).epsilon(1e-15));
    }
    SUBCASE("gradient scaling matches pre-scaled gradients") {
        std::vector<double> p1 = {0.3}, p2 = {0.3};
        std::vector<double> g_raw = {4.0}, g_scaled = {2.0};
        AdamW a(1, 0.9, 0.999, 1e-8, 0.01), b(1, 0.9, 0.999, 1e-8, 0.01);
        a.step(p1, g_raw, 0.1, 0.5);
        b.step(p2, g_scaled, 0.1, 1.0);
        CHECK(p1[0] == doctest::Approx(p2[0]).epsilon(1e-15));
    }
    SUBCASE("size mismatches are rejected") {
        std::vector<double> p = {1.0, 2.0};
        std::vector<double> g = {1.0};
        AdamW opt(2, 0.9, 0.999, 1e-8, 0.01);
        CHECK_THROWS_AS(opt.step(p, g, 0.1), std::invalid_argument);
    }
}

TEST_CASE("example loss on the worked sentiment instance") {
    auto tok = shared_tokenizer();
    auto prompts = build_prompts(InputExample{"bad", std::nullopt, 0}, sentiment_task(), tok, 16);
    std::vector<TokenLogits> logits(2);
    logits[0].z = std::vector<double>(7, 0.0);
    logits[1].z = std::vector<double>(7, 0.0);
    logits[0].z[1] = logit(0.02);
    logits[0].z[4] = logit(0.04);
    logits[1].z[1] = logit(0.60);
    logits[1].z[4] = logit(0.13);

    const double label_gold = 312.0 / 399.0;
    const double sent_gold = 147.0 / 149.0;

    SUBCASE("label-only weighting reduces to the label cross-entropy") {
        auto lambda = LambdaWeights::for_task(sentiment_task(), 1.0);
        ExampleLoss loss = loss_from_logits(prompts, logits, nullptr, lambda, 0, nullptr);
        CHECK(loss.total == doctest::Approx(-std::log(label_gold)).epsilon(1e-12));
        CHECK(loss.total == doctest::Approx(0.246).epsilon(2e-3));
        REQUIRE(loss.parts.size() == 2);
        CHECK(loss.parts[0] == doctest::Approx(-std::log(label_gold)).epsilon(1e-12));
        CHECK(loss.parts[1] == doctest::Approx(-std::log(sent_gold)).epsilon(1e-12));
    }
    SUBCASE("halfway mixture weights both parts") {
        auto lambda = LambdaWeights::for_task(sentiment_task(), 0.5);
        ExampleLoss loss = loss_from_logits(prompts, logits, nullptr, lambda, 0, nullptr);
        CHECK(loss.total ==
              doctest::Approx(-0.5 * std::log(label_gold) - 0.5 * std::log(sent_gold)).epsilon(1e-12));
    }
    SUBCASE("a component probability of one half costs ln 2") {
        for (auto& l : logits)
            for (double& z : l.z) z = 0.0;
        auto lambda = LambdaWeights::for_task(sentiment_task(), 0.0);
        ExampleLoss loss = loss_from_logits(prompts, logits, nullptr, lambda, 0, nullptr);
        CHECK(loss.total == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("mixture loss dominates the aggregate cross-entropy") {
        // Weighted average of -log beats -log of the weighted average.
        Rng rng(17);
        for (int trial = 0; trial < 50; ++trial) {
            for (auto& l : logits)
                for (double& z : l.z) z = rng.uniform() * 8.0 - 4.0;
            auto lambda = LambdaWeights::for_task(sentiment_task(), rng.uniform());
            const int gold = static_cast<int>(rng.below(2));
            ExampleLoss loss = loss_from_logits(prompts, logits, nullptr, lambda, gold, nullptr);
            auto sc = aggregate_sc(loss.components, lambda);
            CHECK(loss.total >= -std::log(sc[static_cast<size_t>(gold)]) - 1e-12);
        }
    }
    SUBCASE("invalid shapes and labels are rejected") {
        auto lambda = LambdaWeights::for_task(sentiment_task(), 0.5);
        CHECK_THROWS_AS(loss_from_logits(prompts, logits, nullptr, lambda, 2, nullptr), std::invalid_argument);
        CHECK_THROWS_AS(loss_from_logits(prompts, logits, nullptr, lambda, -1, nullptr), std::invalid_argument);
        LambdaWeights pair_lambda = LambdaWeights::for_task(pair_task(), 0.5);
        CHECK_THROWS_AS(loss_from_logits(prompts, logits, nullptr, pair_lambda, 0, nullptr),
                        std::invalid_argument);
    }
}

TEST_CASE("loss gradients match finite differences over the logits") {
    auto tok = shared_tokenizer();
    IdfTable idf = IdfTable::compute_from_texts(std::vector<std::string>{
        "a fun ride", "it works well", "a bad ride", "fun and fun", "bad ride"});

    auto check_instance = [&](const InputExample& ex, const TaskSpec& spec, double lambda0, int gold) {
        auto prompts = build_prompts(ex, spec, tok, 32);
        auto lambda = LambdaWeights::for_task(spec, lambda0);
        Rng rng(fnv1a64(spec.name) + static_cast<uint64_t>(gold));
        std::vector<TokenLogits> logits(prompts.size());
        for (size_t l = 0; l < prompts.size(); ++l) {
            logits[l].z.resize(prompts[l].size());
            for (double& z : logits[l].z) z = rng.uniform() * 6.0 - 3.0;
        }

        std::vector<std::vector<double>> dlogits;
        loss_from_logits(prompts, logits, &idf, lambda, gold, &dlogits);

        const double h = 1e-6;
        for (size_t l = 0; l < prompts.size(); ++l) {
            for (size_t t = 0; t < logits[l].size(); ++t) {
                const double saved = logits[l].z[t];
                logits[l].z[t] = saved + h;
                const double up = loss_from_logits(prompts, logits, &idf, lambda, gold, nullptr).total;
                logits[l].z[t] = saved - h;
                const double down = loss_from_logits(prompts, logits, &idf, lambda, gold, nullptr).total;
                logits[l].z[t] = saved;
                const double fd = (up - down) / (2.0 * h);
                INFO("prompt ", l, " position ", t);
                CHECK(std::abs(fd - dlogits[l][t]) < 1e-7);
            }
        }
    };

    check_instance({"a fun ride", std::nullopt, 1}, sentiment_task(), 0.5, 1);
    check_instance({"a fun ride", std::nullopt, 1}, sentiment_task(), 0.0, 0);
    check_instance({"a fun ride", std::nullopt, 1}, sentiment_task(), 1.0, 1);
    check_instance({"does it work", std::string("it works well"), std::nullopt}, pair_task(), 0.4, 0);
    check_instance({"does it work", std::string("it works well"), std::nullopt}, pair_task(), 0.7, 1);
}

TEST_CASE("scorer-level loss wires forward and backward together") {
    auto tok = shared_tokenizer();
    auto spec = sentiment_task();
    auto lambda = LambdaWeights::for_task(spec, 0.5);
    ToyEncoderConfig cfg;
    cfg.vocab_size = tok.vocab_size();
    cfg.embedding_dim = 16;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.max_positions = 32;
    cfg.dropout = 0.0;
    ToyDiscriminator model(cfg, 3);

    InputExample ex{"a fun ride", std::nullopt, 1};
    auto prompts = build_prompts(ex, spec, tok, 32);
    auto logits = model.score(prompts);
    ExampleLoss direct = loss_from_logits(prompts, logits, nullptr, lambda, 1, nullptr);

    model.zero_grad();
    ExampleLoss via_scorer = example_loss(ex, spec, model, tok, nullptr, lambda, 32, true);
    CHECK(via_scorer.total == doctest::Approx(direct.total).epsilon(1e-12));

    // The end-to-end gradient reaches the embedding table.
    double grad_norm = 0.0;
    const auto& seg = model.params().segment("tok_emb");
    auto grads = model.gradients();
    for (size_t i = seg.offset; i < seg.offset + static_cast<size_t>(seg.rows) * static_cast<size_t>(seg.cols); ++i)
        grad_norm += grads[i] * grads[i];
    CHECK(grad_norm > 0.0);

    InputExample unlabeled{"a fun ride", std::nullopt, std::nullopt};
    CHECK_THROWS_AS(example_loss(unlabeled, spec, model, tok, nullptr, lambda, 32, false), std::invalid_argument);
}

TEST_CASE("scorer evaluation dispatches the task metric") {
    auto tok = shared_tokenizer();
    ScalarScorer zero(0.0);  // equal logits everywhere: every prediction is label 0
    auto lambda = LambdaWeights::for_task(sentiment_task(), 0.5);

    std::vector<InputExample> examples = {
        {"a fun ride", std::nullopt, 0}, {"bad ride", std::nullopt, 0}, {"fun fun", std::nullopt, 1}};

    auto spec = sentiment_task();
    CHECK(evaluate_scorer(zero, examples, spec, tok, nullptr, lambda, 32) == doctest::Approx(2.0 / 3.0));

    spec.metric = Metric::BinaryF1;
    spec.positive_label = 0;
    // All-0 predictions: precision 2/3, recall 1 -> F1 = 0.8.
    CHECK(evaluate_scorer(zero, examples, spec, tok, nullptr, lambda, 32) == doctest::Approx(0.8));

    CHECK_THROWS_AS(evaluate_scorer(zero, {}, spec, tok, nullptr, lambda, 32), std::invalid_argument);
}

TEST_CASE("zero learning rate freezes training at the initial point") {
    auto tok = shared_tokenizer();
    auto spec = sentiment_task();
    auto lambda = LambdaWeights::for_task(spec, 0.5);
    ScalarScorer scorer(0.25);

    TrainConfig tc;
    tc.learning_rate = 0.0;
    tc.weight_decay = 0.0;
    tc.batch_size = 2;
    tc.epochs = 12;
    tc.eval_every = 100;
    tc.early_stop_patience = 4;
    tc.seed = 5;

    FinetuneResult r = finetune(kTinyTrain, kTinyDev, spec, scorer, tok, nullptr, lambda, tc, 32);
    CHECK(scorer.parameters()[0] == 0.25);
    REQUIRE(r.best.params.size() == 1);
    CHECK(r.best.params[0] == 0.25);
    CHECK(r.best.step == 0);
    for (double m : r.dev_trace) CHECK(m == r.dev_trace.front());

    // No improvement is possible, so patience cuts the run short: 4 stale
    // epoch-end evaluations of the 6 possible.
    CHECK(r.steps_run == 4 * 2);
}

TEST_CASE("identical seeds reproduce the dev trace bit for bit") {
    auto tok = shared_tokenizer();
    auto spec = sentiment_task();
    auto lambda = LambdaWeights::for_task(spec, 0.5);
    ToyEncoderConfig cfg;
    cfg.vocab_size = tok.vocab_size();
    cfg.embedding_dim = 16;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.max_positions = 32;
    cfg.dropout = 0.1;  // exercises the training-mode rng path too
    TrainConfig tc;
    tc.learning_rate = 1e-3;
    tc.batch_size = 2;
    tc.epochs = 3;
    tc.eval_every = 2;
    tc.seed = 77;

    auto run = [&] {
        ToyDiscriminator model(cfg, 41);
        FinetuneResult r = finetune(kTinyTrain, kTinyDev, spec, model, tok, nullptr, lambda, tc, 32);
        return std::make_pair(r.dev_trace, std::vector<double>(model.parameters().begin(), model.parameters().end()));
    };
    auto [trace_a, params_a] = run();
    auto [trace_b, params_b] = run();
    CHECK(trace_a == trace_b);
    CHECK(params_a == params_b);
    CHECK(trace_a.size() > 1);
}

TEST_CASE("epoch-end evaluations are not duplicated") {
    auto tok = shared_tokenizer();
    auto spec = sentiment_task();
    auto lambda = LambdaWeights::for_task(spec, 0.5);
    ScalarScorer scorer(0.1);

    TrainConfig tc;
    tc.learning_rate = 1e-4;
    tc.batch_size = 2;  // 2 steps per epoch
    tc.epochs = 3;
    tc.eval_every = 2;  // lands exactly on every epoch boundary
    tc.early_stop_patience = 50;
    FinetuneResult r = finetune(kTinyTrain, kTinyDev, spec, scorer, tok, nullptr, lambda, tc, 32);
    // Step-0 eval plus one per epoch.
    CHECK(r.dev_trace.size() == 4);
    CHECK(r.steps_run == 6);
}

TEST_CASE("training aborts when the loss stops being finite") {
    auto tok = shared_tokenizer();
    auto spec = sentiment_task();
    auto lambda = LambdaWeights::for_task(spec, 0.5);
    ScalarScorer scorer(0.1);

    TrainConfig tc;
    tc.learning_rate = 1e8;
    tc.weight_decay = 1.0;  // the scalar logit overflows within a few steps
    tc.batch_size = 4;
    tc.epochs = 400;
    tc.eval_every = 10000;
    tc.early_stop_patience = 10000;
    tc.warmup_ratio = 0.0;
    // Either guard may fire first: the non-finite loss check in the loop or
    // the non-finite logit check in the scoring path.
    CHECK_THROWS(finetune(kTinyTrain, kTinyDev, spec, scorer, tok, nullptr, lambda, tc, 32));
}

TEST_CASE("mixture weight grid") {
    auto grid = lambda0_grid();
    REQUIRE(grid.size() == 31);
    CHECK(grid.front() == 0.0);
    CHECK(grid.back() == 1.0);
    for (int i = 0; i <= 30; ++i) CHECK(grid[static_cast<size_t>(i)] == doctest::Approx(i / 30.0).epsilon(1e-15));
    for (size_t i = 1; i < grid.size(); ++i) CHECK(grid[i] > grid[i - 1]);
}

TEST_CASE("flat grid metrics select the smallest mixture weight") {
    auto tok = shared_tokenizer();
    auto spec = sentiment_task();

    TrainConfig tc;
    tc.learning_rate = 0.0;  // every grid point evaluates identically
    tc.weight_decay = 0.0;
    tc.batch_size = 4;
    tc.epochs = 1;
    tc.eval_every = 100;
    tc.seed = 11;

    ScorerFactory factory = [] { return std::make_unique<ScalarScorer>(0.0); };
    GridSearchResult serial =
        grid_search_lambda0(kTinyTrain, kTinyDev, spec, factory, tok, nullptr, tc, 32, 1);
    CHECK(serial.lambda0 == 0.0);
    CHECK(serial.best.lambda0 == 0.0);
    REQUIRE(serial.points.size() == 31);
    for (const auto& p : serial.points) CHECK(p.dev_metric == serial.points.front().dev_metric);

    GridSearchResult threaded =
        grid_search_lambda0(kTinyTrain, kTinyDev, spec, factory, tok, nullptr, tc, 32, 3);
    CHECK(threaded.lambda0 == serial.lambda0);
    CHECK(threaded.best.dev_metric == serial.best.dev_metric);
    for (size_t i = 0; i < serial.points.size(); ++i)
        CHECK(threaded.points[i].dev_metric == serial.points[i].dev_metric);
}

TEST_CASE("checkpoint files restore the model and its metadata") {
    ToyEncoderConfig cfg;
    cfg.vocab_size = 9;
    cfg.embedding_dim = 16;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.max_positions = 16;
    cfg.dropout = 0.0;
    ToyDiscriminator model(cfg, 123);

    CheckpointMeta meta;
    meta.step = 42;
    meta.dev_metric = 0.9375;
    meta.lambda0 = 0.8;
    meta.seed = 21;
    meta.config_hash = "deadbeef01234567";

    const std::string path = "ckpt_roundtrip.bin";
    save_checkpoint(path, model, meta);
    auto [restored, back] = load_checkpoint(path);
    std::remove(path.c_str());
    std::remove((path + ".meta.json").c_str());

    CHECK(restored.params().values() == model.params().values());
    CHECK(restored.config() == model.config());
    CHECK(back.step == meta.step);
    CHECK(back.dev_metric == meta.dev_metric);
    CHECK(back.lambda0 == meta.lambda0);
    CHECK(back.seed == meta.seed);
    CHECK(back.config_hash == meta.config_hash);

    CHECK_THROWS(load_checkpoint("no_such_checkpoint"));
}

TEST_CASE("training configs reject nonsense") {
    TrainConfig tc;
    tc.batch_size = 0;
    CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
    tc = {};
    tc.epochs = -1;
    CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
    tc = {};
    tc.warmup_ratio = 1.0;
    CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
    tc = {};
    CHECK_NOTHROW(tc.validate());
}
