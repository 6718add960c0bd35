#include "scs/rtd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "scs/train.hpp"

namespace scs {

namespace {

// Numerically stable binary cross-entropy with logits.
double bce_with_logits(double z, double y) {
    return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

void RtdCorpusConfig::validate() const {
    if (corpus.empty()) throw std::invalid_argument("pretraining corpus is empty");
    if (replacement_rate <= 0.0 || replacement_rate >= 1.0)
        throw std::invalid_argument("replacement_rate must lie in (0,1)");
}

ReplacementDistribution::ReplacementDistribution(const std::vector<std::vector<int>>& corpus_ids,
                                                 const Tokenizer& tokenizer, ReplacementSampler sampler)
    : first_regular_id_(tokenizer.unk_id() + 1),
      vocab_size_(static_cast<int>(tokenizer.vocab_size())),
      sampler_(sampler) {
    if (vocab_size_ - first_regular_id_ < 2)
        throw std::invalid_argument("vocabulary too small to sample distinct replacements");
    if (sampler_ == ReplacementSampler::UnigramFrequency) {
        std::vector<double> counts(static_cast<size_t>(vocab_size_ - first_regular_id_), 0.0);
        for (const auto& ids : corpus_ids) {
            for (int id : ids) {
                if (id >= first_regular_id_) counts[static_cast<size_t>(id - first_regular_id_)] += 1.0;
            }
        }
        double total = 0.0;
        for (double c : counts) total += c;
        if (total == 0.0) throw std::invalid_argument("corpus has no regular tokens");
        cumulative_.resize(counts.size());
        double acc = 0.0;
        for (size_t i = 0; i < counts.size(); ++i) {
            acc += counts[i] / total;
            cumulative_[i] = acc;
        }
        cumulative_.back() = 1.0;
    }
}

int ReplacementDistribution::sample_replacement(int original, Rng& rng) const {
    if (sampler_ == ReplacementSampler::UnigramFrequency) {
        for (int attempt = 0; attempt < 64; ++attempt) {
            const double u = rng.uniform();
            const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
            const size_t idx = std::min(static_cast<size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
            const int id = first_regular_id_ + static_cast<int>(idx);
            if (id != original) return id;
        }
        // A near-degenerate unigram distribution; fall through to uniform.
    }
    const int span = vocab_size_ - first_regular_id_;
    while (true) {
        const int id = first_regular_id_ + static_cast<int>(rng.below(static_cast<uint64_t>(span)));
        if (id != original) return id;
    }
}

CorruptedSequence corrupt_sequence(const std::vector<int>& ids, const Tokenizer& tokenizer, double rate,
                                   const ReplacementDistribution& dist, Rng& rng) {
    CorruptedSequence out;
    out.ids = ids;
    out.labels.assign(ids.size(), 0);
    for (size_t t = 0; t < ids.size(); ++t) {
        if (ids[t] == tokenizer.cls_id() || ids[t] == tokenizer.sep_id()) continue;
        if (rng.uniform() < rate) {
            out.ids[t] = dist.sample_replacement(ids[t], rng);
            out.labels[t] = 1;
        }
    }
    return out;
}

std::vector<int> encode_for_rtd(const std::string& sentence, const Tokenizer& tokenizer, size_t max_len) {
    if (max_len < 3) throw std::invalid_argument("max_len too small for [CLS] token [SEP]");
    Encoding enc = tokenizer.encode(sentence);
    if (enc.ids.size() > max_len - 2) enc.ids.resize(max_len - 2);
    std::vector<int> ids;
    ids.reserve(enc.ids.size() + 2);
    ids.push_back(tokenizer.cls_id());
    ids.insert(ids.end(), enc.ids.begin(), enc.ids.end());
    ids.push_back(tokenizer.sep_id());
    return ids;
}

ToyDiscriminator pretrain_rtd(const RtdCorpusConfig& config, const ToyEncoderConfig& encoder,
                              const Tokenizer& tokenizer, long steps, const RtdOptim& optim) {
    config.validate();
    if (steps <= 0) throw std::invalid_argument("steps must be positive");
    if (optim.batch_size <= 0) throw std::invalid_argument("batch_size must be positive");

    ToyEncoderConfig enc_cfg = encoder;
    if (enc_cfg.vocab_size == 0) enc_cfg.vocab_size = static_cast<int>(tokenizer.vocab_size());
    if (enc_cfg.vocab_size < static_cast<int>(tokenizer.vocab_size()))
        throw std::invalid_argument("encoder vocab smaller than the tokenizer vocabulary");

    const size_t max_len = static_cast<size_t>(enc_cfg.max_positions);
    std::vector<std::vector<int>> sequences;
    sequences.reserve(config.corpus.size());
    for (const auto& sentence : config.corpus) {
        std::vector<int> ids = encode_for_rtd(sentence, tokenizer, max_len);
        if (ids.size() > 2) sequences.push_back(std::move(ids));
    }
    if (sequences.empty()) throw std::invalid_argument("pretraining corpus has no usable sentences");

    ReplacementDistribution dist(sequences, tokenizer, config.sampler);

    ToyDiscriminator model(enc_cfg, optim.seed);
    AdamW opt(model.parameters().size(), optim.beta1, optim.beta2, optim.adam_eps, optim.weight_decay);
    Rng rng(optim.seed ^ 0x5851f42d4c957f2dULL);

    for (long step = 1; step <= steps; ++step) {
        model.zero_grad();
        double batch_loss = 0.0;
        for (int b = 0; b < optim.batch_size; ++b) {
            const auto& ids = sequences[rng.below(sequences.size())];
            const CorruptedSequence cs = corrupt_sequence(ids, tokenizer, config.replacement_rate, dist, rng);
            const std::vector<double> z = model.forward_ids(cs.ids);

            const double inv_t = 1.0 / static_cast<double>(z.size());
            std::vector<double> dz(z.size());
            double loss = 0.0;
            for (size_t t = 0; t < z.size(); ++t) {
                const double y = static_cast<double>(cs.labels[t]);
                loss += bce_with_logits(z[t], y) * inv_t;
                dz[t] = (sigmoid(z[t]) - y) * inv_t;
            }
            batch_loss += loss;

            const std::vector<std::vector<double>> one{std::move(dz)};
            model.backward(one);
        }
        if (!std::isfinite(batch_loss)) throw std::runtime_error("pretraining diverged: non-finite loss");

        const double lr = lr_at(step, steps, optim.learning_rate, optim.warmup_ratio);
        opt.step(model.parameters(), model.gradients(), lr, 1.0 / static_cast<double>(optim.batch_size));
    }
    return model;
}

RtdEval evaluate_rtd(const ToyDiscriminator& model, const RtdCorpusConfig& config,
                     const std::vector<std::string>& held_out, const Tokenizer& tokenizer, uint64_t seed) {
    if (held_out.empty()) throw std::invalid_argument("empty held-out set");

    std::vector<std::vector<int>> sequences;
    for (const auto& s : held_out) {
        std::vector<int> ids = encode_for_rtd(s, tokenizer, static_cast<size_t>(model.config().max_positions));
        if (ids.size() > 2) sequences.push_back(std::move(ids));
    }
    ReplacementDistribution dist(sequences, tokenizer, config.sampler);
    Rng rng(seed);

    std::vector<std::pair<double, int>> scored;  // (z, label)
    double sum_rep = 0.0, sum_orig = 0.0;
    long n_rep = 0, n_orig = 0;
    for (const auto& ids : sequences) {
        const CorruptedSequence cs = corrupt_sequence(ids, tokenizer, config.replacement_rate, dist, rng);
        const std::vector<double> z = model.score_ids(cs.ids);
        for (size_t t = 0; t < z.size(); ++t) {
            if (cs.ids[t] == tokenizer.cls_id() || cs.ids[t] == tokenizer.sep_id()) continue;
            scored.emplace_back(z[t], cs.labels[t]);
            if (cs.labels[t] == 1) {
                sum_rep += z[t];
                ++n_rep;
            } else {
                sum_orig += z[t];
                ++n_orig;
            }
        }
    }

    RtdEval eval;
    eval.tokens = n_rep + n_orig;
    eval.replaced_fraction = eval.tokens ? static_cast<double>(n_rep) / static_cast<double>(eval.tokens) : 0.0;
    eval.mean_z_replaced = n_rep ? sum_rep / static_cast<double>(n_rep) : 0.0;
    eval.mean_z_original = n_orig ? sum_orig / static_cast<double>(n_orig) : 0.0;

    // Mann-Whitney AUC with midranks for ties.
    if (n_rep > 0 && n_orig > 0) {
        std::sort(scored.begin(), scored.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        double rank_sum_pos = 0.0;
        size_t i = 0;
        while (i < scored.size()) {
            size_t j = i;
            while (j < scored.size() && scored[j].first == scored[i].first) ++j;
            const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
            for (size_t k = i; k < j; ++k)
                if (scored[k].second == 1) rank_sum_pos += midrank;
            i = j;
        }
        const double n1 = static_cast<double>(n_rep);
        const double n2 = static_cast<double>(n_orig);
        eval.auc = (rank_sum_pos - n1 * (n1 + 1.0) / 2.0) / (n1 * n2);
    } else {
        eval.auc = 0.5;
    }
    return eval;
}

}  // namespace scs
