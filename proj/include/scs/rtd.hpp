#pragma once

#include <string>
#include <vector>

#include "scs/model.hpp"
#include "scs/rng.hpp"
#include "scs/tokenizer.hpp"

namespace scs {

enum class ReplacementSampler { UniformVocab, UnigramFrequency };

struct RtdCorpusConfig {
    std::vector<std::string> corpus;
    double replacement_rate = 0.15;
    ReplacementSampler sampler = ReplacementSampler::UnigramFrequency;

    void validate() const;
};

/// Optimizer knobs for the pretraining loop. The learning rate is sized for
/// the from-scratch toy encoder.
struct RtdOptim {
    int batch_size = 16;
    double learning_rate = 1e-3;
    double warmup_ratio = 0.05;
    uint64_t seed = 13;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.01;
};

/// Samples replacement tokens for corruption. Replacements are drawn over
/// non-special ids, either uniformly or from the corpus unigram distribution,
/// and never equal the token they replace.
class ReplacementDistribution {
public:
    ReplacementDistribution(const std::vector<std::vector<int>>& corpus_ids, const Tokenizer& tokenizer,
                            ReplacementSampler sampler);

    int sample_replacement(int original, Rng& rng) const;

private:
    int first_regular_id_;
    int vocab_size_;
    ReplacementSampler sampler_;
    std::vector<double> cumulative_;  // over [first_regular_id_, vocab_size_)
};

struct CorruptedSequence {
    std::vector<int> ids;
    std::vector<int> labels;  // 1 = replaced; specials are always 0
};

/// Replaces each non-special position with probability rate.
CorruptedSequence corrupt_sequence(const std::vector<int>& ids, const Tokenizer& tokenizer, double rate,
                                   const ReplacementDistribution& dist, Rng& rng);

/// Encodes a sentence as [CLS] words [SEP], clipped to max_len.
std::vector<int> encode_for_rtd(const std::string& sentence, const Tokenizer& tokenizer, size_t max_len);

/// Trains a fresh toy discriminator with replaced-token detection: corrupted
/// sequences are scored per token and fit with binary cross-entropy against
/// the replaced/original labels. encoder.vocab_size of 0 is filled from the
/// tokenizer. Deterministic for fixed seeds; throws on non-finite loss.
ToyDiscriminator pretrain_rtd(const RtdCorpusConfig& config, const ToyEncoderConfig& encoder,
                              const Tokenizer& tokenizer, long steps, const RtdOptim& optim = {});

struct RtdEval {
    double auc = 0.0;
    double mean_z_replaced = 0.0;
    double mean_z_original = 0.0;
    double replaced_fraction = 0.0;
    long tokens = 0;
};

/// Corrupts held-out sentences with the same scheme and measures how well the
/// scorer separates replaced from original tokens (Mann-Whitney AUC).
RtdEval evaluate_rtd(const ToyDiscriminator& model, const RtdCorpusConfig& config,
                     const std::vector<std::string>& held_out, const Tokenizer& tokenizer, uint64_t seed);

}  // namespace scs
