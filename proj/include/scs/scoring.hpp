#pragma once

#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "scs/idf.hpp"
#include "scs/prompt.hpp"
#include "scs/task.hpp"

namespace scs {

/// Per-position inconsistency logits z_t for one prompt. sigmoid(z_t) is the
/// probability that token t was replaced; higher means less consistent.
struct TokenLogits {
    std::vector<double> z;

    size_t size() const { return z.size(); }
};

/// A discriminative token scorer. score() runs in evaluation mode and must be
/// deterministic; the output length equals the prompt length.
class Scorer {
public:
    virtual ~Scorer() = default;

    virtual std::vector<TokenLogits> score(std::span<const BuiltPrompt> prompts) const = 0;
    virtual bool trainable() const { return false; }
};

/// A scorer that exposes gradients. forward() runs in training mode and
/// caches activations; backward() takes dLoss/dz for each prompt of the last
/// forward() and accumulates parameter gradients. Parameters and gradients
/// are exposed flat so optimizers and checkpoints stay generic.
class TrainableScorer : public Scorer {
public:
    bool trainable() const override { return true; }

    virtual std::vector<TokenLogits> forward(std::span<const BuiltPrompt> prompts) = 0;
    virtual void backward(std::span<const std::vector<double>> dlogits) = 0;
    virtual void zero_grad() = 0;
    virtual std::span<double> parameters() = 0;
    virtual std::span<const double> parameters_const() const = 0;
    virtual std::span<const double> gradients() const = 0;
};

/// Distribution over labels contributed by one prompt component.
struct ComponentDistribution {
    Component component = Component::LabelWord;
    std::vector<double> probs;
    int argmax = 0;  // ties break toward the smallest label id
};

/// Mixture weights over components: label_word is the label-word weight and
/// sentence holds one entry per input sentence. They sum to 1.
struct LambdaWeights {
    double label_word = 0.5;
    std::vector<double> sentence;

    /// Derives the sentence weights from lambda0 by the fixed rule:
    /// single-sentence tasks get 1-lambda0, sentence-pair tasks split
    /// (1-lambda0)/2 over the two sentences.
    static LambdaWeights for_task(const TaskSpec& spec, double lambda0);

    size_t arity() const { return 1 + sentence.size(); }
    double sum() const;
};

struct PredictionResult {
    int predicted = 0;
    std::vector<double> sc;
    std::vector<ComponentDistribution> components;
    bool unanimous = false;
};

/// Softmax over labels of the negated label-word logits, each label's logit
/// read from its own prompt. label_positions[l] is the label word position in
/// prompt l.
ComponentDistribution label_word_consistency(std::span<const TokenLogits> logits_per_prompt,
                                             std::span<const size_t> label_positions);

/// Softmax over labels of the negated weighted-mean logits of a span that
/// sits at the same positions in every prompt. With uniform weights this is
/// the plain mean; when the weights sum to (near) zero it falls back to
/// uniform weights.
ComponentDistribution subsequence_consistency(std::span<const TokenLogits> logits_per_prompt,
                                              const ComponentSpan& span, std::span<const double> weights);

/// Raw span weights scaled to sum to 1, with the same uniform fallback for
/// vanishing mass that subsequence_consistency applies.
std::vector<double> normalized_span_weights(std::span<const double> raw);

/// Convex mixture of the component distributions under the lambda weights.
std::vector<double> aggregate_sc(std::span<const ComponentDistribution> components, const LambdaWeights& lambda);

/// Pure scoring path from already-computed logits: all component
/// distributions, the aggregate, the argmax label, and the unanimity flag.
/// idf == nullptr selects uniform token weights (the no-IDF variant).
PredictionResult score_example(std::span<const BuiltPrompt> prompts, std::span<const TokenLogits> logits,
                               const IdfTable* idf, const LambdaWeights& lambda);

/// Builds the prompts, scores them once, and assembles the prediction.
PredictionResult predict(const InputExample& example, const TaskSpec& spec, const Scorer& scorer,
                         const Tokenizer& tokenizer, const IdfTable* idf, const LambdaWeights& lambda,
                         size_t max_len);

/// Partitions results into (unanimous, disagreed) by the unanimity flag.
std::pair<std::vector<PredictionResult>, std::vector<PredictionResult>> reject_filter(
    std::span<const PredictionResult> results);

/// Argmax with ties toward the smallest index.
int argmax_smallest_tie(std::span<const double> values);

}  // namespace scs
