#include "scs/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace scs {

namespace {

constexpr double kWeightMassFloor = 1e-12;

// Softmax of the negated per-prompt means, with max-subtraction.
std::vector<double> softmax_neg(const std::vector<double>& means) {
    std::vector<double> probs(means.size());
    double hi = -std::numeric_limits<double>::infinity();
    for (double m : means) hi = std::max(hi, -m);
    double total = 0.0;
    for (size_t l = 0; l < means.size(); ++l) {
        probs[l] = std::exp(-means[l] - hi);
        total += probs[l];
    }
    for (double& p : probs) p /= total;
    return probs;
}

}  // namespace

int argmax_smallest_tie(std::span<const double> values) {
    int best = 0;
    for (size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[static_cast<size_t>(best)]) best = static_cast<int>(i);
    }
    return best;
}

LambdaWeights LambdaWeights::for_task(const TaskSpec& spec, double lambda0) {
    if (lambda0 < 0.0 || lambda0 > 1.0) throw std::invalid_argument("lambda0 must lie in [0,1]");
    LambdaWeights w;
    w.label_word = lambda0;
    if (spec.is_pair())
        w.sentence = {(1.0 - lambda0) / 2.0, (1.0 - lambda0) / 2.0};
    else
        w.sentence = {1.0 - lambda0};
    return w;
}

double LambdaWeights::sum() const {
    return label_word + std::accumulate(sentence.begin(), sentence.end(), 0.0);
}

ComponentDistribution label_word_consistency(std::span<const TokenLogits> logits_per_prompt,
                                             std::span<const size_t> label_positions) {
    if (logits_per_prompt.size() != label_positions.size())
        throw std::invalid_argument("one label position per prompt is required");
    std::vector<double> means(logits_per_prompt.size());
    for (size_t l = 0; l < logits_per_prompt.size(); ++l) {
        const auto& z = logits_per_prompt[l].z;
        if (label_positions[l] >= z.size()) throw std::out_of_range("label word position out of range");
        means[l] = z[label_positions[l]];
    }
    ComponentDistribution dist;
    dist.component = Component::LabelWord;
    dist.probs = softmax_neg(means);
    dist.argmax = argmax_smallest_tie(dist.probs);
    return dist;
}

std::vector<double> normalized_span_weights(std::span<const double> raw) {
    if (raw.empty()) throw std::invalid_argument("empty weight vector");
    double mass = 0.0;
    for (double w : raw) mass += w;
    std::vector<double> out(raw.size());
    if (mass < kWeightMassFloor) {
        std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(raw.size()));
    } else {
        for (size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] / mass;
    }
    return out;
}

ComponentDistribution subsequence_consistency(std::span<const TokenLogits> logits_per_prompt,
                                              const ComponentSpan& span, std::span<const double> weights) {
    if (span.positions.empty()) throw std::invalid_argument("empty component span");
    if (weights.size() != span.positions.size())
        throw std::invalid_argument("one weight per span position is required");

    const std::vector<double> norm = normalized_span_weights(weights);

    std::vector<double> means(logits_per_prompt.size());
    for (size_t l = 0; l < logits_per_prompt.size(); ++l) {
        const auto& z = logits_per_prompt[l].z;
        double acc = 0.0;
        for (size_t i = 0; i < span.positions.size(); ++i) {
            if (span.positions[i] >= z.size()) throw std::out_of_range("span position out of range");
            acc += norm[i] * z[span.positions[i]];
        }
        means[l] = acc;
    }
    ComponentDistribution dist;
    dist.component = span.component;
    dist.probs = softmax_neg(means);
    dist.argmax = argmax_smallest_tie(dist.probs);
    return dist;
}

std::vector<double> aggregate_sc(std::span<const ComponentDistribution> components, const LambdaWeights& lambda) {
    if (components.size() != lambda.arity())
        throw std::invalid_argument("component count does not match the lambda arity");
    if (std::abs(lambda.sum() - 1.0) > 1e-9) throw std::invalid_argument("lambda weights must sum to 1");

    const size_t n = components[0].probs.size();
    std::vector<double> sc(n, 0.0);
    for (size_t c = 0; c < components.size(); ++c) {
        if (components[c].probs.size() != n) throw std::invalid_argument("component label arity mismatch");
        const double w = c == 0 ? lambda.label_word : lambda.sentence[c - 1];
        for (size_t l = 0; l < n; ++l) sc[l] += w * components[c].probs[l];
    }
    return sc;
}

PredictionResult score_example(std::span<const BuiltPrompt> prompts, std::span<const TokenLogits> logits,
                               const IdfTable* idf, const LambdaWeights& lambda) {
    if (prompts.empty() || prompts.size() != logits.size())
        throw std::invalid_argument("one logit sequence per prompt is required");
    for (size_t l = 0; l < prompts.size(); ++l) {
        if (logits[l].size() != prompts[l].size())
            throw std::invalid_argument("logit length does not match prompt length");
        for (double v : logits[l].z) {
            if (!std::isfinite(v)) throw std::invalid_argument("non-finite logit from scorer");
        }
    }

    std::vector<size_t> label_positions;
    label_positions.reserve(prompts.size());
    for (const auto& p : prompts) label_positions.push_back(p.label_word_position());

    PredictionResult result;
    result.components.push_back(label_word_consistency(logits, label_positions));

    for (Component c : {Component::Sent1, Component::Sent2}) {
        const ComponentSpan* span = prompts[0].span(c);
        if (!span) continue;
        std::vector<double> weights = idf ? token_weights(prompts[0], *span, *idf)
                                          : std::vector<double>(span->positions.size(), 1.0);
        result.components.push_back(subsequence_consistency(logits, *span, weights));
    }

    result.sc = aggregate_sc(result.components, lambda);
    result.predicted = argmax_smallest_tie(result.sc);
    result.unanimous = true;
    for (const auto& comp : result.components) {
        if (comp.argmax != result.components[0].argmax) {
            result.unanimous = false;
            break;
        }
    }
    return result;
}

PredictionResult predict(const InputExample& example, const TaskSpec& spec, const Scorer& scorer,
                         const Tokenizer& tokenizer, const IdfTable* idf, const LambdaWeights& lambda,
                         size_t max_len) {
    const std::vector<BuiltPrompt> prompts = build_prompts(example, spec, tokenizer, max_len);
    const std::vector<TokenLogits> logits = scorer.score(prompts);
    return score_example(prompts, logits, idf, lambda);
}

std::pair<std::vector<PredictionResult>, std::vector<PredictionResult>> reject_filter(
    std::span<const PredictionResult> results) {
    std::pair<std::vector<PredictionResult>, std::vector<PredictionResult>> out;
    for (const auto& r : results) (r.unanimous ? out.first : out.second).push_back(r);
    return out;
}

}  // namespace scs
