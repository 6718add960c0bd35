#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scs/prompt.hpp"

namespace scs {

/// Per-word inverse document frequency, min-max normalized into [0,1].
/// Raw value is ln(N / df) on document presence; words occurring in every
/// document normalize to 0 and drop out of the weighted mean. Unknown words
/// default to 1 (rare is salient). Immutable once built.
class IdfTable {
public:
    /// Each document is a word sequence (a sentence-pair example contributes
    /// both sentences as one document). Throws on an empty corpus.
    static IdfTable compute(const std::vector<std::vector<std::string>>& documents);

    /// Convenience: splits each text with the word tokenizer's boundaries.
    static IdfTable compute_from_texts(std::span<const std::string> texts);

    double weight(std::string_view word) const;
    double default_weight() const { return default_weight_; }
    size_t corpus_size() const { return corpus_size_; }
    size_t vocabulary_size() const { return weights_.size(); }

    /// Two-column text file (word, weight) behind a header carrying N and the
    /// default weight. Weights are printed with full precision so a reload is
    /// bit-exact.
    void save(const std::string& path) const;
    static IdfTable load(const std::string& path);

    bool operator==(const IdfTable&) const = default;

private:
    std::map<std::string, double, std::less<>> weights_;
    double default_weight_ = 1.0;
    size_t corpus_size_ = 0;
};

/// Per-token weights for a component span: each position receives the weight
/// of its aligned word. Throws if a span position has no alignment, which
/// indicates a prompt builder bug.
std::vector<double> token_weights(const BuiltPrompt& prompt, const ComponentSpan& span, const IdfTable& table);

}  // namespace scs
