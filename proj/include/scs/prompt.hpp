#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "scs/task.hpp"
#include "scs/tokenizer.hpp"

namespace scs {

enum class Component { LabelWord, Sent1, Sent2 };

std::string to_string(Component c);

/// Token positions of one scored component inside a prompt. Positions are
/// sorted and disjoint across the components of a prompt; the label word
/// span holds exactly one position.
struct ComponentSpan {
    Component component = Component::LabelWord;
    std::vector<size_t> positions;
};

/// A fully instantiated discriminative prompt for one candidate label:
/// [CLS] ... [SEP] token ids, the component spans, and a per-position source
/// word (empty for the special markers and used for IDF lookup).
struct BuiltPrompt {
    int label_id = 0;
    std::vector<int> token_ids;
    std::vector<ComponentSpan> spans;
    std::vector<std::string> word_alignment;

    size_t size() const { return token_ids.size(); }
    const ComponentSpan* span(Component c) const;
    /// Position of the single label-word token.
    size_t label_word_position() const;
};

/// Template pattern split into its literal and placeholder parts.
struct TemplatePart {
    enum class Kind { Literal, Sent1, Sent2, LabelWord } kind;
    std::string literal;  // set for Kind::Literal
};

std::vector<TemplatePart> parse_template(const Template& tmpl);

/// Longest-first truncation: repeatedly drop the final token of the longer
/// sentence until the built prompt fits max_len. Already-fitting examples are
/// returned unchanged. Never errors; sentences bottom out at one token each.
/// Text is rebuilt from the surviving tokens' source words, which is exact
/// for whole-word tokenizers.
InputExample truncate(const InputExample& example, const TaskSpec& spec, const Tokenizer& tokenizer,
                      size_t max_len);

/// Instantiates one prompt per label. The prompts differ only at the label
/// word position; template literal tokens and the [CLS]/[SEP] markers belong
/// to no span. Throws if a sentence tokenizes to nothing or max_len cannot
/// hold the template plus one token per sentence.
std::vector<BuiltPrompt> build_prompts(const InputExample& example, const TaskSpec& spec,
                                       const Tokenizer& tokenizer, size_t max_len);

}  // namespace scs
