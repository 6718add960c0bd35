#include "scs/prompt.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace scs {

std::string to_string(Component c) {
    switch (c) {
        case Component::LabelWord: return "label-word";
        case Component::Sent1: return "sent1";
        case Component::Sent2: return "sent2";
    }
    return "?";
}

const ComponentSpan* BuiltPrompt::span(Component c) const {
    for (const auto& s : spans) {
        if (s.component == c) return &s;
    }
    return nullptr;
}

size_t BuiltPrompt::label_word_position() const {
    const ComponentSpan* s = span(Component::LabelWord);
    if (!s || s->positions.size() != 1) throw std::logic_error("prompt lacks a single label word position");
    return s->positions[0];
}

std::vector<TemplatePart> parse_template(const Template& tmpl) {
    std::vector<TemplatePart> parts;
    const std::string& p = tmpl.pattern;
    size_t pos = 0;
    auto push_literal = [&](size_t from, size_t to) {
        if (to > from) parts.push_back({TemplatePart::Kind::Literal, p.substr(from, to - from)});
    };
    while (pos < p.size()) {
        size_t next = p.find('<', pos);
        if (next == std::string::npos) {
            push_literal(pos, p.size());
            break;
        }
        TemplatePart::Kind kind;
        size_t len;
        if (p.compare(next, 4, "<S1>") == 0) {
            kind = TemplatePart::Kind::Sent1;
            len = 4;
        } else if (p.compare(next, 4, "<S2>") == 0) {
            kind = TemplatePart::Kind::Sent2;
            len = 4;
        } else if (p.compare(next, 3, "<V>") == 0) {
            kind = TemplatePart::Kind::LabelWord;
            len = 3;
        } else {
            // A bare '<' in a literal.
            push_literal(pos, next + 1);
            pos = next + 1;
            continue;
        }
        push_literal(pos, next);
        parts.push_back({kind, ""});
        pos = next + len;
    }
    return parts;
}

namespace {

// Tokens the template contributes regardless of the sentences: literals plus
// the single label word and the two special markers.
size_t template_overhead(const std::vector<TemplatePart>& parts, const Tokenizer& tokenizer) {
    size_t n = 2 + 1;  // [CLS], [SEP], label word
    for (const auto& part : parts) {
        if (part.kind == TemplatePart::Kind::Literal) n += tokenizer.encode(part.literal).size();
    }
    return n;
}

std::string join_words(const std::vector<std::string>& words, size_t count) {
    std::string out;
    for (size_t i = 0; i < count; ++i) {
        if (i) out += ' ';
        out += words[i];
    }
    return out;
}

}  // namespace

InputExample truncate(const InputExample& example, const TaskSpec& spec, const Tokenizer& tokenizer,
                      size_t max_len) {
    const auto parts = parse_template(spec.tmpl);
    const size_t overhead = template_overhead(parts, tokenizer);

    Encoding e1 = tokenizer.encode(example.sentence1);
    Encoding e2;
    if (spec.is_pair() && example.sentence2) e2 = tokenizer.encode(*example.sentence2);

    size_t len1 = e1.size();
    size_t len2 = e2.size();
    if (overhead + len1 + len2 <= max_len) return example;

    const size_t budget = max_len > overhead ? max_len - overhead : 0;
    if (spec.is_pair()) {
        while (len1 + len2 > budget && (len1 > 1 || len2 > 1)) {
            if (len1 >= len2 && len1 > 1) --len1;
            else --len2;
        }
    } else {
        len1 = std::max<size_t>(1, std::min(len1, budget));
    }

    InputExample out = example;
    if (len1 < e1.size()) out.sentence1 = join_words(e1.words, len1);
    if (spec.is_pair() && example.sentence2 && len2 < e2.size()) out.sentence2 = join_words(e2.words, len2);
    return out;
}

std::vector<BuiltPrompt> build_prompts(const InputExample& example, const TaskSpec& spec,
                                       const Tokenizer& tokenizer, size_t max_len) {
    if (spec.is_pair() != example.sentence2.has_value())
        throw std::invalid_argument("example shape does not match the task kind");

    const auto parts = parse_template(spec.tmpl);
    const InputExample trimmed = truncate(example, spec, tokenizer, max_len);

    Encoding e1 = tokenizer.encode(trimmed.sentence1);
    if (e1.size() == 0) throw std::invalid_argument("sentence1 tokenizes to nothing");
    Encoding e2;
    if (spec.is_pair()) {
        e2 = tokenizer.encode(*trimmed.sentence2);
        if (e2.size() == 0) throw std::invalid_argument("sentence2 tokenizes to nothing");
    }

    const size_t total = template_overhead(parts, tokenizer) + e1.size() + e2.size();
    if (total > max_len)
        throw std::invalid_argument("max_len " + std::to_string(max_len) + " cannot hold the template plus one token per sentence");

    std::vector<BuiltPrompt> prompts;
    prompts.reserve(spec.num_labels());
    for (const Label& label : spec.labels) {
        Encoding ev = tokenizer.encode(spec.verbalizer.word_for(label.id));
        if (ev.size() != 1)
            throw std::invalid_argument("label word for \"" + label.name + "\" must be a single token");

        BuiltPrompt prompt;
        prompt.label_id = label.id;
        prompt.token_ids.push_back(tokenizer.cls_id());
        prompt.word_alignment.emplace_back();

        ComponentSpan sent1{Component::Sent1, {}};
        ComponentSpan sent2{Component::Sent2, {}};
        ComponentSpan label_word{Component::LabelWord, {}};

        auto append = [&prompt](const Encoding& enc, ComponentSpan* span) {
            for (size_t i = 0; i < enc.size(); ++i) {
                if (span) span->positions.push_back(prompt.token_ids.size());
                prompt.token_ids.push_back(enc.ids[i]);
                prompt.word_alignment.push_back(enc.words[i]);
            }
        };

        for (const auto& part : parts) {
            switch (part.kind) {
                case TemplatePart::Kind::Literal: append(tokenizer.encode(part.literal), nullptr); break;
                case TemplatePart::Kind::Sent1: append(e1, &sent1); break;
                case TemplatePart::Kind::Sent2: append(e2, &sent2); break;
                case TemplatePart::Kind::LabelWord: append(ev, &label_word); break;
            }
        }
        prompt.token_ids.push_back(tokenizer.sep_id());
        prompt.word_alignment.emplace_back();

        prompt.spans.push_back(std::move(label_word));
        prompt.spans.push_back(std::move(sent1));
        if (spec.is_pair()) prompt.spans.push_back(std::move(sent2));
        prompts.push_back(std::move(prompt));
    }
    return prompts;
}

}  // namespace scs
