#pragma once

#include <optional>
#include <string>
#include <vector>

namespace scs {

class Tokenizer;

/// One class of a classification task. Ids are contiguous from 0.
struct Label {
    int id = 0;
    std::string name;

    bool operator==(const Label&) const = default;
};

/// Injective map from labels to single vocabulary words.
struct Verbalizer {
    std::vector<std::string> words;  // indexed by label id

    const std::string& word_for(int label_id) const { return words.at(static_cast<size_t>(label_id)); }
    bool operator==(const Verbalizer&) const = default;
};

enum class TemplateKind { SingleSentence, SentencePair };

/// A prompt pattern with placeholders <S1>, <S2> and exactly one <V> for the
/// label word, e.g. "<S1> It is <V>." or "<S1>? <V>, <S2>".
struct Template {
    TemplateKind kind = TemplateKind::SingleSentence;
    std::string pattern;

    bool operator==(const Template&) const = default;
};

enum class Metric { Accuracy, BinaryF1 };

struct TaskSpec {
    std::string name;
    std::vector<Label> labels;
    Verbalizer verbalizer;
    Template tmpl;
    Metric metric = Metric::Accuracy;
    // Required iff metric == BinaryF1.
    std::optional<int> positive_label;

    size_t num_labels() const { return labels.size(); }
    bool is_pair() const { return tmpl.kind == TemplateKind::SentencePair; }
    const Label* label_by_name(const std::string& name) const;

    bool operator==(const TaskSpec&) const = default;
};

struct InputExample {
    std::string sentence1;
    std::optional<std::string> sentence2;
    std::optional<int> gold_label;
};

/// Basic shape checks that need no tokenizer: label ids contiguous from 0,
/// names unique, verbalizer arity, template placeholders matching the kind,
/// positive_label present iff the metric needs one.
struct ValidationReport {
    bool ok = true;
    std::vector<std::string> problems;

    void fail(std::string msg) {
        ok = false;
        problems.push_back(std::move(msg));
    }
};

ValidationReport validate_task_shape(const TaskSpec& spec);

/// Full validation: shape checks plus the tokenizer-dependent ones — every
/// label word must encode to exactly one known token and the resulting token
/// ids must be pairwise distinct.
ValidationReport validate_task(const TaskSpec& spec, const Tokenizer& tokenizer);

/// The ten built-in tasks with their manual templates and label words.
std::vector<TaskSpec> builtin_tasks();

/// Finds a built-in task by name (case-sensitive), or nullopt.
std::optional<TaskSpec> builtin_task(const std::string& name);

/// Human-readable task spec document. Round-trips exactly.
std::string serialize_task(const TaskSpec& spec);
TaskSpec parse_task(const std::string& text);
TaskSpec load_task_file(const std::string& path);
void save_task_file(const TaskSpec& spec, const std::string& path);

std::string to_string(Metric m);
std::string to_string(TemplateKind k);

}  // namespace scs
