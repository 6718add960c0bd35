#include "scs/task.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "scs/tokenizer.hpp"

namespace scs {

namespace {

size_t count_occurrences(const std::string& s, const std::string& needle) {
    size_t n = 0;
    for (size_t pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + needle.size())) ++n;
    return n;
}

TaskSpec make_task(std::string name, TemplateKind kind, std::string pattern, Metric metric,
                   std::vector<std::pair<std::string, std::string>> label_words,
                   std::optional<int> positive = std::nullopt) {
    TaskSpec spec;
    spec.name = std::move(name);
    spec.tmpl = Template{kind, std::move(pattern)};
    spec.metric = metric;
    spec.positive_label = positive;
    int id = 0;
    for (auto& [lname, word] : label_words) {
        spec.labels.push_back(Label{id++, lname});
        spec.verbalizer.words.push_back(word);
    }
    return spec;
}

}  // namespace

const Label* TaskSpec::label_by_name(const std::string& n) const {
    for (const auto& l : labels) {
        if (l.name == n) return &l;
    }
    return nullptr;
}

std::vector<TaskSpec> builtin_tasks() {
    const std::string pair_q = "<S1>? <V>, <S2>";
    std::vector<TaskSpec> tasks;
    tasks.push_back(make_task("SNLI", TemplateKind::SentencePair, pair_q, Metric::Accuracy,
                              {{"entailment", "Yes"}, {"neutral", "Maybe"}, {"contradiction", "No"}}));
    tasks.push_back(make_task("MNLI", TemplateKind::SentencePair, pair_q, Metric::Accuracy,
                              {{"entailment", "Yes"}, {"neutral", "Maybe"}, {"contradiction", "No"}}));
    tasks.push_back(make_task("QNLI", TemplateKind::SentencePair, pair_q, Metric::Accuracy,
                              {{"entailment", "Yes"}, {"not_entailment", "No"}}));
    tasks.push_back(make_task("RTE", TemplateKind::SentencePair, pair_q, Metric::Accuracy,
                              {{"entailment", "Yes"}, {"not_entailment", "No"}}));
    // The positive class for the F1 tasks is the "equivalent"/"duplicate"
    // label (the one verbalized as Yes).
    tasks.push_back(make_task("MRPC", TemplateKind::SentencePair, pair_q, Metric::BinaryF1,
                              {{"equivalent", "Yes"}, {"not_equivalent", "No"}}, 0));
    tasks.push_back(make_task("QQP", TemplateKind::SentencePair, "<S1>. <V>, <S2>", Metric::BinaryF1,
                              {{"duplicate", "Yes"}, {"not_duplicate", "No"}}, 0));
    tasks.push_back(make_task("SST-2", TemplateKind::SingleSentence, "<S1> It is <V>.", Metric::Accuracy,
                              {{"negative", "terrible"}, {"positive", "great"}}));
    tasks.push_back(make_task("SST-5", TemplateKind::SingleSentence, "<S1> It is <V>.", Metric::Accuracy,
                              {{"very-negative", "terrible"},
                               {"negative", "bad"},
                               {"neutral", "okay"},
                               {"positive", "good"},
                               {"very-positive", "great"}}));
    tasks.push_back(make_task("MR", TemplateKind::SingleSentence, "<S1> It is <V>.", Metric::Accuracy,
                              {{"negative", "terrible"}, {"positive", "great"}}));
    tasks.push_back(make_task("CR", TemplateKind::SingleSentence, "<S1> It is <V>.", Metric::Accuracy,
                              {{"negative", "terrible"}, {"positive", "great"}}));
    return tasks;
}

std::optional<TaskSpec> builtin_task(const std::string& name) {
    for (auto& t : builtin_tasks()) {
        if (t.name == name) return t;
    }
    return std::nullopt;
}

ValidationReport validate_task_shape(const TaskSpec& spec) {
    ValidationReport report;
    if (spec.name.empty()) report.fail("task name is empty");
    if (spec.labels.size() < 2) report.fail("a task needs at least 2 labels");
    for (size_t i = 0; i < spec.labels.size(); ++i) {
        if (spec.labels[i].id != static_cast<int>(i))
            report.fail("label ids must be contiguous from 0; got id " + std::to_string(spec.labels[i].id) +
                        " at position " + std::to_string(i));
    }
    std::set<std::string> names;
    for (const auto& l : spec.labels) {
        if (!names.insert(l.name).second) report.fail("duplicate label name: " + l.name);
    }
    if (spec.verbalizer.words.size() != spec.labels.size())
        report.fail("verbalizer must map every label to a word");

    const std::string& p = spec.tmpl.pattern;
    if (count_occurrences(p, "<V>") != 1) report.fail("template must contain exactly one <V> placeholder");
    const size_t s1 = count_occurrences(p, "<S1>");
    const size_t s2 = count_occurrences(p, "<S2>");
    if (s1 != 1) report.fail("template must contain exactly one <S1> placeholder");
    if (spec.tmpl.kind == TemplateKind::SingleSentence && s2 != 0)
        report.fail("single-sentence template must not contain <S2>");
    if (spec.tmpl.kind == TemplateKind::SentencePair && s2 != 1)
        report.fail("sentence-pair template must contain exactly one <S2>");

    if (spec.metric == Metric::BinaryF1) {
        if (!spec.positive_label)
            report.fail("positive_label is required for the binary-F1 metric");
        else if (*spec.positive_label < 0 || *spec.positive_label >= static_cast<int>(spec.labels.size()))
            report.fail("positive_label out of range");
    } else if (spec.positive_label) {
        report.fail("positive_label is only meaningful for the binary-F1 metric");
    }
    return report;
}

ValidationReport validate_task(const TaskSpec& spec, const Tokenizer& tokenizer) {
    ValidationReport report = validate_task_shape(spec);
    if (spec.verbalizer.words.size() != spec.labels.size()) return report;

    std::set<std::string> words_seen;
    std::set<int> ids_seen;
    for (size_t i = 0; i < spec.labels.size(); ++i) {
        const std::string& word = spec.verbalizer.words[i];
        const std::string& lname = spec.labels[i].name;
        if (!words_seen.insert(word).second) {
            report.fail("duplicate label word \"" + word + "\" (label " + lname + ")");
            continue;
        }
        Encoding enc = tokenizer.encode(word);
        if (enc.size() != 1) {
            report.fail("label word \"" + word + "\" of label " + lname + " tokenizes to " +
                        std::to_string(enc.size()) + " tokens; exactly one is required");
            continue;
        }
        if (enc.ids[0] == tokenizer.unk_id()) {
            report.fail("label word \"" + word + "\" of label " + lname + " is not in the vocabulary");
            continue;
        }
        if (!ids_seen.insert(enc.ids[0]).second)
            report.fail("label word \"" + word + "\" of label " + lname + " collides with another label's token");
    }
    return report;
}

std::string to_string(Metric m) {
    return m == Metric::Accuracy ? "accuracy" : "binary-f1";
}

std::string to_string(TemplateKind k) {
    return k == TemplateKind::SingleSentence ? "single-sentence" : "sentence-pair";
}

std::string serialize_task(const TaskSpec& spec) {
    std::ostringstream out;
    out << "name " << spec.name << "\n";
    out << "kind " << to_string(spec.tmpl.kind) << "\n";
    out << "metric " << to_string(spec.metric) << "\n";
    out << "template " << spec.tmpl.pattern << "\n";
    for (size_t i = 0; i < spec.labels.size(); ++i)
        out << "label " << spec.labels[i].id << " " << spec.labels[i].name << " " << spec.verbalizer.words[i] << "\n";
    if (spec.positive_label) out << "positive_label " << *spec.positive_label << "\n";
    return out.str();
}

TaskSpec parse_task(const std::string& text) {
    TaskSpec spec;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool have_positive = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        auto rest = [&ls]() {
            std::string r;
            std::getline(ls, r);
            size_t b = r.find_first_not_of(' ');
            return b == std::string::npos ? std::string() : r.substr(b);
        };
        if (key == "name") {
            spec.name = rest();
        } else if (key == "kind") {
            std::string k = rest();
            if (k == "single-sentence") spec.tmpl.kind = TemplateKind::SingleSentence;
            else if (k == "sentence-pair") spec.tmpl.kind = TemplateKind::SentencePair;
            else throw std::runtime_error("task spec line " + std::to_string(lineno) + ": unknown kind \"" + k + "\"");
        } else if (key == "metric") {
            std::string m = rest();
            if (m == "accuracy") spec.metric = Metric::Accuracy;
            else if (m == "binary-f1") spec.metric = Metric::BinaryF1;
            else throw std::runtime_error("task spec line " + std::to_string(lineno) + ": unknown metric \"" + m + "\"");
        } else if (key == "template") {
            spec.tmpl.pattern = rest();
        } else if (key == "label") {
            Label l;
            std::string word;
            if (!(ls >> l.id >> l.name >> word))
                throw std::runtime_error("task spec line " + std::to_string(lineno) + ": expected \"label <id> <name> <word>\"");
            spec.labels.push_back(l);
            spec.verbalizer.words.push_back(word);
        } else if (key == "positive_label") {
            int id;
            if (!(ls >> id))
                throw std::runtime_error("task spec line " + std::to_string(lineno) + ": expected \"positive_label <id>\"");
            spec.positive_label = id;
            have_positive = true;
        } else {
            throw std::runtime_error("task spec line " + std::to_string(lineno) + ": unknown key \"" + key + "\"");
        }
    }
    (void)have_positive;
    ValidationReport report = validate_task_shape(spec);
    if (!report.ok) {
        std::string msg = "invalid task spec:";
        for (const auto& p : report.problems) msg += "\n  " + p;
        throw std::runtime_error(msg);
    }
    return spec;
}

TaskSpec load_task_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read task file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_task(ss.str());
}

void save_task_file(const TaskSpec& spec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write task file: " + path);
    out << serialize_task(spec);
}

}  // namespace scs
