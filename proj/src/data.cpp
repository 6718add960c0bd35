#include "scs/data.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "scs/rng.hpp"

namespace scs {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
        const size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return fields;
}

std::string sanitize(std::string s) {
    std::replace(s.begin(), s.end(), '\t', ' ');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

}  // namespace

std::vector<uint64_t> default_seeds() { return {13, 21, 42, 87, 100}; }

std::vector<InputExample> load_tsv(const std::string& path, const TaskSpec& spec) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);

    const size_t columns = spec.is_pair() ? 3 : 2;
    std::vector<InputExample> out;
    std::string line;
    size_t line_no = 0;
    bool first_row = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        const std::vector<std::string> fields = split_tabs(line);
        if (fields.size() != columns)
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected " +
                                     std::to_string(columns) + " tab-separated columns, got " +
                                     std::to_string(fields.size()));

        const Label* label = spec.label_by_name(fields.back());
        if (!label) {
            if (first_row) {  // header row
                first_row = false;
                continue;
            }
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": unknown label name '" +
                                     fields.back() + "' for task " + spec.name);
        }
        first_row = false;

        InputExample ex;
        ex.sentence1 = fields[0];
        if (spec.is_pair()) ex.sentence2 = fields[1];
        ex.gold_label = label->id;
        out.push_back(std::move(ex));
    }
    return out;
}

void save_tsv(const std::string& path, std::span<const InputExample> examples, const TaskSpec& spec) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& ex : examples) {
        if (!ex.gold_label) throw std::invalid_argument("cannot save an unlabeled example");
        out << sanitize(ex.sentence1) << '\t';
        if (spec.is_pair()) out << sanitize(ex.sentence2.value_or("")) << '\t';
        out << spec.labels.at(static_cast<size_t>(*ex.gold_label)).name << '\n';
    }
}

std::pair<std::vector<InputExample>, std::vector<InputExample>> sample_few_shot(
    std::span<const InputExample> dataset, const TaskSpec& spec, int k, uint64_t seed) {
    if (k <= 0) throw std::invalid_argument("k must be positive");

    std::vector<std::vector<size_t>> by_class(spec.num_labels());
    for (size_t i = 0; i < dataset.size(); ++i) {
        const auto& ex = dataset[i];
        if (!ex.gold_label || *ex.gold_label < 0 || static_cast<size_t>(*ex.gold_label) >= spec.num_labels())
            throw std::invalid_argument("dataset example lacks a valid gold label");
        by_class[static_cast<size_t>(*ex.gold_label)].push_back(i);
    }

    Rng rng(seed);
    std::pair<std::vector<InputExample>, std::vector<InputExample>> splits;
    for (size_t c = 0; c < by_class.size(); ++c) {
        auto& bucket = by_class[c];
        if (bucket.size() < 2 * static_cast<size_t>(k))
            throw std::runtime_error("class '" + spec.labels[c].name + "' has " +
                                     std::to_string(bucket.size()) + " examples, needs " +
                                     std::to_string(2 * k) + " for K=" + std::to_string(k));
        rng.shuffle(bucket);
        for (int i = 0; i < k; ++i) splits.first.push_back(dataset[bucket[static_cast<size_t>(i)]]);
        for (int i = k; i < 2 * k; ++i) splits.second.push_back(dataset[bucket[static_cast<size_t>(i)]]);
    }
    return splits;
}

}  // namespace scs
