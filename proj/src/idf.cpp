#include "scs/idf.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "scs/tokenizer.hpp"

namespace scs {

IdfTable IdfTable::compute(const std::vector<std::vector<std::string>>& documents) {
    if (documents.empty()) throw std::invalid_argument("idf corpus is empty");

    std::map<std::string, size_t, std::less<>> df;
    for (const auto& doc : documents) {
        std::set<std::string_view> seen;
        for (const auto& word : doc) {
            if (seen.insert(word).second) ++df[word];
        }
    }

    const double n = static_cast<double>(documents.size());
    double min_raw = std::numeric_limits<double>::infinity();
    double max_raw = -std::numeric_limits<double>::infinity();
    std::map<std::string, double, std::less<>> raw;
    for (const auto& [word, count] : df) {
        const double r = std::log(n / static_cast<double>(count));
        raw.emplace(word, r);
        min_raw = std::min(min_raw, r);
        max_raw = std::max(max_raw, r);
    }

    IdfTable table;
    table.corpus_size_ = documents.size();
    const double range = max_raw - min_raw;
    for (auto& [word, r] : raw)
        table.weights_.emplace(word, range > 0.0 ? (r - min_raw) / range : 1.0);
    return table;
}

IdfTable IdfTable::compute_from_texts(std::span<const std::string> texts) {
    std::vector<std::vector<std::string>> docs;
    docs.reserve(texts.size());
    for (const auto& t : texts) docs.push_back(WordTokenizer::split_words(t));
    return compute(docs);
}

double IdfTable::weight(std::string_view word) const {
    auto it = weights_.find(word);
    return it == weights_.end() ? default_weight_ : it->second;
}

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void IdfTable::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write idf table: " + path);
    out << "# idf v1 N=" << corpus_size_ << " default=" << format_double(default_weight_) << "\n";
    for (const auto& [word, w] : weights_) out << word << '\t' << format_double(w) << '\n';
}

IdfTable IdfTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read idf table: " + path);
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("idf table is empty: " + path);

    IdfTable table;
    size_t n = 0;
    double def = 1.0;
    if (std::sscanf(header.c_str(), "# idf v1 N=%zu default=%lf", &n, &def) != 2)
        throw std::runtime_error("bad idf table header: " + header);
    table.corpus_size_ = n;
    table.default_weight_ = def;

    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const size_t tab = line.find('\t');
        if (tab == std::string::npos) throw std::runtime_error("bad idf table line: " + line);
        table.weights_.emplace(line.substr(0, tab), std::strtod(line.c_str() + tab + 1, nullptr));
    }
    return table;
}

std::vector<double> token_weights(const BuiltPrompt& prompt, const ComponentSpan& span, const IdfTable& table) {
    std::vector<double> weights;
    weights.reserve(span.positions.size());
    for (size_t pos : span.positions) {
        if (pos >= prompt.word_alignment.size() || prompt.word_alignment[pos].empty())
            throw std::logic_error("span position " + std::to_string(pos) + " has no word alignment");
        weights.push_back(table.weight(prompt.word_alignment[pos]));
    }
    return weights;
}

}  // namespace scs
