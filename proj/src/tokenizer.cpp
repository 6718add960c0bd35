#include "scs/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <stdexcept>

namespace scs {

namespace {

bool is_detached_punct(char c) {
    return c == '.' || c == ',' || c == '?' || c == '!' || c == ';' || c == ':';
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

std::vector<std::string> WordTokenizer::split_words(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(lower(cur));
            cur.clear();
        }
    };
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else if (is_detached_punct(c)) {
            flush();
            out.emplace_back(1, c);
        } else {
            cur.push_back(c);
        }
    }
    flush();
    return out;
}

WordTokenizer WordTokenizer::from_words(std::vector<std::string> words) {
    WordTokenizer t;
    t.id_to_word_ = {"[CLS]", "[SEP]", "[UNK]"};
    std::set<std::string> seen;
    for (auto& w : words) {
        std::string lw = lower(w);
        if (lw.empty() || !seen.insert(lw).second) continue;
        t.word_to_id_.emplace(lw, static_cast<int>(t.id_to_word_.size()));
        t.id_to_word_.push_back(std::move(lw));
    }
    return t;
}

WordTokenizer WordTokenizer::from_corpus(std::span<const std::string> texts) {
    // Sorted vocabulary for a deterministic id assignment.
    std::set<std::string> vocab;
    for (const auto& text : texts) {
        for (auto& w : split_words(text)) vocab.insert(std::move(w));
    }
    return from_words(std::vector<std::string>(vocab.begin(), vocab.end()));
}

Encoding WordTokenizer::encode(std::string_view text) const {
    Encoding enc;
    for (auto& w : split_words(text)) {
        enc.ids.push_back(word_id(w));
        enc.words.push_back(std::move(w));
    }
    return enc;
}

int WordTokenizer::word_id(std::string_view word) const {
    auto it = word_to_id_.find(word);
    return it == word_to_id_.end() ? unk_id() : it->second;
}

std::string WordTokenizer::id_to_token(int id) const {
    if (id < 0 || id >= vocab_size()) throw std::out_of_range("token id out of range");
    return id_to_word_[static_cast<size_t>(id)];
}

void WordTokenizer::save_vocab(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write vocab file: " + path);
    for (size_t i = 3; i < id_to_word_.size(); ++i) out << id_to_word_[i] << '\n';
}

WordTokenizer WordTokenizer::load_vocab(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read vocab file: " + path);
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) words.push_back(line);
    }
    return from_words(std::move(words));
}

}  // namespace scs
