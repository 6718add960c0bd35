#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace scs {

/// Result of encoding a text: token ids plus, for each token, the lowercased
/// source word it came from. Subword tokens of one word share that word.
struct Encoding {
    std::vector<int> ids;
    std::vector<std::string> words;

    size_t size() const { return ids.size(); }
};

/// Deterministic tokenizer interface. Implementations expose the sequence
/// start/end marker ids used by the prompt builder.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;

    virtual Encoding encode(std::string_view text) const = 0;
    virtual int cls_id() const = 0;
    virtual int sep_id() const = 0;
    virtual int unk_id() const = 0;
    virtual int vocab_size() const = 0;
    virtual std::string id_to_token(int id) const = 0;
};

/// Whole-word tokenizer: lowercases, splits on whitespace, and detaches the
/// punctuation characters . , ? ! ; : into their own tokens. One token per
/// word, which keeps the single-token verbalizer constraint satisfiable and
/// makes IDF alignment exact.
class WordTokenizer : public Tokenizer {
public:
    static WordTokenizer from_words(std::vector<std::string> words);
    static WordTokenizer from_corpus(std::span<const std::string> texts);

    Encoding encode(std::string_view text) const override;
    int cls_id() const override { return 0; }
    int sep_id() const override { return 1; }
    int unk_id() const override { return 2; }
    int vocab_size() const override { return static_cast<int>(id_to_word_.size()); }
    std::string id_to_token(int id) const override;

    /// Id of a (lowercased) word, or unk_id() when absent.
    int word_id(std::string_view word) const;

    void save_vocab(const std::string& path) const;
    static WordTokenizer load_vocab(const std::string& path);

    /// Splits text into lowercased word units without vocabulary lookup.
    static std::vector<std::string> split_words(std::string_view text);

private:
    WordTokenizer() = default;

    std::map<std::string, int, std::less<>> word_to_id_;
    std::vector<std::string> id_to_word_;  // includes the specials at 0..2
};

}  // namespace scs
