#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lfqa {

struct Document {
    std::string id;
    std::string title;
    std::string text;
};

/// Byte offsets into the text the token was cut from.
struct Token {
    std::string surface;
    std::string lower;
    std::size_t char_start = 0;
    std::size_t char_end = 0;
    bool is_word = true;  // false for punctuation tokens
};

/// Half-open token range.
struct SentenceSpan {
    std::size_t token_start = 0;
    std::size_t token_end = 0;

    std::size_t size() const noexcept { return token_end - token_start; }
    bool contains(std::size_t token) const noexcept
    {
        return token >= token_start && token < token_end;
    }
    friend bool operator==(const SentenceSpan&, const SentenceSpan&) = default;
};

/// Index of a passage inside its PassageTable. Ordering of refs is corpus order,
/// which is the tie-break for every ranked list.
struct PassageRef {
    std::uint32_t value = 0;
    friend auto operator<=>(const PassageRef&, const PassageRef&) = default;
};

struct Passage {
    std::string doc_id;
    std::string title;
    std::size_t passage_index = 0;
    std::string text;
    std::vector<Token> tokens;
    std::vector<SentenceSpan> sentences;
    std::size_t word_count = 0;
    bool oversized = false;

    /// "doc_id#passage_index"
    std::string key() const;
    std::string_view sentence_text(std::size_t sentence) const;
    std::size_t sentence_of(std::size_t token) const;
};

struct Corpus {
    std::vector<Document> documents;
};

std::vector<Token> tokenize(std::string_view text);

/// Lowercases ASCII, Latin-1, Greek and Cyrillic letters; other bytes pass through.
std::string lowercase(std::string_view text);
/// Drops every punctuation code point (the same set tokenize splits off).
std::string strip_punctuation(std::string_view text);
/// Splits on whitespace code points, dropping empty pieces.
std::vector<std::string_view> split_whitespace(std::string_view text);

std::size_t count_words(std::span<const Token> tokens) noexcept;
std::size_t count_words(std::string_view text);

/// Sentence boundaries over an already tokenized text. Every token lands in
/// exactly one span.
std::vector<SentenceSpan> split_sentences(std::string_view text, std::span<const Token> tokens);
std::vector<SentenceSpan> split_sentences(std::string_view text);

/// Greedy sentence-by-sentence packing into passages of at most `max_words`
/// words. A single sentence longer than the limit becomes its own passage
/// with `oversized` set.
std::vector<Passage> split_passages(const Document& doc, std::size_t max_words);

/// Rebuild a passage from stored text; tokens and sentences are recomputed.
Passage make_passage(std::string doc_id, std::string title, std::size_t passage_index,
                     std::string text, bool oversized);

Corpus read_jsonl(std::istream& in);
Corpus ingest_jsonl(const std::filesystem::path& path);

/// All passages of a corpus in document order; refs are positions.
class PassageTable {
  public:
    PassageTable() = default;
    explicit PassageTable(std::vector<Passage> passages) : m_passages(std::move(passages)) {}

    static PassageTable from_corpus(const Corpus& corpus, std::size_t max_words);

    const Passage& at(PassageRef ref) const { return m_passages.at(ref.value); }
    std::size_t size() const noexcept { return m_passages.size(); }
    bool empty() const noexcept { return m_passages.empty(); }
    std::span<const Passage> passages() const noexcept { return m_passages; }

  private:
    std::vector<Passage> m_passages;
};

}  // namespace lfqa
