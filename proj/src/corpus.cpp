#include "lfqa/corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <unordered_set>

#include <json.hpp>

#include "lfqa/errors.hpp"

namespace lfqa {

namespace {

struct CodePoint {
    char32_t value;
    std::size_t length;
};

CodePoint decode_utf8(std::string_view s, std::size_t pos)
{
    auto b0 = static_cast<unsigned char>(s[pos]);
    auto cont = [&](std::size_t i) -> int {
        if (pos + i >= s.size()) {
            return -1;
        }
        auto b = static_cast<unsigned char>(s[pos + i]);
        return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
    };
    if (b0 < 0x80) {
        return {b0, 1};
    }
    if ((b0 & 0xE0) == 0xC0) {
        int c1 = cont(1);
        if (c1 >= 0) {
            return {static_cast<char32_t>(((b0 & 0x1F) << 6) | c1), 2};
        }
    } else if ((b0 & 0xF0) == 0xE0) {
        int c1 = cont(1), c2 = cont(2);
        if (c1 >= 0 && c2 >= 0) {
            return {static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2), 3};
        }
    } else if ((b0 & 0xF8) == 0xF0) {
        int c1 = cont(1), c2 = cont(2), c3 = cont(3);
        if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
            return {static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3), 4};
        }
    }
    // Invalid sequence: consume the byte on its own and treat it as a letter.
    return {0xFFFD, 1};
}

void encode_utf8(char32_t cp, std::string& out)
{
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

bool is_space(char32_t c)
{
    switch (c) {
    case U' ': case U'\t': case U'\n': case U'\r': case U'\v': case U'\f':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029: case 0x202F:
    case 0x205F: case 0x3000: case 0xFEFF:
        return true;
    default:
        return c >= 0x2000 && c <= 0x200B;
    }
}

bool is_punct(char32_t c)
{
    if (c < 0x80) {
        return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60)
               || (c >= 0x7B && c <= 0x7E);
    }
    if (c >= 0xA1 && c <= 0xBF) {
        // ª µ º are letters; ² ³ ¹ ¼ ½ ¾ are numbers.
        switch (c) {
        case 0xAA: case 0xB5: case 0xBA: case 0xB2: case 0xB3: case 0xB9:
        case 0xBC: case 0xBD: case 0xBE:
            return false;
        default:
            return true;
        }
    }
    return c == 0xD7 || c == 0xF7 || (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E)
           || (c >= 0x3001 && c <= 0x3011) || (c >= 0xFF01 && c <= 0xFF0F)
           || (c >= 0xFF1A && c <= 0xFF20);
}

char32_t to_lower(char32_t c)
{
    if (c >= U'A' && c <= U'Z') {
        return c + 0x20;
    }
    if (c >= 0xC0 && c <= 0xDE && c != 0xD7) {
        return c + 0x20;
    }
    if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) {
        return c + 0x20;
    }
    if (c >= 0x410 && c <= 0x42F) {
        return c + 0x20;
    }
    if (c >= 0x400 && c <= 0x40F) {
        return c + 0x50;
    }
    return c;
}

std::string lowercase_impl(std::string_view s)
{
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        auto cp = decode_utf8(s, i);
        if (cp.value == 0xFFFD && cp.length == 1) {
            out.push_back(s[i]);
        } else {
            encode_utf8(to_lower(cp.value), out);
        }
        i += cp.length;
    }
    return out;
}

bool starts_uppercase(std::string_view s)
{
    if (s.empty()) {
        return false;
    }
    auto cp = decode_utf8(s, 0);
    return to_lower(cp.value) != cp.value;
}

// Tokens ending in "." that never close a sentence. Single letters are
// handled separately as initials.
constexpr std::array<std::string_view, 32> k_abbreviations = {
    "mr",  "mrs", "ms",   "dr",  "prof", "sr",  "jr",   "st",  "mt",  "vs",  "etc",
    "inc", "ltd", "co",   "corp", "fig", "figs", "vol", "al",  "approx", "dept",
    "lt",  "col", "sgt",  "rev", "jan",  "feb", "aug",  "sep", "sept", "oct", "nov",
};

bool is_abbreviation(std::string_view lower)
{
    if (lower.size() == 1 && lower[0] >= 'a' && lower[0] <= 'z') {
        return true;
    }
    return std::find(k_abbreviations.begin(), k_abbreviations.end(), lower)
           != k_abbreviations.end();
}

bool is_terminal(const Token& t)
{
    return t.surface == "." || t.surface == "!" || t.surface == "?";
}

bool is_closer(const Token& t)
{
    return t.surface == "\"" || t.surface == "'" || t.surface == ")" || t.surface == "]"
           || t.surface == "\xE2\x80\x9D" || t.surface == "\xE2\x80\x99";
}

bool is_opener(const Token& t)
{
    return t.surface == "\"" || t.surface == "'" || t.surface == "(" || t.surface == "["
           || t.surface == "\xE2\x80\x9C" || t.surface == "\xE2\x80\x98";
}

}  // namespace

std::vector<Token> tokenize(std::string_view text)
{
    std::vector<Token> tokens;
    std::size_t word_start = std::string_view::npos;
    auto flush_word = [&](std::size_t end) {
        if (word_start != std::string_view::npos) {
            auto surface = text.substr(word_start, end - word_start);
            tokens.push_back({std::string(surface), lowercase_impl(surface), word_start, end, true});
            word_start = std::string_view::npos;
        }
    };
    for (std::size_t i = 0; i < text.size();) {
        auto cp = decode_utf8(text, i);
        if (is_space(cp.value)) {
            flush_word(i);
        } else if (is_punct(cp.value)) {
            flush_word(i);
            auto surface = text.substr(i, cp.length);
            tokens.push_back({std::string(surface), std::string(surface), i, i + cp.length, false});
        } else if (word_start == std::string_view::npos) {
            word_start = i;
        }
        i += cp.length;
    }
    flush_word(text.size());
    return tokens;
}

std::string lowercase(std::string_view text)
{
    return lowercase_impl(text);
}

std::string strip_punctuation(std::string_view text)
{
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size();) {
        auto cp = decode_utf8(text, i);
        if (!is_punct(cp.value)) {
            out.append(text.substr(i, cp.length));
        }
        i += cp.length;
    }
    return out;
}

std::vector<std::string_view> split_whitespace(std::string_view text)
{
    std::vector<std::string_view> out;
    std::size_t start = std::string_view::npos;
    for (std::size_t i = 0; i < text.size();) {
        auto cp = decode_utf8(text, i);
        if (is_space(cp.value)) {
            if (start != std::string_view::npos) {
                out.push_back(text.substr(start, i - start));
                start = std::string_view::npos;
            }
        } else if (start == std::string_view::npos) {
            start = i;
        }
        i += cp.length;
    }
    if (start != std::string_view::npos) {
        out.push_back(text.substr(start));
    }
    return out;
}

std::size_t count_words(std::span<const Token> tokens) noexcept
{
    return static_cast<std::size_t>(
        std::count_if(tokens.begin(), tokens.end(), [](const Token& t) { return t.is_word; }));
}

std::size_t count_words(std::string_view text)
{
    return count_words(tokenize(text));
}

std::vector<SentenceSpan> split_sentences(std::string_view text, std::span<const Token> tokens)
{
    std::vector<SentenceSpan> spans;
    std::size_t start = 0;
    std::size_t i = 0;
    const std::size_t n = tokens.size();
    auto adjacent = [&](std::size_t a, std::size_t b) {
        return tokens[a].char_end == tokens[b].char_start;
    };
    while (i < n) {
        if (!is_terminal(tokens[i])) {
            ++i;
            continue;
        }
        if (tokens[i].surface == "." && i > 0 && tokens[i - 1].is_word && adjacent(i - 1, i)
            && is_abbreviation(tokens[i - 1].lower)) {
            ++i;
            continue;
        }
        std::size_t last = i;
        while (last + 1 < n && adjacent(last, last + 1)
               && (is_terminal(tokens[last + 1]) || is_closer(tokens[last + 1]))) {
            ++last;
        }
        bool boundary = false;
        if (last + 1 == n) {
            boundary = true;
        } else {
            const auto& next = tokens[last + 1];
            bool gap = tokens[last].char_end < next.char_start;
            bool capital = starts_uppercase(next.surface)
                           || (is_opener(next) && last + 2 < n
                               && starts_uppercase(tokens[last + 2].surface));
            boundary = gap && capital;
        }
        if (boundary) {
            spans.push_back({start, last + 1});
            start = last + 1;
        }
        i = last + 1;
    }
    if (start < n) {
        spans.push_back({start, n});
    }
    (void)text;
    return spans;
}

std::vector<SentenceSpan> split_sentences(std::string_view text)
{
    auto tokens = tokenize(text);
    return split_sentences(text, tokens);
}

std::string Passage::key() const
{
    return doc_id + "#" + std::to_string(passage_index);
}

std::string_view Passage::sentence_text(std::size_t sentence) const
{
    const auto& s = sentences.at(sentence);
    auto begin = tokens[s.token_start].char_start;
    auto end = tokens[s.token_end - 1].char_end;
    return std::string_view(text).substr(begin, end - begin);
}

std::size_t Passage::sentence_of(std::size_t token) const
{
    auto it = std::upper_bound(sentences.begin(), sentences.end(), token,
                               [](std::size_t t, const SentenceSpan& s) { return t < s.token_end; });
    if (it == sentences.end()) {
        throw InvalidArgument("token index " + std::to_string(token) + " outside passage");
    }
    return static_cast<std::size_t>(it - sentences.begin());
}

std::vector<Passage> split_passages(const Document& doc, std::size_t max_words)
{
    if (max_words == 0) {
        throw InvalidArgument("max_words must be positive");
    }
    auto tokens = tokenize(doc.text);
    auto sentences = split_sentences(doc.text, tokens);
    std::vector<Passage> out;

    auto emit = [&](std::size_t first_sentence, std::size_t last_sentence, bool oversized) {
        std::size_t tok_begin = sentences[first_sentence].token_start;
        std::size_t tok_end = sentences[last_sentence].token_end;
        std::size_t byte_begin = tokens[tok_begin].char_start;
        std::size_t byte_end = tokens[tok_end - 1].char_end;

        Passage p;
        p.doc_id = doc.id;
        p.title = doc.title;
        p.passage_index = out.size();
        p.text = doc.text.substr(byte_begin, byte_end - byte_begin);
        p.tokens.assign(tokens.begin() + static_cast<std::ptrdiff_t>(tok_begin),
                        tokens.begin() + static_cast<std::ptrdiff_t>(tok_end));
        for (auto& t : p.tokens) {
            t.char_start -= byte_begin;
            t.char_end -= byte_begin;
        }
        for (std::size_t s = first_sentence; s <= last_sentence; ++s) {
            p.sentences.push_back(
                {sentences[s].token_start - tok_begin, sentences[s].token_end - tok_begin});
        }
        p.word_count = count_words(p.tokens);
        p.oversized = oversized;
        out.push_back(std::move(p));
    };

    std::size_t open = 0;
    std::size_t open_words = 0;
    bool has_open = false;
    for (std::size_t s = 0; s < sentences.size(); ++s) {
        std::span<const Token> sentence_tokens(tokens.data() + sentences[s].token_start,
                                               sentences[s].size());
        std::size_t words = count_words(sentence_tokens);
        if (words > max_words) {
            if (has_open) {
                emit(open, s - 1, false);
                has_open = false;
            }
            emit(s, s, true);
            continue;
        }
        if (has_open && open_words + words > max_words) {
            emit(open, s - 1, false);
            has_open = false;
        }
        if (!has_open) {
            open = s;
            open_words = 0;
            has_open = true;
        }
        open_words += words;
    }
    if (has_open) {
        emit(open, sentences.size() - 1, false);
    }
    return out;
}

Passage make_passage(std::string doc_id, std::string title, std::size_t passage_index,
                     std::string text, bool oversized)
{
    Passage p;
    p.doc_id = std::move(doc_id);
    p.title = std::move(title);
    p.passage_index = passage_index;
    p.text = std::move(text);
    p.tokens = tokenize(p.text);
    p.sentences = split_sentences(p.text, p.tokens);
    p.word_count = count_words(p.tokens);
    p.oversized = oversized;
    return p;
}

Corpus read_jsonl(std::istream& in)
{
    Corpus corpus;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
        }
        if (!obj.is_object()) {
            throw ParseError(line_no, "expected a JSON object");
        }
        Document doc;
        for (auto [field, dest] : {std::pair{"id", &doc.id}, std::pair{"title", &doc.title},
                                   std::pair{"text", &doc.text}}) {
            auto it = obj.find(field);
            if (it == obj.end() || !it->is_string()) {
                throw ParseError(line_no, std::string("missing string field \"") + field + "\"");
            }
            *dest = it->get<std::string>();
        }
        if (doc.id.empty()) {
            throw ParseError(line_no, "empty \"id\"");
        }
        if (doc.text.empty()) {
            throw ParseError(line_no, "empty \"text\"");
        }
        if (!seen.insert(doc.id).second) {
            throw ConflictError("line " + std::to_string(line_no) + ": duplicate document id \""
                                + doc.id + "\"");
        }
        corpus.documents.push_back(std::move(doc));
    }
    return corpus;
}

Corpus ingest_jsonl(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open corpus file " + path.string());
    }
    return read_jsonl(in);
}

PassageTable PassageTable::from_corpus(const Corpus& corpus, std::size_t max_words)
{
    std::vector<Passage> all;
    for (const auto& doc : corpus.documents) {
        auto ps = split_passages(doc, max_words);
        std::move(ps.begin(), ps.end(), std::back_inserter(all));
    }
    return PassageTable(std::move(all));
}

}  // namespace lfqa
