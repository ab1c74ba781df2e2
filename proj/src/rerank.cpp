#include "lfqa/rerank.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "lfqa/errors.hpp"

namespace lfqa {

namespace {

// Sorted for binary search.
constexpr auto k_stopwords = std::to_array<std::string_view>({
    "a",        "about",   "above",   "after",   "again",   "against", "all",     "am",
    "an",       "and",     "any",     "are",     "aren",    "as",      "at",      "be",
    "because",  "been",    "before",  "being",   "below",   "between", "both",    "but",
    "by",       "can",     "cannot",  "could",   "couldn",  "did",     "didn",    "do",
    "does",     "doesn",   "doing",   "don",     "down",    "during",  "each",    "else",
    "ever",     "few",     "for",     "from",    "further", "had",     "hadn",    "has",
    "hasn",     "have",    "haven",   "having",  "he",      "her",     "here",    "hers",
    "herself",  "him",     "himself", "his",     "how",     "i",       "if",      "in",
    "into",     "is",      "isn",     "it",      "its",     "itself",  "just",    "ll",
    "me",       "might",   "more",    "most",    "must",    "my",      "myself",  "no",
    "nor",      "not",     "now",     "of",      "off",     "on",      "once",    "only",
    "or",       "other",   "ought",   "our",     "ours",    "ourselves", "out",   "over",
    "own",      "re",      "s",       "same",    "shall",   "she",     "should",  "so",
    "some",     "such",    "t",       "than",    "that",    "the",     "their",   "theirs",
    "them",     "themselves", "then", "there",   "these",   "they",    "this",    "those",
    "through",  "to",      "too",     "under",   "until",   "up",      "us",      "ve",
    "very",     "was",     "wasn",    "we",      "were",    "weren",   "what",    "when",
    "where",    "which",   "while",   "who",     "whom",    "why",     "will",    "with",
    "won",      "would",   "wouldn",  "yet",     "you",     "your",    "yours",   "yourself",
    "yourselves",
});
static_assert(std::is_sorted(k_stopwords.begin(), k_stopwords.end()));

bool is_number(std::string_view s)
{
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

bool StopwordTagger::is_stopword(std::string_view lowered)
{
    return std::binary_search(k_stopwords.begin(), k_stopwords.end(), lowered);
}

bool StopwordTagger::is_keyword(const Token& token) const
{
    return token.is_word && !is_stopword(token.lower) && !is_number(token.lower);
}

const KeywordTagger& default_tagger()
{
    static const StopwordTagger tagger;
    return tagger;
}

std::vector<std::string> extract_keywords(std::string_view question, const KeywordTagger& tagger)
{
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (auto& tok : tokenize(question)) {
        if (tagger.is_keyword(tok) && seen.insert(tok.lower).second) {
            out.push_back(std::move(tok.lower));
        }
    }
    return out;
}

void RerankConfig::validate() const
{
    if (l_c < 1) {
        throw InvalidArgument("rerank l_c must be at least 1");
    }
    if (!std::isfinite(lambda1) || !std::isfinite(lambda2) || !std::isfinite(alpha)) {
        throw InvalidArgument("rerank weights must be finite");
    }
}

double sigmoid(double x) noexcept
{
    return 1.0 / (1.0 + std::exp(-x));
}

MatchScore match_score(std::span<const std::string> keywords, const Passage& passage,
                       const RerankConfig& cfg)
{
    std::unordered_map<std::string_view, std::uint64_t> counts;
    for (const auto& k : keywords) {
        counts.emplace(k, 0);
    }
    for (const auto& tok : passage.tokens) {
        if (!tok.is_word) {
            continue;
        }
        if (auto it = counts.find(tok.lower); it != counts.end()) {
            ++it->second;
        }
    }
    MatchScore m;
    for (const auto& [_, c] : counts) {
        m.s_freq += c;
        m.s_num += c > 0 ? 1 : 0;
    }
    double l = static_cast<double>(passage.word_count);
    double lc = static_cast<double>(cfg.l_c);
    m.s_match = cfg.lambda1 * static_cast<double>(m.s_freq) * sigmoid(l - lc)
                + cfg.lambda2 * static_cast<double>(m.s_num);
    return m;
}

double rerank_score(double s_match, double s_conf, double alpha) noexcept
{
    return s_match + alpha * s_conf;
}

std::vector<ScoredPassage> rerank(std::span<const RerankCandidate> candidates,
                                  const PassageTable& table, std::string_view question,
                                  const RerankConfig& cfg, const KeywordTagger& tagger)
{
    cfg.validate();
    auto keywords = extract_keywords(question, tagger);
    std::vector<ScoredPassage> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
        auto m = match_score(keywords, table.at(c.ref), cfg);
        out.push_back({c.ref, m.s_freq, m.s_num, m.s_match, c.s_conf,
                       rerank_score(m.s_match, c.s_conf, cfg.alpha)});
    }
    std::sort(out.begin(), out.end(), [](const ScoredPassage& a, const ScoredPassage& b) {
        if (a.rerank_score != b.rerank_score) {
            return a.rerank_score > b.rerank_score;
        }
        return a.ref < b.ref;
    });
    return out;
}

}  // namespace lfqa
