#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lfqa/corpus.hpp"

namespace lfqa {

/// Decides which question tokens count as keywords.
class KeywordTagger {
  public:
    virtual ~KeywordTagger() = default;
    virtual bool is_keyword(const Token& token) const = 0;
};

/// Keeps word tokens that are neither English stop-words nor pure numbers.
/// Stand-in for a POS filter on nouns, verbs and adjectives.
class StopwordTagger final : public KeywordTagger {
  public:
    bool is_keyword(const Token& token) const override;
    static bool is_stopword(std::string_view lowered);
};

const KeywordTagger& default_tagger();

/// Lowercased keywords in first-occurrence order, without duplicates.
std::vector<std::string> extract_keywords(std::string_view question,
                                          const KeywordTagger& tagger = default_tagger());

struct RerankConfig {
    double lambda1 = 0.2;
    double lambda2 = 10.0;
    std::size_t l_c = 50;
    double alpha = 0.5;

    void validate() const;
};

struct MatchScore {
    std::uint64_t s_freq = 0;
    std::size_t s_num = 0;
    double s_match = 0.0;
};

double sigmoid(double x) noexcept;

/// s_match = lambda1 * s_freq * sigmoid(l - l_c) + lambda2 * s_num, where l is
/// the passage word count.
MatchScore match_score(std::span<const std::string> keywords, const Passage& passage,
                       const RerankConfig& cfg);

double rerank_score(double s_match, double s_conf, double alpha) noexcept;

struct ScoredPassage {
    PassageRef ref;
    std::uint64_t s_freq = 0;
    std::size_t s_num = 0;
    double s_match = 0.0;
    double s_conf = 0.0;
    double rerank_score = 0.0;
};

struct RerankCandidate {
    PassageRef ref;
    double s_conf = 0.0;
};

/// Descending rerank_score, ties by ascending ref.
std::vector<ScoredPassage> rerank(std::span<const RerankCandidate> candidates,
                                  const PassageTable& table, std::string_view question,
                                  const RerankConfig& cfg,
                                  const KeywordTagger& tagger = default_tagger());

}  // namespace lfqa
