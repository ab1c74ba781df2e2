#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lfqa/corpus.hpp"

namespace lfqa {

class KeywordTagger;

/// Longest answer span the reader will consider, in tokens.
inline constexpr std::size_t k_max_span_tokens = 30;

/// What an MRC provider returns for one (question, passage) pair. Arrays are
/// aligned with the passage's token sequence.
struct MrcOutput {
    std::vector<double> start_probs;
    std::vector<double> end_probs;
    double span_score = 0.0;
};

/// Implementations must be safe for concurrent calls.
class MrcProvider {
  public:
    virtual ~MrcProvider() = default;
    virtual MrcOutput predict(std::string_view question, const Passage& passage) = 0;
    virtual std::string name() const = 0;
};

struct TokenSpan {
    std::size_t start = 0;
    std::size_t end = 0;  // inclusive
    double score = 0.0;
    friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

/// argmax over start(i) + end(j) with i <= j < i + window. Ties go to the
/// earliest start, then the shortest span.
TokenSpan best_span(std::span<const double> start_probs, std::span<const double> end_probs,
                    std::size_t window = k_max_span_tokens);

struct SpanPrediction {
    std::vector<double> start_probs;
    std::vector<double> end_probs;
    TokenSpan best;
    double span_score = 0.0;
};

/// Calls the provider and validates its distributions (each must sum to 1
/// within 1e-3, then gets renormalized).
SpanPrediction read(MrcProvider& provider, std::string_view question, const Passage& passage);

/// Deterministic, non-neural reader used when no MRC service is configured.
///
/// Each token gets weight 1 + [token is a question keyword]. Start
/// probabilities are the normalized weights. End probabilities start from the
/// same weights, but inside every sentence that contains a keyword the whole
/// sentence's weight is moved onto its final token. span_score is
/// start(i) + end(j) of the best span.
class HeuristicMrc final : public MrcProvider {
  public:
    HeuristicMrc();
    explicit HeuristicMrc(const KeywordTagger& tagger);

    MrcOutput predict(std::string_view question, const Passage& passage) override;
    std::string name() const override { return "heuristic"; }

  private:
    const KeywordTagger* m_tagger;
};

/// Combined confidence of two readers' span scores.
double ensemble_confidence(double s_m, double s_b) noexcept;

enum class SpanSource { a, b, merged };
std::string_view to_string(SpanSource s) noexcept;

struct EvidenceSpan {
    PassageRef passage;
    std::size_t token_start = 0;
    std::size_t token_end = 0;  // inclusive
    SpanSource source = SpanSource::a;
    friend bool operator==(const EvidenceSpan&, const EvidenceSpan&) = default;
};

struct FusedAnswer {
    std::vector<EvidenceSpan> spans;
};

/// Byte range [begin, end) of a span inside the passage text.
std::pair<std::size_t, std::size_t> char_range(const EvidenceSpan& span, const Passage& passage);

/// Expands every span to the sentences containing it, then collapses spans
/// that are identical or nested into the container. Spans with different
/// sources that collapse become `merged`; equal sources are kept. Output is
/// ordered by position.
FusedAnswer fuse_answers(std::span<const EvidenceSpan> pred_a, std::span<const EvidenceSpan> pred_b,
                         const Passage& passage);

/// Per sentence, the sum of start and end probability mass of its tokens.
std::vector<double> sentence_evidence(const SpanPrediction& pred, const Passage& passage);

struct EvidenceSentence {
    PassageRef passage;
    std::size_t sentence_index = 0;
    double raw_score = 0.0;
    double normalized_prob = 0.0;
};

/// Divides every raw score by the total over all passages.
std::vector<EvidenceSentence> normalize_evidence(std::span<const PassageRef> refs,
                                                 std::span<const std::vector<double>> per_passage);
std::vector<EvidenceSentence> normalize_evidence(std::span<const std::vector<double>> per_passage);

/// r(w) = start(w) + end(w)
std::vector<double> answer_relevance(const SpanPrediction& pred);

}  // namespace lfqa
