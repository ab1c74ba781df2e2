#include "lfqa/reader.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "lfqa/errors.hpp"
#include "lfqa/rerank.hpp"

namespace lfqa {

namespace {

constexpr double k_provider_sum_tolerance = 1e-3;

std::vector<double> checked_distribution(std::vector<double> probs, std::size_t expected,
                                         const char* which)
{
    if (probs.size() != expected) {
        throw ProtocolError(std::string(which) + " has " + std::to_string(probs.size())
                            + " entries, passage has " + std::to_string(expected) + " tokens");
    }
    double sum = 0.0;
    for (double p : probs) {
        if (!std::isfinite(p) || p < 0.0) {
            throw ProtocolError(std::string(which) + " contains a negative or non-finite entry");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > k_provider_sum_tolerance) {
        throw ProtocolError(std::string(which) + " sums to " + std::to_string(sum));
    }
    for (auto& p : probs) {
        p /= sum;
    }
    return probs;
}

void normalize_in_place(std::vector<double>& v)
{
    double sum = std::accumulate(v.begin(), v.end(), 0.0);
    for (auto& x : v) {
        x /= sum;
    }
}

}  // namespace

TokenSpan best_span(std::span<const double> start_probs, std::span<const double> end_probs,
                    std::size_t window)
{
    if (start_probs.size() != end_probs.size()) {
        throw DimensionError("start and end distributions differ in length");
    }
    if (start_probs.empty()) {
        throw InvalidArgument("best_span over an empty passage");
    }
    if (window == 0) {
        throw InvalidArgument("span window must be positive");
    }
    const std::size_t n = start_probs.size();
    TokenSpan best{0, 0, start_probs[0] + end_probs[0]};
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t last = std::min(n, i + window);
        for (std::size_t j = i; j < last; ++j) {
            double s = start_probs[i] + end_probs[j];
            if (s > best.score) {
                best = {i, j, s};
            }
        }
    }
    return best;
}

SpanPrediction read(MrcProvider& provider, std::string_view question, const Passage& passage)
{
    if (passage.tokens.empty()) {
        throw InvalidArgument("cannot read a passage without tokens");
    }
    auto out = provider.predict(question, passage);
    SpanPrediction pred;
    pred.start_probs = checked_distribution(std::move(out.start_probs), passage.tokens.size(),
                                            "start_probs");
    pred.end_probs = checked_distribution(std::move(out.end_probs), passage.tokens.size(),
                                          "end_probs");
    if (!std::isfinite(out.span_score)) {
        throw ProtocolError("span_score is not finite");
    }
    pred.best = best_span(pred.start_probs, pred.end_probs);
    pred.span_score = out.span_score;
    return pred;
}

HeuristicMrc::HeuristicMrc() : m_tagger(&default_tagger()) {}

HeuristicMrc::HeuristicMrc(const KeywordTagger& tagger) : m_tagger(&tagger) {}

MrcOutput HeuristicMrc::predict(std::string_view question, const Passage& passage)
{
    auto keywords = extract_keywords(question, *m_tagger);
    std::unordered_set<std::string_view> keyset(keywords.begin(), keywords.end());

    const std::size_t n = passage.tokens.size();
    std::vector<double> weights(n, 1.0);
    std::vector<bool> hit(n, false);
    for (std::size_t t = 0; t < n; ++t) {
        const auto& tok = passage.tokens[t];
        if (tok.is_word && keyset.contains(tok.lower)) {
            weights[t] += 1.0;
            hit[t] = true;
        }
    }

    MrcOutput out;
    out.start_probs = weights;
    out.end_probs = weights;
    for (const auto& s : passage.sentences) {
        bool matches = std::any_of(hit.begin() + static_cast<std::ptrdiff_t>(s.token_start),
                                   hit.begin() + static_cast<std::ptrdiff_t>(s.token_end),
                                   [](bool h) { return h; });
        if (!matches) {
            continue;
        }
        double mass = 0.0;
        for (std::size_t t = s.token_start; t < s.token_end; ++t) {
            mass += out.end_probs[t];
            out.end_probs[t] = 0.0;
        }
        out.end_probs[s.token_end - 1] = mass;
    }
    normalize_in_place(out.start_probs);
    normalize_in_place(out.end_probs);
    out.span_score = best_span(out.start_probs, out.end_probs).score;
    return out;
}

double ensemble_confidence(double s_m, double s_b) noexcept
{
    if (s_m < 0.0 && s_b < 0.0) {
        double lo = std::min(std::abs(s_m), std::abs(s_b));
        double hi = std::max(std::abs(s_m), std::abs(s_b));
        return 0.5 * lo - hi;
    }
    return s_m + s_b;
}

std::string_view to_string(SpanSource s) noexcept
{
    switch (s) {
    case SpanSource::a:
        return "a";
    case SpanSource::b:
        return "b";
    case SpanSource::merged:
        break;
    }
    return "merged";
}

std::pair<std::size_t, std::size_t> char_range(const EvidenceSpan& span, const Passage& passage)
{
    if (span.token_start > span.token_end || span.token_end >= passage.tokens.size()) {
        throw InvalidArgument("evidence span outside passage");
    }
    return {passage.tokens[span.token_start].char_start, passage.tokens[span.token_end].char_end};
}

FusedAnswer fuse_answers(std::span<const EvidenceSpan> pred_a, std::span<const EvidenceSpan> pred_b,
                         const Passage& passage)
{
    std::vector<EvidenceSpan> all;
    all.reserve(pred_a.size() + pred_b.size());
    for (auto input : {pred_a, pred_b}) {
        for (auto s : input) {
            if (s.token_start > s.token_end || s.token_end >= passage.tokens.size()) {
                throw InvalidArgument("evidence span outside passage");
            }
            const auto& first = passage.sentences[passage.sentence_of(s.token_start)];
            const auto& last = passage.sentences[passage.sentence_of(s.token_end)];
            s.token_start = first.token_start;
            s.token_end = last.token_end - 1;
            all.push_back(s);
        }
    }
    // Containers sort ahead of everything they contain.
    std::stable_sort(all.begin(), all.end(), [](const EvidenceSpan& x, const EvidenceSpan& y) {
        if (x.token_start != y.token_start) {
            return x.token_start < y.token_start;
        }
        return x.token_end > y.token_end;
    });
    FusedAnswer fused;
    for (const auto& s : all) {
        auto container = std::find_if(fused.spans.begin(), fused.spans.end(), [&](const EvidenceSpan& k) {
            return k.token_start <= s.token_start && s.token_end <= k.token_end;
        });
        if (container == fused.spans.end()) {
            fused.spans.push_back(s);
        } else if (container->source != s.source) {
            container->source = SpanSource::merged;
        }
    }
    return fused;
}

std::vector<double> sentence_evidence(const SpanPrediction& pred, const Passage& passage)
{
    if (pred.start_probs.size() != passage.tokens.size()
        || pred.end_probs.size() != passage.tokens.size()) {
        throw DimensionError("prediction is not aligned with the passage tokens");
    }
    std::vector<double> raw;
    raw.reserve(passage.sentences.size());
    for (const auto& s : passage.sentences) {
        double sum = 0.0;
        for (std::size_t t = s.token_start; t < s.token_end; ++t) {
            sum += pred.start_probs[t] + pred.end_probs[t];
        }
        raw.push_back(sum);
    }
    return raw;
}

std::vector<EvidenceSentence> normalize_evidence(std::span<const PassageRef> refs,
                                                 std::span<const std::vector<double>> per_passage)
{
    if (refs.size() != per_passage.size()) {
        throw DimensionError("one ref is needed per passage");
    }
    double total = 0.0;
    for (const auto& raws : per_passage) {
        for (double r : raws) {
            if (!std::isfinite(r) || r < 0.0) {
                throw InvalidArgument("raw evidence scores must be finite and non-negative");
            }
            total += r;
        }
    }
    if (!(total > 0.0)) {
        throw InvalidArgument("cannot normalize evidence with no positive score");
    }
    std::vector<EvidenceSentence> out;
    for (std::size_t p = 0; p < per_passage.size(); ++p) {
        for (std::size_t s = 0; s < per_passage[p].size(); ++s) {
            out.push_back({refs[p], s, per_passage[p][s], per_passage[p][s] / total});
        }
    }
    return out;
}

std::vector<EvidenceSentence> normalize_evidence(std::span<const std::vector<double>> per_passage)
{
    std::vector<PassageRef> refs(per_passage.size());
    for (std::size_t i = 0; i < refs.size(); ++i) {
        refs[i] = PassageRef{static_cast<std::uint32_t>(i)};
    }
    return normalize_evidence(refs, per_passage);
}

std::vector<double> answer_relevance(const SpanPrediction& pred)
{
    if (pred.start_probs.size() != pred.end_probs.size()) {
        throw DimensionError("start and end distributions differ in length");
    }
    std::vector<double> r(pred.start_probs.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        r[i] = pred.start_probs[i] + pred.end_probs[i];
    }
    return r;
}

}  // namespace lfqa
