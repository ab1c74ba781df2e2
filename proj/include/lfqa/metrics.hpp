#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lfqa {

/// Lowercase, drop punctuation, drop the articles a/an/the, collapse whitespace.
std::string normalize_answer(std::string_view text);

/// 1 when the normalized prediction equals some normalized gold.
int exact_match(std::string_view pred, std::span<const std::string> golds);

/// Bag-of-tokens F1 over lowercased, punctuation-free tokens, overlap counted
/// with multiplicity. Articles are kept.
double token_f1(std::string_view pred, std::string_view gold);

struct RougeScore {
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
};

std::size_t lcs_length(std::span<const std::string_view> a, std::span<const std::string_view> b);

/// LCS-based ROUGE-L over the same tokens as token_f1, beta = 1.
RougeScore rouge_l(std::string_view pred, std::string_view ref);

/// Multi-reference variants take the best reference.
double token_f1_max(std::string_view pred, std::span<const std::string> golds);
double rouge_l_max(std::string_view pred, std::span<const std::string> golds);

/// Mean of 1/rank over questions, 0 for a question with no golden candidate.
double mrr(std::span<const std::optional<std::size_t>> first_golden_ranks);

/// Each inner list flags, in rank order, which candidates are golden.
double precision_at_1(std::span<const std::vector<bool>> golden_flags);
double recall_at_3(std::span<const std::vector<bool>> golden_flags);

struct FaithfulnessPair {
    std::string short_gold;
    std::string long_answer;
};

/// Share of pairs whose normalized short answer is a substring of the
/// normalized long answer.
double faithfulness_recall(std::span<const FaithfulnessPair> pairs);

struct EvalRecord {
    std::string question;
    std::string prediction;
    std::vector<std::string> golds;
};

/// JSONL {"question", "prediction", "golds"}. Errors name the 0-based record
/// index and the line.
std::vector<EvalRecord> read_eval_jsonl(std::istream& in);

enum class Metric { em, f1, rouge_l, faithfulness };

std::string_view to_string(Metric m) noexcept;
/// Parses "em,f1,rougeL,faithfulness" style lists.
std::vector<Metric> parse_metrics(std::string_view list);

struct MetricSeries {
    double mean = 0.0;
    std::vector<double> per_example;
};

struct MetricReport {
    std::size_t count = 0;
    std::map<std::string, MetricSeries> metrics;
};

MetricReport evaluate(std::span<const EvalRecord> records, std::span<const Metric> metrics);

}  // namespace lfqa
