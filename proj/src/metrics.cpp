#include "lfqa/metrics.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "lfqa/corpus.hpp"
#include "lfqa/errors.hpp"

namespace lfqa {

namespace {

/// Lowercased, punctuation-free text. Articles stay: overlap metrics count them.
std::string overlap_text(std::string_view text)
{
    return strip_punctuation(lowercase(text));
}

double f1_of(double overlap, std::size_t pred_len, std::size_t ref_len)
{
    if (overlap == 0.0) {
        return 0.0;
    }
    double p = overlap / static_cast<double>(pred_len);
    double r = overlap / static_cast<double>(ref_len);
    return 2.0 * p * r / (p + r);
}

}  // namespace

std::string normalize_answer(std::string_view text)
{
    auto cleaned = strip_punctuation(lowercase(text));
    std::string out;
    for (auto word : split_whitespace(cleaned)) {
        if (word == "a" || word == "an" || word == "the") {
            continue;
        }
        if (!out.empty()) {
            out.push_back(' ');
        }
        out.append(word);
    }
    return out;
}

int exact_match(std::string_view pred, std::span<const std::string> golds)
{
    if (golds.empty()) {
        throw InvalidArgument("exact_match needs at least one gold answer");
    }
    auto p = normalize_answer(pred);
    return std::any_of(golds.begin(), golds.end(),
                       [&](const std::string& g) { return normalize_answer(g) == p; })
               ? 1
               : 0;
}

double token_f1(std::string_view pred, std::string_view gold)
{
    auto pn = overlap_text(pred);
    auto gn = overlap_text(gold);
    auto pt = split_whitespace(pn);
    auto gt = split_whitespace(gn);
    if (pt.empty() || gt.empty()) {
        return pt.empty() && gt.empty() ? 1.0 : 0.0;
    }
    std::unordered_map<std::string_view, std::size_t> counts;
    for (auto t : gt) {
        ++counts[t];
    }
    std::size_t overlap = 0;
    for (auto t : pt) {
        if (auto it = counts.find(t); it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    return f1_of(static_cast<double>(overlap), pt.size(), gt.size());
}

std::size_t lcs_length(std::span<const std::string_view> a, std::span<const std::string_view> b)
{
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

RougeScore rouge_l(std::string_view pred, std::string_view ref)
{
    auto pn = overlap_text(pred);
    auto rn = overlap_text(ref);
    auto pt = split_whitespace(pn);
    auto rt = split_whitespace(rn);
    if (pt.empty() || rt.empty()) {
        double v = pt.empty() && rt.empty() ? 1.0 : 0.0;
        return {v, v, v};
    }
    auto lcs = static_cast<double>(lcs_length(pt, rt));
    RougeScore s;
    s.recall = lcs / static_cast<double>(rt.size());
    s.precision = lcs / static_cast<double>(pt.size());
    s.f1 = f1_of(lcs, pt.size(), rt.size());
    return s;
}

double token_f1_max(std::string_view pred, std::span<const std::string> golds)
{
    double best = 0.0;
    for (const auto& g : golds) {
        best = std::max(best, token_f1(pred, g));
    }
    return best;
}

double rouge_l_max(std::string_view pred, std::span<const std::string> golds)
{
    double best = 0.0;
    for (const auto& g : golds) {
        best = std::max(best, rouge_l(pred, g).f1);
    }
    return best;
}

double mrr(std::span<const std::optional<std::size_t>> first_golden_ranks)
{
    if (first_golden_ranks.empty()) {
        throw InvalidArgument("mrr over zero questions");
    }
    double sum = 0.0;
    for (const auto& r : first_golden_ranks) {
        if (!r) {
            continue;
        }
        if (*r == 0) {
            throw InvalidArgument("ranks are 1-based");
        }
        sum += 1.0 / static_cast<double>(*r);
    }
    return sum / static_cast<double>(first_golden_ranks.size());
}

namespace {

double golden_within(std::span<const std::vector<bool>> flags, std::size_t k)
{
    if (flags.empty()) {
        return 0.0;
    }
    std::size_t hits = 0;
    for (const auto& list : flags) {
        auto end = list.begin() + static_cast<std::ptrdiff_t>(std::min(k, list.size()));
        hits += std::find(list.begin(), end, true) != end ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(flags.size());
}

}  // namespace

double precision_at_1(std::span<const std::vector<bool>> golden_flags)
{
    return golden_within(golden_flags, 1);
}

double recall_at_3(std::span<const std::vector<bool>> golden_flags)
{
    return golden_within(golden_flags, 3);
}

double faithfulness_recall(std::span<const FaithfulnessPair> pairs)
{
    if (pairs.empty()) {
        throw InvalidArgument("faithfulness_recall over zero pairs");
    }
    std::size_t contained = 0;
    for (const auto& p : pairs) {
        auto gold = normalize_answer(p.short_gold);
        auto text = normalize_answer(p.long_answer);
        if (!text.empty() && text.find(gold) != std::string::npos) {
            ++contained;
        }
    }
    return static_cast<double>(contained) / static_cast<double>(pairs.size());
}

std::vector<EvalRecord> read_eval_jsonl(std::istream& in)
{
    std::vector<EvalRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const auto index = out.size();
        auto fail = [&](const std::string& why) {
            return ParseError(line_no, "record " + std::to_string(index) + ": " + why);
        };
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw fail(std::string("invalid JSON: ") + e.what());
        }
        if (!obj.is_object()) {
            throw fail("expected a JSON object");
        }
        EvalRecord rec;
        if (!obj.contains("question") || !obj["question"].is_string()) {
            throw fail("missing string field \"question\"");
        }
        if (!obj.contains("prediction") || !obj["prediction"].is_string()) {
            throw fail("missing string field \"prediction\"");
        }
        if (!obj.contains("golds") || !obj["golds"].is_array() || obj["golds"].empty()) {
            throw fail("\"golds\" must be a non-empty array of strings");
        }
        rec.question = obj["question"].get<std::string>();
        rec.prediction = obj["prediction"].get<std::string>();
        for (const auto& g : obj["golds"]) {
            if (!g.is_string()) {
                throw fail("\"golds\" must be a non-empty array of strings");
            }
            rec.golds.push_back(g.get<std::string>());
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::string_view to_string(Metric m) noexcept
{
    switch (m) {
    case Metric::em:
        return "em";
    case Metric::f1:
        return "f1";
    case Metric::rouge_l:
        return "rougeL";
    case Metric::faithfulness:
        break;
    }
    return "faithfulness";
}

std::vector<Metric> parse_metrics(std::string_view list)
{
    std::vector<Metric> out;
    std::size_t pos = 0;
    while (pos <= list.size()) {
        auto comma = list.find(',', pos);
        auto name = list.substr(pos, comma == std::string_view::npos ? std::string_view::npos
                                                                      : comma - pos);
        bool found = false;
        for (auto m : {Metric::em, Metric::f1, Metric::rouge_l, Metric::faithfulness}) {
            if (name == to_string(m)) {
                if (std::find(out.begin(), out.end(), m) == out.end()) {
                    out.push_back(m);
                }
                found = true;
            }
        }
        if (!found) {
            throw InvalidArgument("unknown metric \"" + std::string(name) + "\"");
        }
        if (comma == std::string_view::npos) {
            break;
        }
        pos = comma + 1;
    }
    return out;
}

MetricReport evaluate(std::span<const EvalRecord> records, std::span<const Metric> metrics)
{
    if (records.empty()) {
        throw InvalidArgument("no records to evaluate");
    }
    MetricReport report;
    report.count = records.size();
    for (auto m : metrics) {
        MetricSeries series;
        for (const auto& r : records) {
            double v = 0.0;
            switch (m) {
            case Metric::em:
                v = exact_match(r.prediction, r.golds);
                break;
            case Metric::f1:
                v = token_f1_max(r.prediction, r.golds);
                break;
            case Metric::rouge_l:
                v = rouge_l_max(r.prediction, r.golds);
                break;
            case Metric::faithfulness: {
                for (const auto& g : r.golds) {
                    FaithfulnessPair pair{g, r.prediction};
                    v = std::max(v, faithfulness_recall(std::span(&pair, 1)));
                }
                break;
            }
            }
            series.per_example.push_back(v);
        }
        series.mean = std::accumulate(series.per_example.begin(), series.per_example.end(), 0.0)
                      / static_cast<double>(series.per_example.size());
        report.metrics.emplace(std::string(to_string(m)), std::move(series));
    }
    return report;
}

}  // namespace lfqa
