#pragma once

// Brute-force reference implementations. They recompute everything from raw
// tokens and loops and share no code paths with the library's scorers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "lfqa/corpus.hpp"
#include "lfqa/metrics.hpp"

namespace lfqa::oracle {

struct Ranked {
    std::uint32_t ref;
    double score;
};

inline void sort_ranked(std::vector<Ranked>& v)
{
    std::sort(v.begin(), v.end(), [](const Ranked& a, const Ranked& b) {
        return std::tie(b.score, a.ref) < std::tie(a.score, b.ref);
    });
}

inline std::vector<std::string> distinct_query_words(const std::string& query)
{
    std::vector<std::string> out;
    for (const auto& t : tokenize(query)) {
        if (t.is_word && std::find(out.begin(), out.end(), t.lower) == out.end()) {
            out.push_back(t.lower);
        }
    }
    return out;
}

/// Scores every passage against every query word. Returns all passages when
/// any query word occurs in the corpus, otherwise nothing.
inline std::vector<Ranked> bm25(const std::vector<Passage>& passages, const std::string& query,
                                std::size_t n, double k1 = 1.2, double b = 0.75)
{
    const auto words = distinct_query_words(query);
    const double N = static_cast<double>(passages.size());
    double total_len = 0.0;
    for (const auto& p : passages) {
        std::size_t len = 0;
        for (const auto& t : p.tokens) {
            len += t.is_word ? 1 : 0;
        }
        total_len += static_cast<double>(len);
    }
    const double avg = total_len > 0.0 ? total_len / N : 1.0;

    auto tf = [](const Passage& p, const std::string& w) {
        std::size_t c = 0;
        for (const auto& t : p.tokens) {
            c += (t.is_word && t.lower == w) ? 1 : 0;
        }
        return c;
    };
    std::vector<std::size_t> df(words.size(), 0);
    bool any = false;
    for (std::size_t q = 0; q < words.size(); ++q) {
        for (const auto& p : passages) {
            df[q] += tf(p, words[q]) > 0 ? 1 : 0;
        }
        any = any || df[q] > 0;
    }
    if (!any) {
        return {};
    }
    std::vector<Ranked> out;
    for (std::size_t i = 0; i < passages.size(); ++i) {
        double len = 0.0;
        for (const auto& t : passages[i].tokens) {
            len += t.is_word ? 1.0 : 0.0;
        }
        double s = 0.0;
        for (std::size_t q = 0; q < words.size(); ++q) {
            const double f = static_cast<double>(tf(passages[i], words[q]));
            if (f == 0.0) {
                continue;
            }
            const double d = static_cast<double>(df[q]);
            const double idf = std::log((N - d + 0.5) / (d + 0.5) + 1.0);
            s += idf * (f * (k1 + 1.0)) / (f + k1 * (1.0 - b + b * len / avg));
        }
        out.push_back({static_cast<std::uint32_t>(i), s});
    }
    sort_ranked(out);
    if (out.size() > n) {
        out.resize(n);
    }
    return out;
}

inline std::vector<Ranked> dense(const std::vector<std::vector<double>>& vectors,
                                 const std::vector<double>& query, std::size_t k)
{
    std::vector<Ranked> out;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        double s = 0.0;
        for (std::size_t d = 0; d < query.size(); ++d) {
            s += vectors[i][d] * query[d];
        }
        out.push_back({static_cast<std::uint32_t>(i), s});
    }
    sort_ranked(out);
    if (out.size() > k) {
        out.resize(k);
    }
    return out;
}

struct Span {
    std::size_t start;
    std::size_t end;
    double score;
};

/// Enumerates every admissible (i, j) and picks the best by (score desc,
/// start asc, length asc).
inline Span best_span(const std::vector<double>& start, const std::vector<double>& end,
                      std::size_t window)
{
    std::vector<Span> all;
    for (std::size_t i = 0; i < start.size(); ++i) {
        for (std::size_t j = i; j < end.size() && j - i < window; ++j) {
            all.push_back({i, j, start[i] + end[j]});
        }
    }
    return *std::min_element(all.begin(), all.end(), [](const Span& a, const Span& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        if (a.start != b.start) {
            return a.start < b.start;
        }
        return a.end < b.end;
    });
}

/// Longest common subsequence by enumerating every subsequence of `a`.
inline std::size_t lcs_exhaustive(const std::vector<std::string>& a, const std::vector<std::string>& b)
{
    std::size_t best = 0;
    const std::uint32_t masks = 1U << a.size();
    for (std::uint32_t mask = 0; mask < masks; ++mask) {
        auto len = static_cast<std::size_t>(__builtin_popcount(mask));
        if (len <= best) {
            continue;
        }
        std::size_t j = 0;
        bool ok = true;
        for (std::size_t i = 0; i < a.size() && ok; ++i) {
            if (!(mask & (1U << i))) {
                continue;
            }
            while (j < b.size() && b[j] != a[i]) {
                ++j;
            }
            if (j == b.size()) {
                ok = false;
            } else {
                ++j;
            }
        }
        if (ok) {
            best = len;
        }
    }
    return best;
}

struct VoteOracle {
    std::map<std::string, std::size_t> counts;
    std::string final_answer;
};

/// Counts normalized answers, then scans answers in generation order and
/// returns the first one whose class has the maximal count.
inline VoteOracle vote(const std::vector<std::string>& answers)
{
    VoteOracle v;
    for (const auto& a : answers) {
        ++v.counts[normalize_answer(a)];
    }
    std::size_t max = 0;
    for (const auto& [_, c] : v.counts) {
        max = std::max(max, c);
    }
    for (const auto& a : answers) {
        if (v.counts[normalize_answer(a)] == max) {
            v.final_answer = a;
            break;
        }
    }
    return v;
}

/// C = A . B by the schoolbook triple loop.
inline std::vector<std::vector<double>> matmul(const std::vector<std::vector<double>>& a,
                                               const std::vector<std::vector<double>>& b)
{
    std::vector<std::vector<double>> c(a.size(), std::vector<double>(b.front().size(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.front().size(); ++j) {
            for (std::size_t k = 0; k < b.size(); ++k) {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    return c;
}

inline std::vector<long double> mixture_ld(double p_gen, const std::vector<double>& gen,
                                           const std::vector<double>& rea)
{
    std::vector<long double> out(gen.size());
    const long double g = p_gen;
    for (std::size_t i = 0; i < gen.size(); ++i) {
        out[i] = g * static_cast<long double>(gen[i])
                 + (1.0L - g) * static_cast<long double>(rea[i]);
    }
    return out;
}

/// Random non-negative vector normalized to sum 1, with some exact zeros.
inline std::vector<double> random_distribution(std::mt19937_64& rng, std::size_t n)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(n);
    double sum = 0.0;
    for (auto& x : v) {
        x = u(rng) < 0.2 ? 0.0 : u(rng);
        sum += x;
    }
    if (sum == 0.0) {
        v[0] = 1.0;
        sum = 1.0;
    }
    for (auto& x : v) {
        x /= sum;
    }
    return v;
}

/// Random text over a small vocabulary so that terms repeat across passages.
inline std::string random_text(std::mt19937_64& rng, std::size_t sentences, std::size_t max_words)
{
    static const std::vector<std::string> vocab = {
        "virus", "mask", "fever", "cough", "vaccine", "trial", "dose", "risk", "the", "of",
        "patients", "days", "study", "lung", "test", "cell", "immune", "spread", "air", "care"};
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    std::uniform_int_distribution<std::size_t> len(1, max_words);
    std::string out;
    for (std::size_t s = 0; s < sentences; ++s) {
        auto n = len(rng);
        for (std::size_t w = 0; w < n; ++w) {
            std::string word = vocab[pick(rng)];
            if (w == 0) {
                word[0] = static_cast<char>(word[0] - 'a' + 'A');
            }
            if (!out.empty()) {
                out.push_back(' ');
            }
            out += word;
        }
        out.push_back('.');
    }
    return out;
}

}  // namespace lfqa::oracle
