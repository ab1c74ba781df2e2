#include "lfqa/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

#include "lfqa/errors.hpp"

namespace lfqa {

std::string_view to_string(RetrievalMethod m) noexcept
{
    return m == RetrievalMethod::sparse ? "sparse" : "dense";
}

InvertedIndex InvertedIndex::build(std::span<const Passage> passages)
{
    if (passages.empty()) {
        throw InvalidArgument("cannot build an index over zero passages");
    }
    PostingMap postings;
    std::vector<std::uint32_t> lengths;
    lengths.reserve(passages.size());
    std::unordered_map<std::string_view, std::uint32_t> counts;
    for (std::size_t i = 0; i < passages.size(); ++i) {
        counts.clear();
        for (const auto& tok : passages[i].tokens) {
            if (tok.is_word) {
                ++counts[tok.lower];
            }
        }
        for (const auto& [term, tf] : counts) {
            postings[std::string(term)].push_back({PassageRef{static_cast<std::uint32_t>(i)}, tf});
        }
        lengths.push_back(static_cast<std::uint32_t>(passages[i].word_count));
    }
    return from_parts(std::move(postings), std::move(lengths));
}

InvertedIndex InvertedIndex::from_parts(PostingMap postings, std::vector<std::uint32_t> lengths)
{
    if (lengths.empty()) {
        throw InvalidArgument("index has no passages");
    }
    for (auto& [term, list] : postings) {
        if (list.empty()) {
            throw InvalidArgument("term \"" + term + "\" has an empty posting list");
        }
        for (std::size_t i = 0; i < list.size(); ++i) {
            if (list[i].ref.value >= lengths.size()) {
                throw InvalidArgument("posting for \"" + term + "\" references unknown passage");
            }
            if (list[i].term_frequency == 0) {
                throw InvalidArgument("posting for \"" + term + "\" has zero term frequency");
            }
            if (i > 0 && !(list[i - 1].ref < list[i].ref)) {
                throw InvalidArgument("postings for \"" + term + "\" not strictly ordered");
            }
        }
    }
    InvertedIndex idx;
    idx.m_postings = std::move(postings);
    idx.m_lengths = std::move(lengths);
    double total = std::accumulate(idx.m_lengths.begin(), idx.m_lengths.end(), 0.0);
    idx.m_avg_length = total > 0.0 ? total / static_cast<double>(idx.m_lengths.size()) : 1.0;
    return idx;
}

std::span<const Posting> InvertedIndex::postings(std::string_view term) const
{
    auto it = m_postings.find(std::string(term));
    if (it == m_postings.end()) {
        return {};
    }
    return it->second;
}

std::uint32_t InvertedIndex::term_frequency(std::string_view term, PassageRef ref) const
{
    auto list = postings(term);
    auto it = std::lower_bound(list.begin(), list.end(), ref,
                               [](const Posting& p, PassageRef r) { return p.ref < r; });
    return it != list.end() && it->ref == ref ? it->term_frequency : 0;
}

std::vector<std::string> query_terms(std::string_view query)
{
    std::vector<std::string> terms;
    std::unordered_set<std::string> seen;
    for (auto& tok : tokenize(query)) {
        if (tok.is_word && seen.insert(tok.lower).second) {
            terms.push_back(std::move(tok.lower));
        }
    }
    return terms;
}

double tf_idf_score(std::string_view term, PassageRef ref, const InvertedIndex& index)
{
    auto df = index.doc_freq(term);
    if (df == 0) {
        return 0.0;
    }
    auto freq = static_cast<double>(index.term_frequency(term, ref));
    auto n = static_cast<double>(index.passage_count());
    return std::log(1.0 + freq) * std::log(n / static_cast<double>(df));
}

double bm25_term_weight(std::size_t term_frequency, std::size_t doc_freq, std::size_t passage_count,
                        double passage_length, double avg_length, const Bm25Params& params) noexcept
{
    auto f = static_cast<double>(term_frequency);
    auto df = static_cast<double>(doc_freq);
    auto n = static_cast<double>(passage_count);
    double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
    double norm = params.k1 * (1.0 - params.b + params.b * passage_length / avg_length);
    return idf * (f * (params.k1 + 1.0)) / (f + norm);
}

void rank_hits(std::vector<RetrievalHit>& hits, std::size_t n)
{
    auto better = [](const RetrievalHit& a, const RetrievalHit& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return a.ref < b.ref;
    };
    if (n < hits.size()) {
        std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(),
                          better);
        hits.resize(n);
    } else {
        std::sort(hits.begin(), hits.end(), better);
    }
}

namespace {

template <typename TermScore>
std::vector<RetrievalHit> term_at_a_time(const InvertedIndex& index, std::string_view query,
                                         std::size_t n, TermScore&& term_score)
{
    std::vector<double> acc(index.passage_count(), 0.0);
    bool any = false;
    for (const auto& term : query_terms(query)) {
        auto list = index.postings(term);
        if (list.empty()) {
            continue;
        }
        any = true;
        for (const auto& p : list) {
            acc[p.ref.value] += term_score(p, list.size());
        }
    }
    if (!any) {
        return {};
    }
    std::vector<RetrievalHit> hits;
    hits.reserve(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) {
        hits.push_back({PassageRef{static_cast<std::uint32_t>(i)}, acc[i], RetrievalMethod::sparse});
    }
    rank_hits(hits, n);
    return hits;
}

}  // namespace

std::vector<RetrievalHit> bm25_search(const InvertedIndex& index, std::string_view query,
                                      std::size_t n, const Bm25Params& params)
{
    return term_at_a_time(index, query, n, [&](const Posting& p, std::size_t df) {
        return bm25_term_weight(p.term_frequency, df, index.passage_count(),
                                index.passage_length(p.ref), index.avg_length(), params);
    });
}

std::vector<RetrievalHit> tfidf_search(const InvertedIndex& index, std::string_view query,
                                       std::size_t n)
{
    auto count = static_cast<double>(index.passage_count());
    return term_at_a_time(index, query, n, [&](const Posting& p, std::size_t df) {
        return std::log(1.0 + static_cast<double>(p.term_frequency))
               * std::log(count / static_cast<double>(df));
    });
}

EmbeddingStore::EmbeddingStore(std::size_t dim) : m_dim(dim)
{
    if (dim == 0) {
        throw InvalidArgument("embedding dimension must be positive");
    }
}

void EmbeddingStore::add(PassageRef ref, std::span<const double> vec)
{
    if (vec.size() != m_dim) {
        throw DimensionError("embedding has " + std::to_string(vec.size()) + " components, store dim is "
                             + std::to_string(m_dim));
    }
    if (!std::all_of(vec.begin(), vec.end(), [](double x) { return std::isfinite(x); })) {
        throw InvalidArgument("embedding has non-finite components");
    }
    m_refs.push_back(ref);
    m_data.insert(m_data.end(), vec.begin(), vec.end());
}

std::span<const double> EmbeddingStore::vector(std::size_t i) const
{
    if (i >= m_refs.size()) {
        throw InvalidArgument("embedding index out of range");
    }
    return std::span<const double>(m_data).subspan(i * m_dim, m_dim);
}

void EmbeddingStore::write_jsonl(std::ostream& out, const PassageTable& table) const
{
    out << nlohmann::json{{"dim", m_dim}}.dump() << '\n';
    for (std::size_t i = 0; i < m_refs.size(); ++i) {
        auto v = vector(i);
        nlohmann::json line{{"ref", table.at(m_refs[i]).key()},
                            {"vec", std::vector<double>(v.begin(), v.end())}};
        out << line.dump() << '\n';
    }
}

EmbeddingStore EmbeddingStore::read_jsonl(std::istream& in, const PassageTable& table)
{
    std::unordered_map<std::string, PassageRef> by_key;
    for (std::size_t i = 0; i < table.size(); ++i) {
        PassageRef r{static_cast<std::uint32_t>(i)};
        by_key.emplace(table.at(r).key(), r);
    }
    std::string line;
    std::size_t line_no = 0;
    std::size_t dim = 0;
    auto parse = [&](const std::string& text) {
        try {
            return nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
        }
    };
    while (dim == 0 && std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        auto header = parse(line);
        if (!header.is_object() || !header.contains("dim") || !header["dim"].is_number_unsigned()
            || header["dim"].get<std::size_t>() == 0) {
            throw ParseError(line_no, "expected header {\"dim\": n}");
        }
        dim = header["dim"].get<std::size_t>();
    }
    if (dim == 0) {
        throw ParseError(0, "embedding store has no header line");
    }
    EmbeddingStore store(dim);
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        auto obj = parse(line);
        if (!obj.is_object() || !obj.contains("ref") || !obj["ref"].is_string() || !obj.contains("vec")
            || !obj["vec"].is_array()) {
            throw ParseError(line_no, "expected {\"ref\": string, \"vec\": [numbers]}");
        }
        auto it = by_key.find(obj["ref"].get<std::string>());
        if (it == by_key.end()) {
            throw ParseError(line_no, "unknown passage ref \"" + obj["ref"].get<std::string>() + "\"");
        }
        std::vector<double> vec;
        for (const auto& x : obj["vec"]) {
            if (!x.is_number()) {
                throw ParseError(line_no, "non-numeric vector component");
            }
            vec.push_back(x.get<double>());
        }
        try {
            store.add(it->second, vec);
        } catch (const InvalidArgument& e) {
            throw ParseError(line_no, e.what());
        }
    }
    return store;
}

double dot(std::span<const double> u, std::span<const double> v)
{
    if (u.size() != v.size()) {
        throw DimensionError("dot product of vectors with " + std::to_string(u.size()) + " and "
                             + std::to_string(v.size()) + " components");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        s += u[i] * v[i];
    }
    return s;
}

std::vector<RetrievalHit> dense_search(const EmbeddingStore& store, std::span<const double> query,
                                       std::size_t k)
{
    if (query.size() != store.dim()) {
        throw DimensionError("query has " + std::to_string(query.size()) + " components, store dim is "
                             + std::to_string(store.dim()));
    }
    std::vector<RetrievalHit> hits;
    hits.reserve(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
        hits.push_back({store.ref(i), dot(store.vector(i), query), RetrievalMethod::dense});
    }
    rank_hits(hits, k);
    return hits;
}

std::vector<double> mean_pool(std::span<const std::vector<double>> token_embeddings)
{
    if (token_embeddings.empty()) {
        throw InvalidArgument("mean_pool of an empty list");
    }
    const auto dim = token_embeddings.front().size();
    std::vector<double> h(dim, 0.0);
    for (const auto& e : token_embeddings) {
        if (e.size() != dim) {
            throw DimensionError("mean_pool inputs have unequal dimensions");
        }
        for (std::size_t i = 0; i < dim; ++i) {
            h[i] += e[i];
        }
    }
    const auto n = static_cast<double>(token_embeddings.size());
    for (auto& x : h) {
        x /= n;
    }
    return h;
}

double cosine(std::span<const double> u, std::span<const double> v)
{
    double uv = dot(u, v);
    double nu = std::sqrt(dot(u, u));
    double nv = std::sqrt(dot(v, v));
    if (nu == 0.0 || nv == 0.0) {
        throw InvalidArgument("cosine of a zero-norm vector");
    }
    return std::clamp(uv / (nu * nv), -1.0, 1.0);
}

}  // namespace lfqa
