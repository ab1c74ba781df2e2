#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lfqa/corpus.hpp"

namespace lfqa {

struct Posting {
    PassageRef ref;
    std::uint32_t term_frequency = 0;
    friend bool operator==(const Posting&, const Posting&) = default;
};

/// Term -> postings over word tokens (lowercased). Punctuation is not indexed;
/// stop-words are.
class InvertedIndex {
  public:
    using PostingMap = std::unordered_map<std::string, std::vector<Posting>>;

    static InvertedIndex build(std::span<const Passage> passages);

    /// Reassemble from serialized parts; validates every invariant.
    static InvertedIndex from_parts(PostingMap postings, std::vector<std::uint32_t> passage_lengths);

    std::size_t passage_count() const noexcept { return m_lengths.size(); }
    double avg_length() const noexcept { return m_avg_length; }
    std::uint32_t passage_length(PassageRef ref) const { return m_lengths.at(ref.value); }
    std::span<const std::uint32_t> passage_lengths() const noexcept { return m_lengths; }

    std::span<const Posting> postings(std::string_view term) const;
    std::size_t doc_freq(std::string_view term) const { return postings(term).size(); }
    std::uint32_t term_frequency(std::string_view term, PassageRef ref) const;

    const PostingMap& posting_map() const noexcept { return m_postings; }

  private:
    PostingMap m_postings;
    std::vector<std::uint32_t> m_lengths;
    double m_avg_length = 1.0;
};

enum class RetrievalMethod { sparse, dense };

struct RetrievalHit {
    PassageRef ref;
    double score = 0.0;
    RetrievalMethod method = RetrievalMethod::sparse;
};

std::string_view to_string(RetrievalMethod m) noexcept;

/// Distinct lowercased word tokens of a query, first occurrence order.
std::vector<std::string> query_terms(std::string_view query);

/// log(1 + freq) * log(N / df), natural logs; 0 for an unseen term.
double tf_idf_score(std::string_view term, PassageRef ref, const InvertedIndex& index);

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Okapi BM25 weight of one term in one passage.
double bm25_term_weight(std::size_t term_frequency, std::size_t doc_freq, std::size_t passage_count,
                        double passage_length, double avg_length, const Bm25Params& params) noexcept;

/// Scores every passage when at least one query term is indexed, so `n`
/// past the corpus size returns the whole corpus. Ties by ascending ref.
std::vector<RetrievalHit> bm25_search(const InvertedIndex& index, std::string_view query,
                                      std::size_t n, const Bm25Params& params = {});

/// Sum of tf_idf_score over distinct query terms, same ranking contract as bm25_search.
std::vector<RetrievalHit> tfidf_search(const InvertedIndex& index, std::string_view query,
                                       std::size_t n);

class EmbeddingStore {
  public:
    explicit EmbeddingStore(std::size_t dim);

    std::size_t dim() const noexcept { return m_dim; }
    std::size_t size() const noexcept { return m_refs.size(); }
    bool empty() const noexcept { return m_refs.empty(); }

    void add(PassageRef ref, std::span<const double> vec);
    PassageRef ref(std::size_t i) const { return m_refs.at(i); }
    std::span<const double> vector(std::size_t i) const;

    /// {"dim": n} header line, then one {"ref": key, "vec": [...]} per entry.
    void write_jsonl(std::ostream& out, const PassageTable& table) const;
    static EmbeddingStore read_jsonl(std::istream& in, const PassageTable& table);

  private:
    std::size_t m_dim;
    std::vector<PassageRef> m_refs;
    std::vector<double> m_data;
};

/// Exact brute-force inner product search. Ties by ascending ref.
std::vector<RetrievalHit> dense_search(const EmbeddingStore& store, std::span<const double> query,
                                       std::size_t k);

double dot(std::span<const double> u, std::span<const double> v);
std::vector<double> mean_pool(std::span<const std::vector<double>> token_embeddings);
double cosine(std::span<const double> u, std::span<const double> v);

/// Sort by score descending, then ref ascending, and keep the first `n`.
void rank_hits(std::vector<RetrievalHit>& hits, std::size_t n);

}  // namespace lfqa
