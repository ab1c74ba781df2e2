#pragma once

#include <cstddef>
#include <initializer_list>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "lfqa/reader.hpp"

namespace lfqa {

/// Non-negative values summing to 1 within 1e-9. Construction validates.
class ProbVector {
  public:
    static constexpr double k_tolerance = 1e-9;

    explicit ProbVector(std::vector<double> values);

    std::size_t size() const noexcept { return m_values.size(); }
    double operator[](std::size_t i) const { return m_values[i]; }
    std::span<const double> values() const noexcept { return m_values; }
    friend bool operator==(const ProbVector&, const ProbVector&) = default;

  private:
    std::vector<double> m_values;
};

/// Dense row-major matrix of finite reals.
class ScoreMatrix {
  public:
    ScoreMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    ScoreMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    static ScoreMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static ScoreMatrix from_rows(std::span<const std::vector<double>> rows);

    std::size_t rows() const noexcept { return m_rows; }
    std::size_t cols() const noexcept { return m_cols; }
    double operator()(std::size_t r, std::size_t c) const { return m_data[r * m_cols + c]; }
    double& operator()(std::size_t r, std::size_t c) { return m_data[r * m_cols + c]; }
    std::span<const double> row(std::size_t r) const;
    std::span<double> row(std::size_t r);
    friend bool operator==(const ScoreMatrix&, const ScoreMatrix&) = default;

  private:
    std::size_t m_rows;
    std::size_t m_cols;
    std::vector<double> m_data;
};

/// Max-subtracted softmax.
ProbVector softmax(std::span<const double> logits);

/// Row r: softmax(q_r . K^T / sqrt(d) + bias_r). Projection weights are
/// expected to be folded into `queries` and `keys` already.
ScoreMatrix biased_attention(const ScoreMatrix& queries, const ScoreMatrix& keys,
                             const ScoreMatrix& bias);

/// m copies of the per-token relevance vector r.
ScoreMatrix build_bias_matrix(std::span<const double> relevance, std::size_t m);

/// Encoder-decoder attention biased by a token relevance vector shared by
/// every decoder position.
ScoreMatrix relevance_biased_attention(const ScoreMatrix& queries, const ScoreMatrix& keys,
                                       std::span<const double> relevance);

struct AttentionContext {
    ScoreMatrix weights;  // m x n, rows sum to 1
    ScoreMatrix context;  // m x d
};

/// weights = softmax(h_dec . h_enc^T) row-wise; context = weights . h_enc.
AttentionContext attention_context(const ScoreMatrix& h_dec, const ScoreMatrix& h_enc);

/// sigmoid(W_c . h_c + W_g . h_dec); both weight matrices have one row.
double gen_gate(std::span<const double> h_c, std::span<const double> h_dec, const ScoreMatrix& w_c,
                const ScoreMatrix& w_g);

using SentenceKey = std::pair<PassageRef, std::size_t>;

/// Copy distribution over vocabulary ids: each occurrence of a word in a
/// sentence contributes that sentence's probability, then the total is
/// renormalized. Sentences absent from `token_map` contribute nothing.
ProbVector evidence_to_vocab(std::span<const EvidenceSentence> sentences,
                             const std::map<SentenceKey, std::vector<std::size_t>>& token_map,
                             std::size_t vocab_size);

/// p_gen * P_gen + (1 - p_gen) * P_rea
ProbVector pointer_mixture(double p_gen, const ProbVector& p_vocab, const ProbVector& p_copy);

struct DecodeStep {
    AttentionContext attention;
    std::vector<double> p_gen;
    std::vector<ProbVector> output;
};

/// One pointer-generator step per decoder row: attend over the encoder, gate,
/// then mix the generator distribution for that row with the copy distribution.
DecodeStep pointer_generator_decode(const ScoreMatrix& h_dec, const ScoreMatrix& h_enc,
                                    const ScoreMatrix& w_c, const ScoreMatrix& w_g,
                                    std::span<const ProbVector> p_vocab_rows,
                                    const ProbVector& p_copy);

}  // namespace lfqa
