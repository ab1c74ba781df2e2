#include "lfqa/fusion_math.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lfqa/errors.hpp"
#include "lfqa/rerank.hpp"

namespace lfqa {

namespace {

std::string shape(std::size_t r, std::size_t c)
{
    return std::to_string(r) + "x" + std::to_string(c);
}

void require_finite(std::span<const double> v, const char* what)
{
    if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) {
        throw InvalidArgument(std::string(what) + " has non-finite entries");
    }
}

}  // namespace

ProbVector::ProbVector(std::vector<double> values) : m_values(std::move(values))
{
    if (m_values.empty()) {
        throw InvalidArgument("empty probability vector");
    }
    double sum = 0.0;
    for (double p : m_values) {
        if (!std::isfinite(p) || p < 0.0) {
            throw InvalidArgument("probability vector has a negative or non-finite entry");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > k_tolerance) {
        throw InvalidArgument("probability vector sums to " + std::to_string(sum));
    }
}

ScoreMatrix::ScoreMatrix(std::size_t rows, std::size_t cols, double fill)
    : m_rows(rows), m_cols(cols), m_data(rows * cols, fill)
{
    require_finite(m_data, "matrix");
}

ScoreMatrix::ScoreMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : m_rows(rows), m_cols(cols), m_data(std::move(data))
{
    if (m_data.size() != rows * cols) {
        throw DimensionError("matrix storage holds " + std::to_string(m_data.size())
                             + " values, shape is " + shape(rows, cols));
    }
    require_finite(m_data, "matrix");
}

ScoreMatrix ScoreMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows)
{
    std::vector<std::vector<double>> v;
    for (auto r : rows) {
        v.emplace_back(r);
    }
    return from_rows(v);
}

ScoreMatrix ScoreMatrix::from_rows(std::span<const std::vector<double>> rows)
{
    const std::size_t cols = rows.empty() ? 0 : rows.front().size();
    std::vector<double> data;
    data.reserve(rows.size() * cols);
    for (const auto& r : rows) {
        if (r.size() != cols) {
            throw DimensionError("ragged matrix rows");
        }
        data.insert(data.end(), r.begin(), r.end());
    }
    return ScoreMatrix(rows.size(), cols, std::move(data));
}

std::span<const double> ScoreMatrix::row(std::size_t r) const
{
    return std::span<const double>(m_data).subspan(r * m_cols, m_cols);
}

std::span<double> ScoreMatrix::row(std::size_t r)
{
    return std::span<double>(m_data).subspan(r * m_cols, m_cols);
}

ProbVector softmax(std::span<const double> logits)
{
    if (logits.empty()) {
        throw InvalidArgument("softmax of an empty vector");
    }
    require_finite(logits, "softmax input");
    double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (auto& x : out) {
        x /= sum;
    }
    return ProbVector(std::move(out));
}

ScoreMatrix biased_attention(const ScoreMatrix& queries, const ScoreMatrix& keys,
                             const ScoreMatrix& bias)
{
    if (queries.cols() != keys.cols()) {
        throw DimensionError("queries " + shape(queries.rows(), queries.cols()) + " and keys "
                             + shape(keys.rows(), keys.cols()) + " differ in inner dimension");
    }
    if (bias.rows() != queries.rows() || bias.cols() != keys.rows()) {
        throw DimensionError("bias is " + shape(bias.rows(), bias.cols()) + ", expected "
                             + shape(queries.rows(), keys.rows()));
    }
    if (keys.rows() == 0 || queries.cols() == 0) {
        throw DimensionError("attention needs at least one key and one feature");
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(queries.cols()));
    ScoreMatrix out(queries.rows(), keys.rows());
    std::vector<double> logits(keys.rows());
    for (std::size_t r = 0; r < queries.rows(); ++r) {
        for (std::size_t c = 0; c < keys.rows(); ++c) {
            double s = 0.0;
            for (std::size_t k = 0; k < queries.cols(); ++k) {
                s += queries(r, k) * keys(c, k);
            }
            logits[c] = s * scale + bias(r, c);
        }
        auto p = softmax(logits);
        std::copy(p.values().begin(), p.values().end(), out.row(r).begin());
    }
    return out;
}

ScoreMatrix build_bias_matrix(std::span<const double> relevance, std::size_t m)
{
    if (m == 0) {
        throw InvalidArgument("bias matrix needs at least one row");
    }
    ScoreMatrix out(m, relevance.size());
    for (std::size_t r = 0; r < m; ++r) {
        std::copy(relevance.begin(), relevance.end(), out.row(r).begin());
    }
    require_finite(relevance, "relevance vector");
    return out;
}

ScoreMatrix relevance_biased_attention(const ScoreMatrix& queries, const ScoreMatrix& keys,
                                       std::span<const double> relevance)
{
    return biased_attention(queries, keys, build_bias_matrix(relevance, queries.rows()));
}

AttentionContext attention_context(const ScoreMatrix& h_dec, const ScoreMatrix& h_enc)
{
    if (h_dec.cols() != h_enc.cols()) {
        throw DimensionError("decoder " + shape(h_dec.rows(), h_dec.cols()) + " and encoder "
                             + shape(h_enc.rows(), h_enc.cols()) + " differ in inner dimension");
    }
    if (h_enc.rows() == 0) {
        throw DimensionError("attention over an empty encoder sequence");
    }
    const std::size_t m = h_dec.rows(), n = h_enc.rows(), d = h_dec.cols();
    AttentionContext out{ScoreMatrix(m, n), ScoreMatrix(m, d)};
    std::vector<double> logits(n);
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                s += h_dec(r, k) * h_enc(c, k);
            }
            logits[c] = s;
        }
        auto p = softmax(logits);
        std::copy(p.values().begin(), p.values().end(), out.weights.row(r).begin());
        for (std::size_t k = 0; k < d; ++k) {
            double s = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
                s += p[c] * h_enc(c, k);
            }
            out.context(r, k) = s;
        }
    }
    return out;
}

double gen_gate(std::span<const double> h_c, std::span<const double> h_dec, const ScoreMatrix& w_c,
                const ScoreMatrix& w_g)
{
    if (w_c.rows() != 1 || w_g.rows() != 1) {
        throw DimensionError("gate weights must have a single output row");
    }
    if (w_c.cols() != h_c.size() || w_g.cols() != h_dec.size()) {
        throw DimensionError("gate weights " + shape(w_c.rows(), w_c.cols()) + " / "
                             + shape(w_g.rows(), w_g.cols()) + " do not match state sizes "
                             + std::to_string(h_c.size()) + " / " + std::to_string(h_dec.size()));
    }
    double logit = 0.0;
    for (std::size_t i = 0; i < h_c.size(); ++i) {
        logit += w_c(0, i) * h_c[i];
    }
    for (std::size_t i = 0; i < h_dec.size(); ++i) {
        logit += w_g(0, i) * h_dec[i];
    }
    return sigmoid(logit);
}

ProbVector evidence_to_vocab(std::span<const EvidenceSentence> sentences,
                             const std::map<SentenceKey, std::vector<std::size_t>>& token_map,
                             std::size_t vocab_size)
{
    if (token_map.empty()) {
        throw InvalidArgument("evidence_to_vocab needs a non-empty token map");
    }
    std::vector<double> mass(vocab_size, 0.0);
    for (const auto& s : sentences) {
        auto it = token_map.find({s.passage, s.sentence_index});
        if (it == token_map.end()) {
            continue;
        }
        for (auto id : it->second) {
            if (id >= vocab_size) {
                throw InvalidArgument("vocabulary id " + std::to_string(id) + " out of range");
            }
            mass[id] += s.normalized_prob;
        }
    }
    double total = std::accumulate(mass.begin(), mass.end(), 0.0);
    if (!(total > 0.0)) {
        throw InvalidArgument("evidence sentences carry no probability mass over the vocabulary");
    }
    for (auto& x : mass) {
        x /= total;
    }
    return ProbVector(std::move(mass));
}

ProbVector pointer_mixture(double p_gen, const ProbVector& p_vocab, const ProbVector& p_copy)
{
    if (!(p_gen >= 0.0 && p_gen <= 1.0)) {
        throw InvalidArgument("p_gen must lie in [0, 1]");
    }
    if (p_vocab.size() != p_copy.size()) {
        throw DimensionError("generator and copy distributions differ in length");
    }
    std::vector<double> out(p_vocab.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = p_gen * p_vocab[i] + (1.0 - p_gen) * p_copy[i];
    }
    return ProbVector(std::move(out));
}

DecodeStep pointer_generator_decode(const ScoreMatrix& h_dec, const ScoreMatrix& h_enc,
                                    const ScoreMatrix& w_c, const ScoreMatrix& w_g,
                                    std::span<const ProbVector> p_vocab_rows,
                                    const ProbVector& p_copy)
{
    if (p_vocab_rows.size() != h_dec.rows()) {
        throw DimensionError("one generator distribution is needed per decoder position");
    }
    DecodeStep step{attention_context(h_dec, h_enc), {}, {}};
    for (std::size_t t = 0; t < h_dec.rows(); ++t) {
        double g = gen_gate(step.attention.context.row(t), h_dec.row(t), w_c, w_g);
        step.p_gen.push_back(g);
        step.output.push_back(pointer_mixture(g, p_vocab_rows[t], p_copy));
    }
    return step;
}

}  // namespace lfqa
