#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lfqa {

/// Maps texts to fixed-size vectors. Implementations must be safe for
/// concurrent calls.
class EmbeddingProvider {
  public:
    virtual ~EmbeddingProvider() = default;
    virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts) = 0;
    virtual std::size_t dim() const = 0;
    virtual std::string name() const = 0;

    std::vector<double> embed_one(const std::string& text);
};

/// Offline stand-in for a neural encoder: every lowercased word token hashes
/// to a sparse +-1 vector and a text is the mean of its token vectors. Texts
/// with no word tokens embed to the zero vector.
class HashEmbedder final : public EmbeddingProvider {
  public:
    explicit HashEmbedder(std::size_t dim = 256, std::size_t nonzeros = 8);

    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;
    std::size_t dim() const override { return m_dim; }
    std::string name() const override { return "hash"; }

    std::vector<double> token_embedding(std::string_view lowered) const;
    std::vector<std::vector<double>> token_embeddings(std::string_view text) const;

  private:
    std::size_t m_dim;
    std::size_t m_nonzeros;
};

}  // namespace lfqa
