#include "lfqa/embedding.hpp"

#include <cstdint>

#include "lfqa/corpus.hpp"
#include "lfqa/errors.hpp"
#include "lfqa/retrieval.hpp"

namespace lfqa {

namespace {

std::uint64_t fnv1a(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t& state)
{
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

std::vector<double> EmbeddingProvider::embed_one(const std::string& text)
{
    auto out = embed(std::span<const std::string>(&text, 1));
    if (out.size() != 1) {
        throw ProtocolError("embedding provider returned " + std::to_string(out.size())
                            + " vectors for 1 text");
    }
    return std::move(out.front());
}

HashEmbedder::HashEmbedder(std::size_t dim, std::size_t nonzeros) : m_dim(dim), m_nonzeros(nonzeros)
{
    if (dim == 0 || nonzeros == 0) {
        throw InvalidArgument("hash embedder needs positive dim and nonzeros");
    }
}

std::vector<double> HashEmbedder::token_embedding(std::string_view lowered) const
{
    std::vector<double> v(m_dim, 0.0);
    std::uint64_t state = fnv1a(lowered);
    for (std::size_t i = 0; i < m_nonzeros; ++i) {
        auto r = splitmix64(state);
        v[r % m_dim] += (r >> 63) ? 1.0 : -1.0;
    }
    return v;
}

std::vector<std::vector<double>> HashEmbedder::token_embeddings(std::string_view text) const
{
    std::vector<std::vector<double>> out;
    for (const auto& tok : tokenize(text)) {
        if (tok.is_word) {
            out.push_back(token_embedding(tok.lower));
        }
    }
    return out;
}

std::vector<std::vector<double>> HashEmbedder::embed(std::span<const std::string> texts)
{
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        auto toks = token_embeddings(text);
        out.push_back(toks.empty() ? std::vector<double>(m_dim, 0.0) : mean_pool(toks));
    }
    return out;
}

}  // namespace lfqa
