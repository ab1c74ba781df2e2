#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "lfqa/corpus.hpp"
#include "lfqa/retrieval.hpp"

namespace lfqa {

class EmbeddingProvider;

inline constexpr std::uint32_t k_index_format_version = 1;

/// Contents of the index.json sidecar.
struct IndexMetadata {
    std::uint32_t version = k_index_format_version;
    std::size_t max_words = 0;
    std::size_t documents = 0;
    std::size_t passages = 0;
    std::size_t terms = 0;
    std::size_t oversized = 0;
    double avg_length = 0.0;
    std::string embedding_model;  // empty when no embeddings were written
    std::size_t embedding_dim = 0;
};

struct LoadedIndex {
    PassageTable table;
    InvertedIndex index;
    std::optional<EmbeddingStore> embeddings;
    IndexMetadata meta;
};

/// Writes index.bin, index.json and, when an embedder is given,
/// embeddings.jsonl into `dir`. Output depends only on the inputs.
IndexMetadata write_index(const std::filesystem::path& dir, const Corpus& corpus,
                          std::size_t max_words, EmbeddingProvider* embedder);

LoadedIndex load_index(const std::filesystem::path& dir);

}  // namespace lfqa
