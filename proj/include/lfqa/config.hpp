#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "lfqa/answer_gen.hpp"
#include "lfqa/retrieval.hpp"
#include "lfqa/rerank.hpp"

namespace lfqa {

enum class SparseScorer { bm25, tfidf };
enum class GenerationMode { extractive, abstractive, cgap };

std::string_view to_string(SparseScorer s) noexcept;
std::string_view to_string(GenerationMode m) noexcept;
RetrievalMethod parse_retrieval_method(std::string_view name);
SparseScorer parse_sparse_scorer(std::string_view name);
GenerationMode parse_generation_mode(std::string_view name);

/// An empty url selects the built-in fallback for that provider.
struct ProviderEndpoint {
    std::string url;
    double timeout_s = 30.0;
};

struct PipelineConfig {
    struct Retrieval {
        RetrievalMethod mode = RetrievalMethod::sparse;
        std::size_t n = 20;
        SparseScorer scorer = SparseScorer::bm25;
    } retrieval;

    RerankConfig rerank;

    struct Generation {
        GenerationMode mode = GenerationMode::extractive;
        std::size_t budget = k_answer_budget_words;
        std::size_t k_passages = 3;
        InputTemplate input_template = InputTemplate::caire;
        int max_tokens = 128;
        std::size_t extractive_top_k = 3;
    } generation;

    struct Cgap {
        std::size_t k = 8;
        std::size_t m = 10;
        double top_p = 0.9;
        std::string repository;  // support JSONL; empty runs zero-shot
    } cgap;

    struct Providers {
        ProviderEndpoint lm;
        ProviderEndpoint embedding;
        ProviderEndpoint mrc;
        ProviderEndpoint mrc2;
    } providers;

    std::uint64_t seed = 0;

    /// Throws InvalidArgument naming the offending field.
    void validate() const;
};

/// Missing keys keep their defaults; unknown keys are rejected.
PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfig& cfg);
PipelineConfig load_config(const std::filesystem::path& path);

/// LFQA_LM_URL, LFQA_EMB_URL, LFQA_MRC_URL and LFQA_MRC2_URL replace the
/// corresponding provider urls when set.
void apply_env_overrides(PipelineConfig& cfg);

}  // namespace lfqa
