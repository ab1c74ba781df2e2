#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lfqa/answer_gen.hpp"
#include "lfqa/cgap.hpp"
#include "lfqa/config.hpp"
#include "lfqa/embedding.hpp"
#include "lfqa/index_io.hpp"
#include "lfqa/lm.hpp"
#include "lfqa/reader.hpp"

namespace lfqa {

/// Providers used by a pipeline. `mrc2` is optional; when present the two
/// readers are ensembled.
struct Providers {
    std::unique_ptr<LmProvider> lm;
    std::unique_ptr<EmbeddingProvider> embedder;
    std::unique_ptr<MrcProvider> mrc;
    std::unique_ptr<MrcProvider> mrc2;
};

/// Built-in offline providers: echo LM, hash embeddings, heuristic reader.
Providers builtin_providers(std::size_t embedding_dim = 256);

struct RankedPassage {
    ScoredPassage scored;
    double retrieval_score = 0.0;
    std::vector<EvidenceSpan> highlights;
};

struct QueryResponse {
    std::string question;
    GenerationMode mode = GenerationMode::extractive;
    std::string status = "ok";  // "ok" or "no_results"
    RetrievalMethod retrieval = RetrievalMethod::sparse;
    std::vector<RankedPassage> passages;
    LongAnswer answer;
    std::optional<MarginalizationResult> cgap;
    /// Milliseconds per stage; only filled when requested.
    std::map<std::string, double> timing;
};

struct QueryOptions {
    std::optional<GenerationMode> mode;
    std::optional<std::size_t> cgap_k;
    bool timing = false;
};

/// Immutable after construction; answer_question may be called concurrently
/// when the providers allow it.
class Pipeline {
  public:
    /// `index` may be null for a CGAP-only pipeline.
    Pipeline(std::shared_ptr<const LoadedIndex> index, PipelineConfig cfg, Providers providers,
             SupportRepository repository = {});

    QueryResponse answer_question(std::string_view question, const QueryOptions& opts = {}) const;
    std::vector<RetrievalHit> retrieve(std::string_view question, std::size_t n) const;
    MarginalizationResult cgap(std::string_view question, std::optional<std::size_t> k = {}) const;

    const PipelineConfig& config() const noexcept { return m_cfg; }
    const Providers& providers() const noexcept { return m_providers; }
    const LoadedIndex* index() const noexcept { return m_index.get(); }

  private:
    const LoadedIndex& require_index() const;

    std::shared_ptr<const LoadedIndex> m_index;
    PipelineConfig m_cfg;
    Providers m_providers;
    SupportRepository m_repository;
};

/// Loads the support repository named in the config, embedding it with
/// `embedder`. An empty path yields an empty repository.
SupportRepository load_repository(const PipelineConfig& cfg, EmbeddingProvider& embedder);

nlohmann::json to_json(const QueryResponse& r, const PassageTable* table);
nlohmann::json to_json(const MarginalizationResult& r);
nlohmann::json hits_to_json(std::string_view question, const std::vector<RetrievalHit>& hits,
                            const PassageTable& table);

/// Canonical serialization shared by the CLI and the HTTP service.
std::string render_json(const nlohmann::json& j);

}  // namespace lfqa
