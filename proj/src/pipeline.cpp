#include "lfqa/pipeline.hpp"

#include <chrono>
#include <fstream>

#include "lfqa/errors.hpp"
#include "lfqa/rerank.hpp"

namespace lfqa {

Providers builtin_providers(std::size_t embedding_dim)
{
    Providers p;
    p.lm = std::make_unique<EchoLm>();
    p.embedder = std::make_unique<HashEmbedder>(embedding_dim);
    p.mrc = std::make_unique<HeuristicMrc>();
    return p;
}

Pipeline::Pipeline(std::shared_ptr<const LoadedIndex> index, PipelineConfig cfg,
                   Providers providers, SupportRepository repository)
    : m_index(std::move(index)),
      m_cfg(std::move(cfg)),
      m_providers(std::move(providers)),
      m_repository(std::move(repository))
{
    m_cfg.validate();
    if (!m_providers.lm || !m_providers.embedder || !m_providers.mrc) {
        throw InvalidArgument("pipeline needs an LM, an embedder and a reader");
    }
}

const LoadedIndex& Pipeline::require_index() const
{
    if (!m_index) {
        throw InvalidArgument("no index loaded");
    }
    return *m_index;
}

namespace {

bool blank(std::string_view s)
{
    return s.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

class StageTimer {
  public:
    explicit StageTimer(std::map<std::string, double>* sink) : m_sink(sink) {}

    void mark(const char* stage)
    {
        auto now = std::chrono::steady_clock::now();
        if (m_sink != nullptr) {
            (*m_sink)[stage] = std::chrono::duration<double, std::milli>(now - m_last).count();
        }
        m_last = now;
    }

  private:
    std::map<std::string, double>* m_sink;
    std::chrono::steady_clock::time_point m_last = std::chrono::steady_clock::now();
};

}  // namespace

std::vector<RetrievalHit> Pipeline::retrieve(std::string_view question, std::size_t n) const
{
    if (blank(question)) {
        throw InvalidArgument("question must not be empty");
    }
    if (n == 0) {
        throw InvalidArgument("n must be at least 1");
    }
    const auto& idx = require_index();
    if (m_cfg.retrieval.mode == RetrievalMethod::dense) {
        if (!idx.embeddings) {
            throw InvalidArgument("dense retrieval needs an index built with embeddings");
        }
        auto q = m_providers.embedder->embed_one(std::string(question));
        return dense_search(*idx.embeddings, q, n);
    }
    return m_cfg.retrieval.scorer == SparseScorer::tfidf ? tfidf_search(idx.index, question, n)
                                                         : bm25_search(idx.index, question, n);
}

MarginalizationResult Pipeline::cgap(std::string_view question, std::optional<std::size_t> k) const
{
    if (blank(question)) {
        throw InvalidArgument("question must not be empty");
    }
    CgapConfig cfg;
    cfg.k = k.value_or(m_cfg.cgap.k);
    cfg.m = m_cfg.cgap.m;
    cfg.top_p = m_cfg.cgap.top_p;
    cfg.seed = m_cfg.seed;
    if (cfg.k == 0) {
        throw InvalidArgument("k must be at least 1");
    }
    return run_cgap(question, m_repository, *m_providers.lm, *m_providers.embedder, cfg);
}

QueryResponse Pipeline::answer_question(std::string_view question, const QueryOptions& opts) const
{
    if (blank(question)) {
        throw InvalidArgument("question must not be empty");
    }
    QueryResponse resp;
    resp.question = std::string(question);
    resp.mode = opts.mode.value_or(m_cfg.generation.mode);
    resp.retrieval = m_cfg.retrieval.mode;
    StageTimer timer(opts.timing ? &resp.timing : nullptr);

    if (resp.mode == GenerationMode::cgap) {
        resp.cgap = cgap(question, opts.cgap_k);
        timer.mark("cgap");
        const auto& final_answer = resp.cgap->final_answer;
        resp.answer.text = final_answer;
        resp.answer.word_count = count_words(final_answer);
        return resp;
    }

    const auto& idx = require_index();
    auto hits = retrieve(question, m_cfg.retrieval.n);
    timer.mark("retrieve");
    if (hits.empty()) {
        resp.status = "no_results";
        return resp;
    }

    std::vector<RerankCandidate> candidates;
    std::map<std::uint32_t, FusedAnswer> fused;
    candidates.reserve(hits.size());
    for (const auto& hit : hits) {
        const auto& passage = idx.table.at(hit.ref);
        if (passage.tokens.empty()) {
            candidates.push_back({hit.ref, 0.0});
            continue;
        }
        auto a = read(*m_providers.mrc, question, passage);
        std::vector<EvidenceSpan> spans_a{{hit.ref, a.best.start, a.best.end, SpanSource::a}};
        std::vector<EvidenceSpan> spans_b;
        double s_conf = a.span_score;
        if (m_providers.mrc2) {
            auto b = read(*m_providers.mrc2, question, passage);
            spans_b.push_back({hit.ref, b.best.start, b.best.end, SpanSource::b});
            s_conf = ensemble_confidence(a.span_score, b.span_score);
        }
        fused[hit.ref.value] = fuse_answers(spans_a, spans_b, passage);
        candidates.push_back({hit.ref, s_conf});
    }
    timer.mark("read");

    auto ranked = rerank(candidates, idx.table, question, m_cfg.rerank);
    for (const auto& s : ranked) {
        if (s.rerank_score != rerank_score(s.s_match, s.s_conf, m_cfg.rerank.alpha)) {
            throw Error("rerank score does not recompute from its components");
        }
    }
    timer.mark("rerank");

    std::map<std::uint32_t, double> retrieval_scores;
    for (const auto& hit : hits) {
        retrieval_scores.emplace(hit.ref.value, hit.score);
    }
    for (const auto& s : ranked) {
        resp.passages.push_back({s, retrieval_scores.at(s.ref.value), fused[s.ref.value].spans});
    }

    const auto k = std::min(m_cfg.generation.k_passages, ranked.size());
    std::vector<ScoredPassage> top(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k));
    std::vector<FusedAnswer> top_spans;
    for (const auto& s : top) {
        top_spans.push_back(fused[s.ref.value]);
    }

    if (resp.mode == GenerationMode::abstractive) {
        auto inputs = assemble_abstractive_input(top, top_spans, idx.table, question,
                                                 m_cfg.generation.input_template);
        GenerationOptions gen;
        gen.budget_words = m_cfg.generation.budget;
        gen.max_tokens = m_cfg.generation.max_tokens;
        gen.seed = m_cfg.seed;
        resp.answer = generate_long_answer(*m_providers.lm, inputs, gen);
    } else {
        auto cands = extractive_candidates(top_spans, idx.table);
        resp.answer = rank_extractive(question, cands, *m_providers.embedder,
                                      m_cfg.generation.extractive_top_k);
    }
    timer.mark("generate");
    return resp;
}

SupportRepository load_repository(const PipelineConfig& cfg, EmbeddingProvider& embedder)
{
    if (cfg.cgap.repository.empty()) {
        return {};
    }
    std::ifstream in(cfg.cgap.repository);
    if (!in) {
        throw IoError("cannot open support repository " + cfg.cgap.repository);
    }
    return SupportRepository(read_support_jsonl(in), embedder);
}

nlohmann::json to_json(const MarginalizationResult& r)
{
    nlohmann::json tallies = nlohmann::json::array();
    for (const auto& t : r.tallies) {
        tallies.push_back({{"answer", t.surface},
                           {"normalized", t.normalized},
                           {"count", t.count},
                           {"first_index", t.first_index}});
    }
    return {{"contexts", r.contexts},
            {"answers", r.raw_answers},
            {"tallies", tallies},
            {"final", r.final_answer}};
}

namespace {

nlohmann::json answer_json(const LongAnswer& a, const PassageTable* table)
{
    nlohmann::json segments = nlohmann::json::array();
    for (const auto& s : a.segments) {
        nlohmann::json seg{{"text", s.text}, {"word_count", s.word_count}};
        seg["passage"] = table != nullptr ? nlohmann::json(table->at(s.ref).key()) : nullptr;
        segments.push_back(std::move(seg));
    }
    nlohmann::json j{{"text", a.text}, {"word_count", a.word_count}, {"segments", segments}};
    if (a.error) {
        j["error"] = *a.error;
    }
    return j;
}

}  // namespace

nlohmann::json to_json(const QueryResponse& r, const PassageTable* table)
{
    nlohmann::json passages = nlohmann::json::array();
    for (std::size_t rank = 0; rank < r.passages.size(); ++rank) {
        const auto& rp = r.passages[rank];
        const auto& p = table->at(rp.scored.ref);
        nlohmann::json highlights = nlohmann::json::array();
        for (const auto& h : rp.highlights) {
            auto [begin, end] = char_range(h, p);
            highlights.push_back({{"start", begin}, {"end", end}, {"source", to_string(h.source)}});
        }
        passages.push_back({{"rank", rank + 1},
                            {"id", p.key()},
                            {"doc_id", p.doc_id},
                            {"title", p.title},
                            {"text", p.text},
                            {"retrieval_score", rp.retrieval_score},
                            {"scores",
                             {{"s_freq", rp.scored.s_freq},
                              {"s_num", rp.scored.s_num},
                              {"s_match", rp.scored.s_match},
                              {"s_conf", rp.scored.s_conf},
                              {"rerank_score", rp.scored.rerank_score}}},
                            {"highlights", highlights}});
    }
    nlohmann::json j{{"question", r.question},
                     {"mode", to_string(r.mode)},
                     {"status", r.status},
                     {"passages", passages},
                     {"answer", answer_json(r.answer, table)}};
    if (r.mode != GenerationMode::cgap) {
        j["retrieval"] = to_string(r.retrieval);
    }
    if (r.cgap) {
        j["cgap"] = to_json(*r.cgap);
    }
    if (!r.timing.empty()) {
        j["timing_ms"] = r.timing;
    }
    return j;
}

nlohmann::json hits_to_json(std::string_view question, const std::vector<RetrievalHit>& hits,
                            const PassageTable& table)
{
    nlohmann::json out = nlohmann::json::array();
    for (const auto& h : hits) {
        const auto& p = table.at(h.ref);
        out.push_back({{"id", p.key()},
                       {"doc_id", p.doc_id},
                       {"title", p.title},
                       {"text", p.text},
                       {"score", h.score},
                       {"method", to_string(h.method)}});
    }
    return {{"question", question}, {"hits", out}};
}

std::string render_json(const nlohmann::json& j)
{
    return j.dump(2) + "\n";
}

}  // namespace lfqa
