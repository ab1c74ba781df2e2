#include "lfqa/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <iterator>

#include "lfqa/errors.hpp"

namespace lfqa {

std::string_view to_string(SparseScorer s) noexcept
{
    return s == SparseScorer::tfidf ? "tfidf" : "bm25";
}

std::string_view to_string(GenerationMode m) noexcept
{
    switch (m) {
    case GenerationMode::extractive:
        return "extractive";
    case GenerationMode::abstractive:
        return "abstractive";
    case GenerationMode::cgap:
        break;
    }
    return "cgap";
}

RetrievalMethod parse_retrieval_method(std::string_view name)
{
    if (name == "sparse") {
        return RetrievalMethod::sparse;
    }
    if (name == "dense") {
        return RetrievalMethod::dense;
    }
    throw InvalidArgument("unknown retrieval mode \"" + std::string(name) + "\"");
}

SparseScorer parse_sparse_scorer(std::string_view name)
{
    if (name == "bm25") {
        return SparseScorer::bm25;
    }
    if (name == "tfidf") {
        return SparseScorer::tfidf;
    }
    throw InvalidArgument("unknown sparse scorer \"" + std::string(name) + "\"");
}

GenerationMode parse_generation_mode(std::string_view name)
{
    for (auto m : {GenerationMode::extractive, GenerationMode::abstractive, GenerationMode::cgap}) {
        if (name == to_string(m)) {
            return m;
        }
    }
    throw InvalidArgument("unknown generation mode \"" + std::string(name) + "\"");
}

void PipelineConfig::validate() const
{
    auto require = [](bool ok, const char* what) {
        if (!ok) {
            throw InvalidArgument(std::string("config: ") + what);
        }
    };
    require(retrieval.n >= 1, "retrieval.n must be at least 1");
    rerank.validate();
    require(generation.budget >= 1, "generation.budget must be at least 1");
    require(generation.k_passages >= 1, "generation.k_passages must be at least 1");
    require(generation.max_tokens >= 1, "generation.max_tokens must be at least 1");
    require(generation.extractive_top_k >= 1, "generation.extractive_top_k must be at least 1");
    require(cgap.k >= 1, "cgap.k must be at least 1");
    require(cgap.m >= 1, "cgap.m must be at least 1");
    require(cgap.top_p > 0.0 && cgap.top_p <= 1.0, "cgap.top_p must lie in (0, 1]");
    for (const auto* p : {&providers.lm, &providers.embedding, &providers.mrc, &providers.mrc2}) {
        require(std::isfinite(p->timeout_s) && p->timeout_s > 0.0,
                "provider timeout_s must be positive");
    }
}

namespace {

using json = nlohmann::json;

void check_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> keys)
{
    if (!obj.is_object()) {
        throw InvalidArgument("config: " + std::string(where) + " must be an object");
    }
    for (const auto& [key, _] : obj.items()) {
        bool known = false;
        for (auto k : keys) {
            known = known || key == k;
        }
        if (!known) {
            throw InvalidArgument("config: unknown key \"" + std::string(where) + "." + key + "\"");
        }
    }
}

template <class T>
void read_field(const json& obj, const char* key, std::string_view where, T& out)
{
    if (!obj.contains(key)) {
        return;
    }
    const auto& v = obj.at(key);
    bool ok = false;
    if constexpr (std::is_same_v<T, std::string>) {
        ok = v.is_string();
    } else if constexpr (std::is_floating_point_v<T>) {
        ok = v.is_number();
    } else if constexpr (std::is_signed_v<T>) {
        ok = v.is_number_integer();
    } else {
        ok = v.is_number_unsigned();
    }
    if (!ok) {
        throw InvalidArgument("config: " + std::string(where) + "." + key + " has the wrong type");
    }
    out = v.get<T>();
}

void read_endpoint(const json& obj, const char* key, ProviderEndpoint& out)
{
    if (!obj.contains(key)) {
        return;
    }
    std::string where = std::string("providers.") + key;
    check_keys(obj.at(key), where, {"url", "timeout_s"});
    read_field(obj.at(key), "url", where, out.url);
    read_field(obj.at(key), "timeout_s", where, out.timeout_s);
}

json endpoint_json(const ProviderEndpoint& e)
{
    return {{"url", e.url}, {"timeout_s", e.timeout_s}};
}

}  // namespace

PipelineConfig config_from_json(const json& j)
{
    PipelineConfig cfg;
    check_keys(j, "config", {"retrieval", "rerank", "generation", "cgap", "providers", "seed"});
    if (j.contains("retrieval")) {
        const auto& r = j.at("retrieval");
        check_keys(r, "retrieval", {"mode", "n", "scorer"});
        std::string mode(to_string(cfg.retrieval.mode));
        std::string scorer(to_string(cfg.retrieval.scorer));
        read_field(r, "mode", "retrieval", mode);
        read_field(r, "n", "retrieval", cfg.retrieval.n);
        read_field(r, "scorer", "retrieval", scorer);
        cfg.retrieval.mode = parse_retrieval_method(mode);
        cfg.retrieval.scorer = parse_sparse_scorer(scorer);
    }
    if (j.contains("rerank")) {
        const auto& r = j.at("rerank");
        check_keys(r, "rerank", {"lambda1", "lambda2", "l_c", "alpha"});
        read_field(r, "lambda1", "rerank", cfg.rerank.lambda1);
        read_field(r, "lambda2", "rerank", cfg.rerank.lambda2);
        read_field(r, "l_c", "rerank", cfg.rerank.l_c);
        read_field(r, "alpha", "rerank", cfg.rerank.alpha);
    }
    if (j.contains("generation")) {
        const auto& g = j.at("generation");
        check_keys(g, "generation",
                   {"mode", "budget", "k_passages", "template", "max_tokens", "extractive_top_k"});
        std::string mode(to_string(cfg.generation.mode));
        std::string tmpl(to_string(cfg.generation.input_template));
        read_field(g, "mode", "generation", mode);
        read_field(g, "budget", "generation", cfg.generation.budget);
        read_field(g, "k_passages", "generation", cfg.generation.k_passages);
        read_field(g, "template", "generation", tmpl);
        read_field(g, "max_tokens", "generation", cfg.generation.max_tokens);
        read_field(g, "extractive_top_k", "generation", cfg.generation.extractive_top_k);
        cfg.generation.mode = parse_generation_mode(mode);
        cfg.generation.input_template = parse_input_template(tmpl);
    }
    if (j.contains("cgap")) {
        const auto& c = j.at("cgap");
        check_keys(c, "cgap", {"k", "m", "top_p", "repository"});
        read_field(c, "k", "cgap", cfg.cgap.k);
        read_field(c, "m", "cgap", cfg.cgap.m);
        read_field(c, "top_p", "cgap", cfg.cgap.top_p);
        read_field(c, "repository", "cgap", cfg.cgap.repository);
    }
    if (j.contains("providers")) {
        const auto& p = j.at("providers");
        check_keys(p, "providers", {"lm", "embedding", "mrc", "mrc2"});
        read_endpoint(p, "lm", cfg.providers.lm);
        read_endpoint(p, "embedding", cfg.providers.embedding);
        read_endpoint(p, "mrc", cfg.providers.mrc);
        read_endpoint(p, "mrc2", cfg.providers.mrc2);
    }
    read_field(j, "seed", "config", cfg.seed);
    cfg.validate();
    return cfg;
}

json config_to_json(const PipelineConfig& cfg)
{
    return {
        {"retrieval",
         {{"mode", to_string(cfg.retrieval.mode)},
          {"n", cfg.retrieval.n},
          {"scorer", to_string(cfg.retrieval.scorer)}}},
        {"rerank",
         {{"lambda1", cfg.rerank.lambda1},
          {"lambda2", cfg.rerank.lambda2},
          {"l_c", cfg.rerank.l_c},
          {"alpha", cfg.rerank.alpha}}},
        {"generation",
         {{"mode", to_string(cfg.generation.mode)},
          {"budget", cfg.generation.budget},
          {"k_passages", cfg.generation.k_passages},
          {"template", to_string(cfg.generation.input_template)},
          {"max_tokens", cfg.generation.max_tokens},
          {"extractive_top_k", cfg.generation.extractive_top_k}}},
        {"cgap",
         {{"k", cfg.cgap.k},
          {"m", cfg.cgap.m},
          {"top_p", cfg.cgap.top_p},
          {"repository", cfg.cgap.repository}}},
        {"providers",
         {{"lm", endpoint_json(cfg.providers.lm)},
          {"embedding", endpoint_json(cfg.providers.embedding)},
          {"mrc", endpoint_json(cfg.providers.mrc)},
          {"mrc2", endpoint_json(cfg.providers.mrc2)}}},
        {"seed", cfg.seed},
    };
}

PipelineConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config file " + path.string());
    }
    std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
        return PipelineConfig{};
    }
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(0, path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

void apply_env_overrides(PipelineConfig& cfg)
{
    auto set = [](const char* name, ProviderEndpoint& e) {
        if (const char* v = std::getenv(name); v != nullptr && *v != '\0') {
            e.url = v;
        }
    };
    set("LFQA_LM_URL", cfg.providers.lm);
    set("LFQA_EMB_URL", cfg.providers.embedding);
    set("LFQA_MRC_URL", cfg.providers.mrc);
    set("LFQA_MRC2_URL", cfg.providers.mrc2);
}

}  // namespace lfqa
