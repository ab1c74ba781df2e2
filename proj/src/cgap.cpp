#include "lfqa/cgap.hpp"

#include <algorithm>
#include <istream>
#include <numeric>

#include <json.hpp>

#include "lfqa/embedding.hpp"
#include "lfqa/lm.hpp"
#include "lfqa/metrics.hpp"
#include "lfqa/retrieval.hpp"

namespace lfqa {

std::string support_key(const SupportExample& example)
{
    return example.question + " " + example.context;
}

SupportRepository::SupportRepository(std::vector<SupportExample> examples,
                                     EmbeddingProvider& embedder)
    : m_examples(std::move(examples)), m_dim(embedder.dim())
{
    std::vector<std::string> keys;
    keys.reserve(m_examples.size());
    for (const auto& e : m_examples) {
        keys.push_back(support_key(e));
    }
    if (!keys.empty()) {
        m_embeddings = embedder.embed(keys);
    }
    if (m_embeddings.size() != m_examples.size()) {
        throw ProtocolError("embedder returned the wrong number of vectors");
    }
    for (const auto& v : m_embeddings) {
        if (v.size() != m_dim) {
            throw DimensionError("support embedding has the wrong dimension");
        }
    }
}

SupportRepository::SupportRepository(std::vector<SupportExample> examples,
                                     std::vector<std::vector<double>> embeddings)
    : m_examples(std::move(examples)), m_embeddings(std::move(embeddings))
{
    if (m_embeddings.size() != m_examples.size()) {
        throw DimensionError("one embedding per support example expected");
    }
    if (!m_embeddings.empty()) {
        m_dim = m_embeddings.front().size();
    }
    for (const auto& v : m_embeddings) {
        if (v.size() != m_dim) {
            throw DimensionError("support embeddings differ in dimension");
        }
    }
}

std::vector<SupportExample> read_support_jsonl(std::istream& in)
{
    std::vector<SupportExample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
        }
        if (!obj.is_object()) {
            throw ParseError(line_no, "expected a JSON object");
        }
        SupportExample ex;
        for (auto [name, field] : {std::pair{"context", &ex.context},
                                   std::pair{"question", &ex.question},
                                   std::pair{"answer", &ex.answer}}) {
            if (!obj.contains(name) || !obj[name].is_string()) {
                throw ParseError(line_no, std::string("missing string field \"") + name + "\"");
            }
            *field = obj[name].get<std::string>();
        }
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<std::size_t> select_samples(const SupportRepository& repo,
                                        std::span<const double> question_embedding, std::size_t m)
{
    if (m > repo.size()) {
        throw InvalidArgument("m = " + std::to_string(m) + " exceeds repository size "
                              + std::to_string(repo.size()));
    }
    if (!repo.empty() && question_embedding.size() != repo.dim()) {
        throw DimensionError("question embedding has dimension "
                             + std::to_string(question_embedding.size()) + ", repository has "
                             + std::to_string(repo.dim()));
    }
    std::vector<double> score(repo.size());
    for (std::size_t i = 0; i < repo.size(); ++i) {
        score[i] = dot(question_embedding, repo.embedding(i));
    }
    std::vector<std::size_t> order(repo.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    order.resize(m);
    return order;
}

std::string build_context_prompt(std::span<const SupportExample> samples, std::string_view question)
{
    std::string out;
    for (auto it = samples.rbegin(); it != samples.rend(); ++it) {
        out += "Q: " + it->question + "\nA: " + it->context + "\n";
    }
    out += "Q: ";
    out.append(question);
    out += "\n";
    return out;
}

std::string build_answer_prompt(std::span<const SupportExample> samples,
                                std::string_view generated_context, std::string_view question)
{
    std::string out;
    for (auto it = samples.rbegin(); it != samples.rend(); ++it) {
        out += "C: " + it->context + "\nQ: " + it->question + "\nA: " + it->answer + "\n";
    }
    out += "C: ";
    out.append(generated_context);
    out += "\nQ: ";
    out.append(question);
    out += "\n";
    return out;
}

namespace {

std::vector<std::string_view> prompt_lines(std::string_view prompt)
{
    if (prompt.empty() || prompt.back() != '\n') {
        throw InvalidArgument("prompt must end with a newline");
    }
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < prompt.size()) {
        auto nl = prompt.find('\n', pos);
        lines.push_back(prompt.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return lines;
}

std::string field(std::string_view line, std::string_view marker)
{
    if (line.substr(0, marker.size()) != marker) {
        throw InvalidArgument("expected a line starting with \"" + std::string(marker) + "\"");
    }
    return std::string(line.substr(marker.size()));
}

}  // namespace

ParsedContextPrompt parse_context_prompt(std::string_view prompt)
{
    auto lines = prompt_lines(prompt);
    if (lines.size() % 2 != 1) {
        throw InvalidArgument("context prompt has an unexpected number of lines");
    }
    ParsedContextPrompt out;
    for (std::size_t i = 0; i + 1 < lines.size(); i += 2) {
        SupportExample ex;
        ex.question = field(lines[i], "Q: ");
        ex.context = field(lines[i + 1], "A: ");
        out.samples.push_back(std::move(ex));
    }
    std::reverse(out.samples.begin(), out.samples.end());
    out.question = field(lines.back(), "Q: ");
    return out;
}

ParsedAnswerPrompt parse_answer_prompt(std::string_view prompt)
{
    auto lines = prompt_lines(prompt);
    if (lines.size() < 2 || (lines.size() - 2) % 3 != 0) {
        throw InvalidArgument("answer prompt has an unexpected number of lines");
    }
    ParsedAnswerPrompt out;
    for (std::size_t i = 0; i + 2 < lines.size(); i += 3) {
        SupportExample ex;
        ex.context = field(lines[i], "C: ");
        ex.question = field(lines[i + 1], "Q: ");
        ex.answer = field(lines[i + 2], "A: ");
        out.samples.push_back(std::move(ex));
    }
    std::reverse(out.samples.begin(), out.samples.end());
    out.generated_context = field(lines[lines.size() - 2], "C: ");
    out.question = field(lines.back(), "Q: ");
    return out;
}

std::vector<std::string> generate_contexts(LmProvider& lm, const std::string& prompt, std::size_t k,
                                           const SamplingOptions& opts)
{
    if (k == 0) {
        throw InvalidArgument("k must be at least 1");
    }
    std::vector<CompletionRequest> requests(k);
    for (std::size_t i = 0; i < k; ++i) {
        auto& r = requests[i];
        r.prompt = prompt;
        r.max_tokens = opts.max_tokens;
        r.temperature = opts.temperature;
        r.top_p = opts.top_p;
        r.stop = {std::string(k_context_stop)};
        r.seed = opts.seed + i;
    }
    std::vector<std::string> out;
    if (lm.supports_batching()) {
        try {
            out = lm.complete_batch(requests);
        } catch (const Error& e) {
            throw ContextGenerationError(e.what(), {});
        }
        if (out.size() != k) {
            throw ContextGenerationError("batch returned " + std::to_string(out.size())
                                             + " completions for " + std::to_string(k) + " requests",
                                         std::move(out));
        }
    } else {
        out.reserve(k);
        for (const auto& r : requests) {
            try {
                out.push_back(lm.complete(r));
            } catch (const Error& e) {
                throw ContextGenerationError(e.what(), std::move(out));
            }
        }
    }
    for (auto& c : out) {
        c = apply_stop(std::move(c), requests.front().stop);
    }
    return out;
}

namespace {

std::string trim(std::string_view s)
{
    constexpr std::string_view ws = " \t\r\n\f\v";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) {
        return {};
    }
    auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string predict_answer(LmProvider& lm, const std::string& prompt, int max_tokens)
{
    CompletionRequest r;
    r.prompt = prompt;
    r.max_tokens = max_tokens;
    r.temperature = 0.0;
    r.top_p = 1.0;
    r.stop = {"\n"};
    return trim(apply_stop(lm.complete(r), r.stop));
}

MarginalizationResult majority_vote(std::span<const std::string> answers)
{
    if (answers.empty()) {
        throw InvalidArgument("majority_vote needs at least one answer");
    }
    MarginalizationResult result;
    result.raw_answers.assign(answers.begin(), answers.end());
    for (std::size_t i = 0; i < answers.size(); ++i) {
        auto norm = normalize_answer(answers[i]);
        auto it = std::find_if(result.tallies.begin(), result.tallies.end(),
                               [&](const Tally& t) { return t.normalized == norm; });
        if (it == result.tallies.end()) {
            result.tallies.push_back({std::move(norm), answers[i], 1, i});
        } else {
            ++it->count;
        }
    }
    // max_element keeps the first of equal maxima, which is the earliest tally.
    auto best = std::max_element(result.tallies.begin(), result.tallies.end(),
                                 [](const Tally& a, const Tally& b) { return a.count < b.count; });
    result.final_answer = best->surface;
    return result;
}

MarginalizationResult run_cgap(std::string_view question, const SupportRepository& repo,
                               LmProvider& lm, EmbeddingProvider& embedder, const CgapConfig& cfg)
{
    if (cfg.k == 0) {
        throw InvalidArgument("k must be at least 1");
    }
    std::vector<SupportExample> samples;
    if (!repo.empty()) {
        auto q_emb = embedder.embed_one(std::string(question));
        for (auto i : select_samples(repo, q_emb, std::min(cfg.m, repo.size()))) {
            samples.push_back(repo.example(i));
        }
    }

    SamplingOptions sampling;
    sampling.top_p = cfg.top_p;
    sampling.max_tokens = cfg.context_max_tokens;
    sampling.seed = cfg.seed;
    auto contexts = generate_contexts(lm, build_context_prompt(samples, question), cfg.k, sampling);

    std::vector<std::string> answers;
    answers.reserve(contexts.size());
    for (const auto& c : contexts) {
        answers.push_back(
            predict_answer(lm, build_answer_prompt(samples, c, question), cfg.answer_max_tokens));
    }
    auto result = majority_vote(answers);
    result.contexts = std::move(contexts);
    return result;
}

}  // namespace lfqa
