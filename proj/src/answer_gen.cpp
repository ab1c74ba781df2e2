#include "lfqa/answer_gen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

#include "lfqa/embedding.hpp"
#include "lfqa/errors.hpp"
#include "lfqa/lm.hpp"
#include "lfqa/metrics.hpp"
#include "lfqa/retrieval.hpp"

namespace lfqa {

std::string_view to_string(PartRole role) noexcept
{
    switch (role) {
    case PartRole::title:
        return "title";
    case PartRole::context:
        return "context";
    case PartRole::answer_spans:
        return "answer_spans";
    case PartRole::query:
        break;
    }
    return "query";
}

std::string_view to_string(InputTemplate t) noexcept
{
    return t == InputTemplate::fid ? "fid" : "caire";
}

InputTemplate parse_input_template(std::string_view name)
{
    if (name == "caire") {
        return InputTemplate::caire;
    }
    if (name == "fid") {
        return InputTemplate::fid;
    }
    throw InvalidArgument("unknown input template \"" + std::string(name) + "\"");
}

namespace {

std::string span_sentences(const FusedAnswer& answer, const Passage& passage)
{
    std::string out;
    std::size_t last_sentence = static_cast<std::size_t>(-1);
    for (const auto& span : answer.spans) {
        auto first = passage.sentence_of(span.token_start);
        auto last = passage.sentence_of(span.token_end);
        for (auto s = first; s <= last; ++s) {
            if (last_sentence != static_cast<std::size_t>(-1) && s <= last_sentence) {
                continue;
            }
            if (!out.empty()) {
                out.push_back(' ');
            }
            out.append(passage.sentence_text(s));
            last_sentence = s;
        }
    }
    return out;
}

void render(GenerationInput& input)
{
    for (const auto& part : input.parts) {
        if (!input.rendered.empty()) {
            input.rendered.push_back(' ');
        }
        input.rendered += part.text;
    }
}

}  // namespace

std::vector<GenerationInput> assemble_abstractive_input(std::span<const ScoredPassage> passages,
                                                        std::span<const FusedAnswer> spans,
                                                        const PassageTable& table,
                                                        std::string_view query, InputTemplate tmpl)
{
    if (passages.empty()) {
        throw InvalidArgument("assemble_abstractive_input needs at least one passage");
    }
    if (spans.size() != passages.size()) {
        throw DimensionError("one FusedAnswer per passage expected");
    }
    std::vector<GenerationInput> out;
    out.reserve(passages.size());
    for (std::size_t i = 0; i < passages.size(); ++i) {
        const auto& passage = table.at(passages[i].ref);
        GenerationInput input;
        input.ref = passages[i].ref;
        if (tmpl == InputTemplate::fid) {
            input.parts.push_back({PartRole::query, "question: " + std::string(query)});
            input.parts.push_back({PartRole::title, "title: " + passage.title});
            input.parts.push_back({PartRole::context, "context: " + passage.text});
        } else {
            input.parts.push_back({PartRole::context, passage.text});
            auto evidence = span_sentences(spans[i], passage);
            if (!evidence.empty()) {
                input.parts.push_back({PartRole::answer_spans, std::move(evidence)});
            }
            input.parts.push_back({PartRole::query, std::string(query)});
        }
        render(input);
        out.push_back(std::move(input));
    }
    return out;
}

LongAnswer generate_long_answer(LmProvider& lm, std::span<const GenerationInput> inputs,
                                const GenerationOptions& opts)
{
    LongAnswer answer;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        CompletionRequest req;
        req.prompt = inputs[i].rendered;
        req.max_tokens = opts.max_tokens;
        req.seed = opts.seed + i;
        std::string text;
        try {
            text = lm.complete(req);
        } catch (const Error& e) {
            answer.error = "segment " + std::to_string(i) + ": " + e.what();
            break;
        }
        auto words = count_words(text);
        if (!answer.text.empty()) {
            answer.text.push_back(' ');
        }
        answer.text += text;
        answer.word_count += words;
        answer.segments.push_back({inputs[i].ref, std::move(text), words});
        if (answer.word_count >= opts.budget_words) {
            break;
        }
    }
    return answer;
}

std::vector<ExtractiveCandidate> extractive_candidates(std::span<const FusedAnswer> answers,
                                                       const PassageTable& table)
{
    std::vector<ExtractiveCandidate> out;
    std::unordered_set<std::string> seen;
    for (const auto& answer : answers) {
        for (const auto& span : answer.spans) {
            const auto& passage = table.at(span.passage);
            auto first = passage.sentence_of(span.token_start);
            auto last = passage.sentence_of(span.token_end);
            for (auto s = first; s <= last; ++s) {
                std::string text(passage.sentence_text(s));
                if (!seen.insert(normalize_answer(text)).second) {
                    continue;
                }
                out.push_back({span.passage, s, std::move(text)});
            }
        }
    }
    return out;
}

LongAnswer rank_extractive(std::string_view query, std::span<const ExtractiveCandidate> candidates,
                           EmbeddingProvider& embedder, std::size_t top_k)
{
    LongAnswer answer;
    if (candidates.empty() || top_k == 0) {
        return answer;
    }
    std::vector<std::string> texts;
    texts.reserve(candidates.size() + 1);
    texts.emplace_back(query);
    for (const auto& c : candidates) {
        texts.push_back(c.text);
    }
    auto vectors = embedder.embed(texts);
    if (vectors.size() != texts.size()) {
        throw ProtocolError("embedder returned " + std::to_string(vectors.size())
                            + " vectors for " + std::to_string(texts.size()) + " texts");
    }
    auto norm = [](const std::vector<double>& v) { return std::sqrt(dot(v, v)); };
    const bool query_zero = norm(vectors[0]) == 0.0;

    std::vector<double> sim(candidates.size(), 0.0);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (vectors[i + 1].size() != vectors[0].size()) {
            throw DimensionError("candidate and query embeddings differ in size");
        }
        if (!query_zero && norm(vectors[i + 1]) > 0.0) {
            sim[i] = cosine(vectors[0], vectors[i + 1]);
        }
    }
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });
    order.resize(std::min(top_k, order.size()));

    for (auto i : order) {
        const auto& c = candidates[i];
        auto words = count_words(c.text);
        if (!answer.text.empty()) {
            answer.text.push_back(' ');
        }
        answer.text += c.text;
        answer.word_count += words;
        answer.segments.push_back({c.ref, c.text, words});
    }
    return answer;
}

std::string qfs_input_format(std::string_view document, std::string_view query)
{
    std::string out = "[CLS] ";
    out.append(document);
    out += " [SEP] ";
    out.append(query);
    return out;
}

std::optional<std::pair<std::string, std::string>> parse_qfs_input(std::string_view input)
{
    constexpr std::string_view cls = "[CLS] ";
    constexpr std::string_view sep = " [SEP] ";
    if (input.substr(0, cls.size()) != cls) {
        return std::nullopt;
    }
    // The query is assumed not to contain the separator, so split at the last one.
    auto pos = input.rfind(sep);
    if (pos == std::string_view::npos || pos < cls.size() - 1) {
        return std::nullopt;
    }
    auto doc_begin = cls.size();
    std::string doc = pos >= doc_begin ? std::string(input.substr(doc_begin, pos - doc_begin)) : "";
    return std::pair{std::move(doc), std::string(input.substr(pos + sep.size()))};
}

namespace {

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n)
{
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
        auto r = rng();
        if (r >= threshold) {
            return r % n;
        }
    }
}

}  // namespace

std::string corrupt_for_rar(std::string_view text, double ratio, std::uint64_t seed)
{
    if (!(ratio >= 0.0 && ratio <= 1.0)) {
        throw InvalidArgument("ratio must lie in [0, 1]");
    }
    auto words = split_whitespace(text);
    const auto n = words.size();
    const auto count = std::min<std::size_t>(n, static_cast<std::size_t>(std::lround(ratio * n)));

    std::vector<std::size_t> index(n);
    std::iota(index.begin(), index.end(), 0);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        auto j = i + bounded(rng, n - i);
        std::swap(index[i], index[j]);
    }
    std::vector<bool> masked(n, false);
    for (std::size_t i = 0; i < count; ++i) {
        masked[index[i]] = true;
    }

    std::string out;
    out.reserve(text.size());
    std::size_t cursor = 0;
    for (std::size_t w = 0; w < n; ++w) {
        auto begin = static_cast<std::size_t>(words[w].data() - text.data());
        out.append(text.substr(cursor, begin - cursor));
        out.append(masked[w] ? std::string_view("[MASK]") : words[w]);
        cursor = begin + words[w].size();
    }
    out.append(text.substr(cursor));
    return out;
}

}  // namespace lfqa
