#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lfqa/errors.hpp"

namespace lfqa {

class EmbeddingProvider;
class LmProvider;

struct SupportExample {
    std::string context;
    std::string question;
    std::string answer;
    friend bool operator==(const SupportExample&, const SupportExample&) = default;
};

/// Text embedded for each repository entry: question and context joined by a space.
std::string support_key(const SupportExample& example);

/// Few-shot pool with one embedding per example.
class SupportRepository {
  public:
    SupportRepository() = default;
    /// Embeds every example with `embedder`.
    SupportRepository(std::vector<SupportExample> examples, EmbeddingProvider& embedder);
    SupportRepository(std::vector<SupportExample> examples,
                      std::vector<std::vector<double>> embeddings);

    std::size_t size() const noexcept { return m_examples.size(); }
    bool empty() const noexcept { return m_examples.empty(); }
    std::size_t dim() const noexcept { return m_dim; }
    const SupportExample& example(std::size_t i) const { return m_examples.at(i); }
    std::span<const double> embedding(std::size_t i) const { return m_embeddings.at(i); }

  private:
    std::vector<SupportExample> m_examples;
    std::vector<std::vector<double>> m_embeddings;
    std::size_t m_dim = 0;
};

/// JSONL {"context", "question", "answer"}, one example per line.
std::vector<SupportExample> read_support_jsonl(std::istream& in);

/// Top-m examples by dot product with the question embedding, best first,
/// ties by ascending index.
std::vector<std::size_t> select_samples(const SupportRepository& repo,
                                        std::span<const double> question_embedding, std::size_t m);

/// Samples arrive most similar first and are written in reverse, so the most
/// similar one sits next to the question.
std::string build_context_prompt(std::span<const SupportExample> samples, std::string_view question);
std::string build_answer_prompt(std::span<const SupportExample> samples,
                                std::string_view generated_context, std::string_view question);

struct ParsedContextPrompt {
    std::vector<SupportExample> samples;  // most similar first; answer left empty
    std::string question;
};

struct ParsedAnswerPrompt {
    std::vector<SupportExample> samples;  // most similar first
    std::string generated_context;
    std::string question;
};

/// Inverse of the builders for texts free of the line markers.
ParsedContextPrompt parse_context_prompt(std::string_view prompt);
ParsedAnswerPrompt parse_answer_prompt(std::string_view prompt);

inline constexpr std::string_view k_context_stop = "\nQ:";

struct SamplingOptions {
    double top_p = 0.9;
    double temperature = 1.0;
    int max_tokens = 256;
    std::uint64_t seed = 0;  // completion i uses seed + i
};

/// Raised when context generation fails part way; `partial` holds the
/// completions obtained before the failure.
class ContextGenerationError : public Error {
  public:
    ContextGenerationError(const std::string& what, std::vector<std::string> partial)
        : Error(what), m_partial(std::move(partial))
    {}
    const std::vector<std::string>& partial() const noexcept { return m_partial; }

  private:
    std::vector<std::string> m_partial;
};

/// k sampled completions of the same prompt with distinct seeds. Uses one
/// batch call when the provider supports batching.
std::vector<std::string> generate_contexts(LmProvider& lm, const std::string& prompt, std::size_t k,
                                           const SamplingOptions& opts = {});

/// Greedy completion cut at the first newline and trimmed.
std::string predict_answer(LmProvider& lm, const std::string& prompt, int max_tokens = 32);

struct Tally {
    std::string normalized;
    std::string surface;      // earliest answer with this normalized form
    std::size_t count = 0;
    std::size_t first_index = 0;
};

struct MarginalizationResult {
    std::vector<std::string> contexts;
    std::vector<std::string> raw_answers;
    std::vector<Tally> tallies;  // first-occurrence order
    std::string final_answer;
};

/// Tallies answers under EM normalization; the largest tally wins and ties
/// go to the tally that appeared first. Contexts are left empty.
MarginalizationResult majority_vote(std::span<const std::string> answers);

struct CgapConfig {
    std::size_t k = 8;
    std::size_t m = 10;
    double top_p = 0.9;
    int context_max_tokens = 256;
    int answer_max_tokens = 32;
    std::uint64_t seed = 0;
};

/// Context generation followed by answer prediction over the same selected
/// samples, marginalized by majority vote. m is clamped to the repository
/// size, so an empty repository runs zero-shot.
MarginalizationResult run_cgap(std::string_view question, const SupportRepository& repo,
                               LmProvider& lm, EmbeddingProvider& embedder, const CgapConfig& cfg);

}  // namespace lfqa
