#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lfqa/corpus.hpp"
#include "lfqa/reader.hpp"
#include "lfqa/rerank.hpp"

namespace lfqa {

class EmbeddingProvider;
class LmProvider;

/// Default long-answer budget in words.
inline constexpr std::size_t k_answer_budget_words = 250;

enum class PartRole { title, context, answer_spans, query };
std::string_view to_string(PartRole role) noexcept;

struct GenerationPart {
    PartRole role;
    std::string text;
};

/// One generator input. `rendered` is the parts joined by single spaces.
struct GenerationInput {
    PassageRef ref;
    std::vector<GenerationPart> parts;
    std::string rendered;
};

/// caire: "<passage> <answer-span sentences> <query>".
/// fid: "question: <query> title: <title> context: <passage>".
enum class InputTemplate { caire, fid };
std::string_view to_string(InputTemplate t) noexcept;
InputTemplate parse_input_template(std::string_view name);

/// One input per reranked passage, in rerank order. `spans` is aligned with
/// `passages`; an empty FusedAnswer drops the answer-span part.
std::vector<GenerationInput> assemble_abstractive_input(std::span<const ScoredPassage> passages,
                                                        std::span<const FusedAnswer> spans,
                                                        const PassageTable& table,
                                                        std::string_view query,
                                                        InputTemplate tmpl = InputTemplate::caire);

struct AnswerSegment {
    PassageRef ref;
    std::string text;
    std::size_t word_count = 0;
};

struct LongAnswer {
    std::string text;
    std::vector<AnswerSegment> segments;
    std::size_t word_count = 0;
    /// Set when a provider failed part way; `segments` holds what was produced.
    std::optional<std::string> error;
};

struct GenerationOptions {
    std::size_t budget_words = k_answer_budget_words;
    int max_tokens = 128;
    std::uint64_t seed = 0;
};

/// Generates one segment per input in order and stops as soon as the running
/// word count reaches the budget. No request is issued after that.
LongAnswer generate_long_answer(LmProvider& lm, std::span<const GenerationInput> inputs,
                                const GenerationOptions& opts = {});

struct ExtractiveCandidate {
    PassageRef ref;
    std::size_t sentence_index = 0;
    std::string text;
};

/// Sentences covered by the fused spans, in input order, deduplicated on
/// normalized text.
std::vector<ExtractiveCandidate> extractive_candidates(std::span<const FusedAnswer> answers,
                                                       const PassageTable& table);

/// Keeps the `top_k` candidates with the highest cosine to the query
/// embedding. A zero vector on either side scores 0. Ties keep input order.
LongAnswer rank_extractive(std::string_view query, std::span<const ExtractiveCandidate> candidates,
                           EmbeddingProvider& embedder, std::size_t top_k = 3);

/// "[CLS] <document> [SEP] <query>"
std::string qfs_input_format(std::string_view document, std::string_view query);
std::optional<std::pair<std::string, std::string>> parse_qfs_input(std::string_view input);

/// Replaces round(ratio * n) of the n whitespace-delimited words with
/// "[MASK]". Word choice is uniform without replacement under `seed`;
/// whitespace is preserved byte for byte.
std::string corrupt_for_rar(std::string_view text, double ratio, std::uint64_t seed);

}  // namespace lfqa
