#include "lfqa/lm.hpp"

#include <algorithm>
#include <unordered_set>

#include "lfqa/corpus.hpp"
#include "lfqa/rerank.hpp"

namespace lfqa {

std::vector<std::string> LmProvider::complete_batch(std::span<const CompletionRequest> requests)
{
    std::vector<std::string> out;
    out.reserve(requests.size());
    for (const auto& r : requests) {
        out.push_back(complete(r));
    }
    return out;
}

std::string apply_stop(std::string text, std::span<const std::string> stop)
{
    std::size_t cut = text.size();
    for (const auto& s : stop) {
        if (s.empty()) {
            continue;
        }
        cut = std::min(cut, text.find(s));
    }
    text.resize(cut);
    return text;
}

namespace {

struct PromptParts {
    std::string question;
    std::vector<std::string> body;
};

bool starts_with(std::string_view s, std::string_view prefix)
{
    return s.substr(0, prefix.size()) == prefix;
}

PromptParts split_prompt(std::string_view prompt)
{
    PromptParts parts;
    if (starts_with(prompt, "question: ")) {
        auto rest = prompt.substr(10);
        auto title = rest.find(" title: ");
        auto context = rest.find(" context: ");
        auto q_end = std::min(title, context);
        parts.question = std::string(rest.substr(0, q_end));
        if (context != std::string_view::npos) {
            parts.body.emplace_back(rest.substr(context + 10));
        }
        return parts;
    }

    std::vector<std::string_view> lines;
    for (std::size_t pos = 0; pos <= prompt.size();) {
        auto nl = prompt.find('\n', pos);
        lines.push_back(prompt.substr(pos, nl == std::string_view::npos ? nl : nl - pos));
        if (nl == std::string_view::npos) {
            break;
        }
        pos = nl + 1;
    }
    auto last_q = std::find_if(lines.rbegin(), lines.rend(),
                               [](std::string_view l) { return starts_with(l, "Q: "); });
    if (last_q != lines.rend()) {
        parts.question = std::string(last_q->substr(3));
        for (auto l : lines) {
            if (starts_with(l, "A: ") || starts_with(l, "C: ")) {
                parts.body.emplace_back(l.substr(3));
            }
        }
        return parts;
    }

    auto tokens = tokenize(prompt);
    auto sentences = split_sentences(prompt, tokens);
    if (sentences.empty()) {
        return parts;
    }
    auto slice = [&](const SentenceSpan& s) {
        auto b = tokens[s.token_start].char_start;
        return std::string(prompt.substr(b, tokens[s.token_end - 1].char_end - b));
    };
    parts.question = slice(sentences.back());
    for (std::size_t i = 0; i + 1 < sentences.size(); ++i) {
        parts.body.push_back(slice(sentences[i]));
    }
    return parts;
}

}  // namespace

std::string EchoLm::complete(const CompletionRequest& request)
{
    auto parts = split_prompt(request.prompt);
    auto keywords = extract_keywords(parts.question);
    std::unordered_set<std::string> keyset(keywords.begin(), keywords.end());

    struct Candidate {
        std::string text;
        std::size_t overlap;
        std::size_t words;
    };
    std::vector<Candidate> candidates;
    std::unordered_set<std::string> seen;
    for (const auto& segment : parts.body) {
        auto tokens = tokenize(segment);
        for (const auto& s : split_sentences(segment, tokens)) {
            auto b = tokens[s.token_start].char_start;
            std::string text = segment.substr(b, tokens[s.token_end - 1].char_end - b);
            if (!seen.insert(text).second) {
                continue;
            }
            std::unordered_set<std::string_view> present;
            std::size_t words = 0;
            for (std::size_t t = s.token_start; t < s.token_end; ++t) {
                if (tokens[t].is_word) {
                    ++words;
                    if (keyset.contains(tokens[t].lower)) {
                        present.insert(tokens[t].lower);
                    }
                }
            }
            candidates.push_back({std::move(text), present.size(), words});
        }
    }
    if (candidates.empty()) {
        return {};
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.overlap > b.overlap; });
    auto relevant = std::find_if(candidates.begin(), candidates.end(),
                                 [](const Candidate& c) { return c.overlap == 0; });
    candidates.erase(relevant == candidates.begin() ? candidates.begin() + 1 : relevant,
                     candidates.end());
    if (request.temperature > 0.0) {
        auto pool = std::min<std::size_t>(3, candidates.size());
        std::rotate(candidates.begin(),
                    candidates.begin() + static_cast<std::ptrdiff_t>(request.seed % pool),
                    candidates.begin() + static_cast<std::ptrdiff_t>(pool));
    }
    std::string out;
    std::size_t words = 0;
    const auto budget = static_cast<std::size_t>(std::max(1, request.max_tokens));
    for (const auto& c : candidates) {
        if (!out.empty()) {
            out.push_back(' ');
        }
        out += c.text;
        words += c.words;
        if (words >= budget) {
            break;
        }
    }
    return apply_stop(std::move(out), request.stop);
}

}  // namespace lfqa
