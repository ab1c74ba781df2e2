#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lfqa {

/// Mirrors the completion wire format: {"prompt", "max_tokens", "temperature",
/// "top_p", "stop", "seed"}.
struct CompletionRequest {
    std::string prompt;
    int max_tokens = 256;
    double temperature = 0.0;
    double top_p = 1.0;
    std::vector<std::string> stop;
    std::uint64_t seed = 0;
};

/// Text completion backend. Implementations must be safe for concurrent calls.
class LmProvider {
  public:
    virtual ~LmProvider() = default;

    virtual std::string complete(const CompletionRequest& request) = 0;

    /// One provider invocation for many requests when the backend supports it;
    /// the default issues one `complete` per request.
    virtual std::vector<std::string> complete_batch(std::span<const CompletionRequest> requests);
    virtual bool supports_batching() const { return false; }

    virtual std::string name() const = 0;
};

/// Cuts `text` at the earliest occurrence of any stop sequence.
std::string apply_stop(std::string text, std::span<const std::string> stop);

/// Offline extractive stand-in for a generator. It locates the question in the
/// prompt (a leading "question:" field, the last "Q:" line, or else the final
/// sentence), then echoes the prompt sentences sharing keywords with it, best
/// first, until max_tokens words are emitted. Without any overlap it echoes
/// the first sentence. With temperature > 0 the seed rotates the first pick
/// among the top three candidates.
class EchoLm final : public LmProvider {
  public:
    std::string complete(const CompletionRequest& request) override;
    std::string name() const override { return "echo"; }
};

}  // namespace lfqa
