#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "lfqa/config.hpp"
#include "lfqa/embedding.hpp"
#include "lfqa/lm.hpp"
#include "lfqa/pipeline.hpp"
#include "lfqa/reader.hpp"

namespace lfqa {

/// POSTs one JSON document and parses the JSON reply. Transport failures are
/// retried once; a non-2xx status or a malformed body is a ProtocolError and
/// is not retried.
class JsonClient {
  public:
    JsonClient(std::string url, double timeout_s);
    nlohmann::json post(const nlohmann::json& body) const;
    const std::string& url() const noexcept { return m_url; }

  private:
    std::string m_url;
    std::string m_base;
    std::string m_path;
    double m_timeout_s;
};

/// {"prompt", "max_tokens", "temperature", "top_p", "stop", "seed"} -> {"text"}
class HttpLm final : public LmProvider {
  public:
    HttpLm(std::string url, double timeout_s) : m_client(std::move(url), timeout_s) {}
    std::string complete(const CompletionRequest& request) override;
    std::string name() const override { return "http:" + m_client.url(); }

  private:
    JsonClient m_client;
};

/// {"texts"} -> {"dim", "vectors"}. The dimension is learned from the first reply.
class HttpEmbedder final : public EmbeddingProvider {
  public:
    HttpEmbedder(std::string url, double timeout_s) : m_client(std::move(url), timeout_s) {}
    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;
    std::size_t dim() const override;
    std::string name() const override { return "http:" + m_client.url(); }

  private:
    JsonClient m_client;
    mutable std::mutex m_mutex;
    mutable std::size_t m_dim = 0;
};

/// {"question", "passage", "tokens": [[start, end], ...]} ->
/// {"start_probs", "end_probs", "span_score"}
class HttpMrc final : public MrcProvider {
  public:
    HttpMrc(std::string url, double timeout_s) : m_client(std::move(url), timeout_s) {}
    MrcOutput predict(std::string_view question, const Passage& passage) override;
    std::string name() const override { return "http:" + m_client.url(); }

  private:
    JsonClient m_client;
};

/// HTTP clients for configured endpoints, built-ins for the rest. `mrc2`
/// stays null unless its url is set.
Providers make_providers(const PipelineConfig& cfg, std::size_t embedding_dim = 256);

/// {"status": "ok", "providers": {name: {"kind", "url"?, "reachable"}}}
nlohmann::json health_report(const PipelineConfig& cfg);

/// /v1 HTTP API over a pipeline.
class Server {
  public:
    explicit Server(const Pipeline& pipeline);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds the socket; port 0 picks a free port. Returns the bound port and
    /// throws IoError when binding fails.
    int bind(const std::string& host, int port);
    /// Serves until stop() is called.
    void listen();
    void stop();
    /// Blocks until the server accepts connections.
    void wait_until_ready() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> m_impl;
};

}  // namespace lfqa
