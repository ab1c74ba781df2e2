#include "lfqa/service.hpp"

#include <chrono>

#include <httplib.h>

#include "lfqa/errors.hpp"

namespace lfqa {

namespace {

using json = nlohmann::json;

std::pair<std::string, std::string> split_url(const std::string& url)
{
    auto scheme = url.find("://");
    if (scheme == std::string::npos) {
        throw InvalidArgument("provider url \"" + url + "\" lacks a scheme");
    }
    if (url.compare(0, scheme, "http") != 0) {
        throw InvalidArgument("provider url \"" + url + "\" must use http");
    }
    auto path = url.find('/', scheme + 3);
    if (path == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path), url.substr(path)};
}

void apply_timeouts(httplib::Client& cli, double timeout_s)
{
    auto d = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(timeout_s));
    cli.set_connection_timeout(d);
    cli.set_read_timeout(d);
    cli.set_write_timeout(d);
}

std::vector<double> number_array(const json& j, const char* field)
{
    if (!j.contains(field) || !j[field].is_array()) {
        throw ProtocolError(std::string("response lacks array \"") + field + "\"");
    }
    std::vector<double> out;
    out.reserve(j[field].size());
    for (const auto& v : j[field]) {
        if (!v.is_number()) {
            throw ProtocolError(std::string("\"") + field + "\" must hold numbers");
        }
        out.push_back(v.get<double>());
    }
    return out;
}

}  // namespace

JsonClient::JsonClient(std::string url, double timeout_s) : m_url(std::move(url)), m_timeout_s(timeout_s)
{
    std::tie(m_base, m_path) = split_url(m_url);
}

json JsonClient::post(const json& body) const
{
    httplib::Client cli(m_base);
    apply_timeouts(cli, m_timeout_s);
    const auto payload = body.dump();
    auto res = cli.Post(m_path, payload, "application/json");
    if (!res) {
        res = cli.Post(m_path, payload, "application/json");
    }
    if (!res) {
        throw TransportError(m_url + ": " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw ProtocolError(m_url + ": HTTP " + std::to_string(res->status));
    }
    try {
        return json::parse(res->body);
    } catch (const json::parse_error& e) {
        throw ProtocolError(m_url + ": malformed JSON reply: " + e.what());
    }
}

std::string HttpLm::complete(const CompletionRequest& request)
{
    json body{{"prompt", request.prompt},
              {"max_tokens", request.max_tokens},
              {"temperature", request.temperature},
              {"top_p", request.top_p},
              {"stop", request.stop},
              {"seed", request.seed}};
    auto reply = m_client.post(body);
    if (!reply.is_object() || !reply.contains("text") || !reply["text"].is_string()) {
        throw ProtocolError(m_client.url() + ": reply lacks string \"text\"");
    }
    return apply_stop(reply["text"].get<std::string>(), request.stop);
}

std::vector<std::vector<double>> HttpEmbedder::embed(std::span<const std::string> texts)
{
    auto reply = m_client.post(json{{"texts", std::vector<std::string>(texts.begin(), texts.end())}});
    if (!reply.is_object() || !reply.contains("dim") || !reply["dim"].is_number_unsigned()
        || !reply.contains("vectors") || !reply["vectors"].is_array()) {
        throw ProtocolError(m_client.url() + ": reply must carry \"dim\" and \"vectors\"");
    }
    const auto dim = reply["dim"].get<std::size_t>();
    if (dim == 0 || reply["vectors"].size() != texts.size()) {
        throw ProtocolError(m_client.url() + ": wrong number of vectors or zero dim");
    }
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& v : reply["vectors"]) {
        json wrapper{{"v", v}};
        auto vec = number_array(wrapper, "v");
        if (vec.size() != dim) {
            throw ProtocolError(m_client.url() + ": vector length differs from dim");
        }
        out.push_back(std::move(vec));
    }
    std::lock_guard lock(m_mutex);
    if (m_dim != 0 && m_dim != dim) {
        throw ProtocolError(m_client.url() + ": dim changed between calls");
    }
    m_dim = dim;
    return out;
}

std::size_t HttpEmbedder::dim() const
{
    {
        std::lock_guard lock(m_mutex);
        if (m_dim != 0) {
            return m_dim;
        }
    }
    std::string probe = "dimension probe";
    const_cast<HttpEmbedder*>(this)->embed(std::span(&probe, 1));
    std::lock_guard lock(m_mutex);
    return m_dim;
}

MrcOutput HttpMrc::predict(std::string_view question, const Passage& passage)
{
    json tokens = json::array();
    for (const auto& t : passage.tokens) {
        tokens.push_back({t.char_start, t.char_end});
    }
    auto reply = m_client.post(json{{"question", question}, {"passage", passage.text}, {"tokens", tokens}});
    if (!reply.is_object() || !reply.contains("span_score") || !reply["span_score"].is_number()) {
        throw ProtocolError(m_client.url() + ": reply lacks number \"span_score\"");
    }
    MrcOutput out;
    out.start_probs = number_array(reply, "start_probs");
    out.end_probs = number_array(reply, "end_probs");
    out.span_score = reply["span_score"].get<double>();
    return out;
}

Providers make_providers(const PipelineConfig& cfg, std::size_t embedding_dim)
{
    auto p = builtin_providers(embedding_dim);
    const auto& e = cfg.providers;
    if (!e.lm.url.empty()) {
        p.lm = std::make_unique<HttpLm>(e.lm.url, e.lm.timeout_s);
    }
    if (!e.embedding.url.empty()) {
        p.embedder = std::make_unique<HttpEmbedder>(e.embedding.url, e.embedding.timeout_s);
    }
    if (!e.mrc.url.empty()) {
        p.mrc = std::make_unique<HttpMrc>(e.mrc.url, e.mrc.timeout_s);
    }
    if (!e.mrc2.url.empty()) {
        p.mrc2 = std::make_unique<HttpMrc>(e.mrc2.url, e.mrc2.timeout_s);
    }
    return p;
}

json health_report(const PipelineConfig& cfg)
{
    auto entry = [](const ProviderEndpoint& e, const char* builtin) -> json {
        if (e.url.empty()) {
            return builtin != nullptr ? json{{"kind", "builtin"}, {"name", builtin}, {"reachable", true}}
                                      : json{{"kind", "none"}, {"reachable", true}};
        }
        bool reachable = false;
        try {
            auto [base, path] = split_url(e.url);
            httplib::Client cli(base);
            apply_timeouts(cli, std::min(e.timeout_s, 2.0));
            reachable = static_cast<bool>(cli.Get("/"));
        } catch (const Error&) {
            reachable = false;
        }
        return {{"kind", "http"}, {"url", e.url}, {"reachable", reachable}};
    };
    const auto& p = cfg.providers;
    return {{"status", "ok"},
            {"providers",
             {{"lm", entry(p.lm, "echo")},
              {"embedding", entry(p.embedding, "hash")},
              {"mrc", entry(p.mrc, "heuristic")},
              {"mrc2", entry(p.mrc2, nullptr)}}}};
}

struct Server::Impl {
    httplib::Server http;
};

namespace {

void reply(httplib::Response& res, int status, const json& body)
{
    res.status = status;
    res.set_content(render_json(body), "application/json");
}

/// Parses the body and runs `fn`, mapping library errors to HTTP statuses.
template <class Fn>
void handle(const httplib::Request& req, httplib::Response& res, Fn&& fn)
{
    try {
        json body;
        if (req.method == "POST") {
            try {
                body = json::parse(req.body);
            } catch (const json::parse_error& e) {
                throw InvalidArgument(std::string("request body is not valid JSON: ") + e.what());
            }
            if (!body.is_object()) {
                throw InvalidArgument("request body must be a JSON object");
            }
        }
        reply(res, 200, fn(body));
    } catch (const InvalidArgument& e) {
        reply(res, 400, {{"error", e.what()}});
    } catch (const ParseError& e) {
        reply(res, 400, {{"error", e.what()}});
    } catch (const TransportError& e) {
        reply(res, 502, {{"error", e.what()}});
    } catch (const ProtocolError& e) {
        reply(res, 502, {{"error", e.what()}});
    } catch (const std::exception& e) {
        reply(res, 500, {{"error", e.what()}});
    }
}

std::string question_of(const json& body)
{
    if (!body.contains("question") || !body["question"].is_string()) {
        throw InvalidArgument("\"question\" must be a string");
    }
    return body["question"].get<std::string>();
}

template <class T>
std::optional<T> optional_field(const json& body, const char* key)
{
    if (!body.contains(key) || body[key].is_null()) {
        return std::nullopt;
    }
    try {
        return body[key].get<T>();
    } catch (const json::exception&) {
        throw InvalidArgument(std::string("\"") + key + "\" has the wrong type");
    }
}

std::size_t positive(const json& body, const char* key, std::size_t fallback)
{
    if (!body.contains(key) || body[key].is_null()) {
        return fallback;
    }
    if (!body[key].is_number_integer() || body[key].get<long long>() < 1) {
        throw InvalidArgument(std::string("\"") + key + "\" must be a positive integer");
    }
    return body[key].get<std::size_t>();
}

}  // namespace

Server::Server(const Pipeline& pipeline) : m_impl(std::make_unique<Impl>())
{
    auto& http = m_impl->http;
    const Pipeline& p = pipeline;
    http.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    http.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
    http.Get("/v1/health", [&p](const httplib::Request& req, httplib::Response& res) {
        handle(req, res, [&](const json&) { return health_report(p.config()); });
    });
    http.Post("/v1/query", [&p](const httplib::Request& req, httplib::Response& res) {
        handle(req, res, [&](const json& body) {
            QueryOptions opts;
            if (auto mode = optional_field<std::string>(body, "mode")) {
                opts.mode = parse_generation_mode(*mode);
            }
            opts.timing = optional_field<bool>(body, "timing").value_or(false);
            auto resp = p.answer_question(question_of(body), opts);
            return to_json(resp, p.index() != nullptr ? &p.index()->table : nullptr);
        });
    });
    http.Post("/v1/retrieve", [&p](const httplib::Request& req, httplib::Response& res) {
        handle(req, res, [&](const json& body) {
            auto question = question_of(body);
            auto hits = p.retrieve(question, positive(body, "n", p.config().retrieval.n));
            return hits_to_json(question, hits, p.index()->table);
        });
    });
    http.Post("/v1/cgap", [&p](const httplib::Request& req, httplib::Response& res) {
        handle(req, res, [&](const json& body) {
            auto question = question_of(body);
            auto result = p.cgap(question, positive(body, "k", p.config().cgap.k));
            auto j = to_json(result);
            j["question"] = question;
            return j;
        });
    });
}

Server::~Server()
{
    stop();
}

int Server::bind(const std::string& host, int port)
{
    auto& http = m_impl->http;
    if (port == 0) {
        int bound = http.bind_to_any_port(host);
        if (bound < 0) {
            throw IoError("cannot bind " + host);
        }
        return bound;
    }
    if (!http.bind_to_port(host, port)) {
        throw IoError("cannot bind " + host + ":" + std::to_string(port));
    }
    return port;
}

void Server::listen()
{
    m_impl->http.listen_after_bind();
}

void Server::stop()
{
    if (m_impl->http.is_running()) {
        m_impl->http.stop();
    }
}

void Server::wait_until_ready() const
{
    m_impl->http.wait_until_ready();
}

}  // namespace lfqa
