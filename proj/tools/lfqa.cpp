#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <thread>

#include <CLI11.hpp>

#include "lfqa/config.hpp"
#include "lfqa/errors.hpp"
#include "lfqa/index_io.hpp"
#include "lfqa/metrics.hpp"
#include "lfqa/pipeline.hpp"
#include "lfqa/service.hpp"

namespace {

using namespace lfqa;

constexpr int k_exit_runtime = 1;
constexpr int k_exit_input = 2;

PipelineConfig resolve_config(const std::string& path, std::optional<std::uint64_t> seed)
{
    PipelineConfig cfg = path.empty() ? PipelineConfig{} : load_config(path);
    apply_env_overrides(cfg);
    if (seed) {
        cfg.seed = *seed;
    }
    return cfg;
}

void warn_lm_fallback(const PipelineConfig& cfg)
{
    if (cfg.providers.lm.url.empty()) {
        std::cerr << "warning: no LM endpoint configured; using the built-in echo model\n";
    }
}

std::unique_ptr<Pipeline> make_pipeline(const std::string& index_dir, const PipelineConfig& cfg,
                                        bool need_repository)
{
    std::shared_ptr<const LoadedIndex> index;
    std::size_t dim = 256;
    if (!index_dir.empty()) {
        index = std::make_shared<const LoadedIndex>(load_index(index_dir));
        if (index->embeddings) {
            dim = index->embeddings->dim();
        }
    }
    auto providers = make_providers(cfg, dim);
    SupportRepository repo;
    if (need_repository) {
        repo = load_repository(cfg, *providers.embedder);
    }
    return std::make_unique<Pipeline>(std::move(index), cfg, std::move(providers), std::move(repo));
}

void print_human(const QueryResponse& r, const PassageTable* table)
{
    std::cout << "question: " << r.question << "\n";
    if (r.status != "ok") {
        std::cout << "no passages matched the question\n";
        return;
    }
    if (r.cgap) {
        for (std::size_t i = 0; i < r.cgap->contexts.size(); ++i) {
            std::cout << "context " << i + 1 << ": " << r.cgap->contexts[i] << "\n"
                      << "  answer: " << r.cgap->raw_answers[i] << "\n";
        }
        std::cout << "votes:";
        for (const auto& t : r.cgap->tallies) {
            std::cout << " [" << t.surface << " x" << t.count << "]";
        }
        std::cout << "\nfinal: " << r.cgap->final_answer << "\n";
        return;
    }
    std::cout << "\nanswer (" << r.answer.word_count << " words):\n" << r.answer.text << "\n";
    if (r.answer.error) {
        std::cout << "generation stopped early: " << *r.answer.error << "\n";
    }
    std::cout << "\n";
    for (std::size_t rank = 0; rank < r.passages.size(); ++rank) {
        const auto& rp = r.passages[rank];
        const auto& p = table->at(rp.scored.ref);
        std::string text = p.text;
        // Insert markers from the back so earlier offsets stay valid.
        for (auto it = rp.highlights.rbegin(); it != rp.highlights.rend(); ++it) {
            auto [b, e] = char_range(*it, p);
            text.insert(e, "]]");
            text.insert(b, "[[");
        }
        std::printf("%zu. %s  rerank=%.4f s_match=%.4f s_conf=%.4f\n", rank + 1, p.key().c_str(),
                    rp.scored.rerank_score, rp.scored.s_match, rp.scored.s_conf);
        std::cout << "   " << p.title << "\n   " << text << "\n";
    }
}

int run_index(const std::string& corpus_path, const std::string& out_dir, std::size_t max_words,
              bool embeddings)
{
    auto corpus = ingest_jsonl(corpus_path);
    auto providers = make_providers(resolve_config("", std::nullopt));
    auto meta = write_index(out_dir, corpus, max_words, embeddings ? providers.embedder.get() : nullptr);
    std::cout << "indexed " << meta.documents << " documents into " << meta.passages
              << " passages (" << meta.terms << " terms, " << meta.oversized
              << " oversized) at " << out_dir << "\n";
    return 0;
}

std::vector<EvalRecord> read_predictions(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    return read_eval_jsonl(in);
}

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int)
{
    g_stop = 1;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Long-form question answering engine"};
    app.require_subcommand(1);

    std::string corpus, out, index_dir, question, mode, config_path, pred, metrics = "em,f1,rougeL";
    std::string host = "127.0.0.1";
    std::size_t max_words = 400;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> k, m;
    std::string repo;
    bool as_json = false, timing = false, no_embeddings = false;
    int port = 8080;

    auto* index_cmd = app.add_subcommand("index", "Build an index from a JSONL corpus");
    index_cmd->add_option("--corpus", corpus, "JSONL corpus with id, title and text")->required();
    index_cmd->add_option("--out", out, "Output directory")->required();
    index_cmd->add_option("--max-words", max_words, "Passage word limit")->check(CLI::PositiveNumber);
    index_cmd->add_flag("--no-embeddings", no_embeddings, "Skip the dense embedding store");

    auto* query_cmd = app.add_subcommand("query", "Answer a question over an index");
    query_cmd->add_option("--index", index_dir, "Index directory")->required();
    query_cmd->add_option("--question", question, "Question text")->required();
    query_cmd->add_option("--mode", mode, "extractive, abstractive or cgap")
        ->check(CLI::IsMember({"extractive", "abstractive", "cgap"}));
    query_cmd->add_option("--config", config_path, "Pipeline config JSON");
    query_cmd->add_option("--seed", seed, "Seed for every sampling step");
    query_cmd->add_flag("--json", as_json, "Print the response as JSON");
    query_cmd->add_flag("--timing", timing, "Include per-stage timings");

    auto* cgap_cmd = app.add_subcommand("cgap", "Closed-book answer by context generation and voting");
    cgap_cmd->add_option("--question", question, "Question text")->required();
    cgap_cmd->add_option("--k", k, "Number of generated contexts")->check(CLI::PositiveNumber);
    cgap_cmd->add_option("--m", m, "Number of support samples")->check(CLI::PositiveNumber);
    cgap_cmd->add_option("--repo", repo, "Support repository JSONL");
    cgap_cmd->add_option("--config", config_path, "Pipeline config JSON");
    cgap_cmd->add_option("--seed", seed, "Seed for context sampling");
    cgap_cmd->add_flag("--json", as_json, "Print the result as JSON");

    auto* eval_cmd = app.add_subcommand("eval", "Score predictions against gold answers");
    eval_cmd->add_option("--pred", pred, "JSONL with question, prediction and golds")->required();
    eval_cmd->add_option("--metric", metrics, "Comma-separated: em,f1,rougeL,faithfulness");

    auto* serve_cmd = app.add_subcommand("serve", "Serve the /v1 HTTP API");
    serve_cmd->add_option("--index", index_dir, "Index directory");
    serve_cmd->add_option("--config", config_path, "Pipeline config JSON");
    serve_cmd->add_option("--host", host, "Bind address");
    serve_cmd->add_option("--port", port, "Port, 0 for any free port");
    serve_cmd->add_option("--seed", seed, "Seed for every sampling step");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : k_exit_input;
    }

    try {
        if (*index_cmd) {
            return run_index(corpus, out, max_words, !no_embeddings);
        }
        if (*query_cmd) {
            auto cfg = resolve_config(config_path, seed);
            QueryOptions opts;
            if (!mode.empty()) {
                opts.mode = parse_generation_mode(mode);
            }
            opts.timing = timing;
            auto effective = opts.mode.value_or(cfg.generation.mode);
            if (effective != GenerationMode::extractive) {
                warn_lm_fallback(cfg);
            }
            auto pipeline = make_pipeline(index_dir, cfg, effective == GenerationMode::cgap);
            auto resp = pipeline->answer_question(question, opts);
            const auto* table = &pipeline->index()->table;
            if (as_json) {
                std::cout << render_json(to_json(resp, table));
            } else {
                print_human(resp, table);
            }
            return 0;
        }
        if (*cgap_cmd) {
            auto cfg = resolve_config(config_path, seed);
            if (k) {
                cfg.cgap.k = *k;
            }
            if (m) {
                cfg.cgap.m = *m;
            }
            if (!repo.empty()) {
                cfg.cgap.repository = repo;
            }
            warn_lm_fallback(cfg);
            auto pipeline = make_pipeline("", cfg, true);
            auto result = pipeline->cgap(question);
            if (as_json) {
                auto j = to_json(result);
                j["question"] = question;
                std::cout << render_json(j);
            } else {
                QueryResponse r;
                r.question = question;
                r.cgap = std::move(result);
                print_human(r, nullptr);
            }
            return 0;
        }
        if (*eval_cmd) {
            auto list = parse_metrics(metrics);
            auto records = read_predictions(pred);
            auto report = evaluate(records, list);
            nlohmann::json j{{"count", report.count}, {"metrics", nlohmann::json::object()}};
            for (const auto& [name, series] : report.metrics) {
                j["metrics"][name] = {{"mean", series.mean}, {"per_example", series.per_example}};
            }
            std::cout << render_json(j);
            return 0;
        }
        if (*serve_cmd) {
            auto cfg = resolve_config(config_path, seed);
            auto pipeline = make_pipeline(index_dir, cfg, true);
            Server server(*pipeline);
            int bound = server.bind(host, port);
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::thread watcher([&] {
                while (!g_stop) {
                    std::this_thread::sleep_for(std::chrono::milliseconds(100));
                }
                server.stop();
            });
            std::cerr << "listening on http://" << host << ":" << bound << "\n";
            server.listen();
            g_stop = 1;
            watcher.join();
            return 0;
        }
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return k_exit_input;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return k_exit_input;
    } catch (const ConflictError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return k_exit_input;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return k_exit_input;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return k_exit_runtime;
    }
    return k_exit_input;
}
