#include <doctest.h>

#include <random>
#include <sstream>

#include "lfqa/answer_gen.hpp"
#include "lfqa/cgap.hpp"
#include "lfqa/embedding.hpp"
#include "lfqa/errors.hpp"
#include "lfqa/lm.hpp"
#include "support/mocks.hpp"
#include "support/oracles.hpp"

using namespace lfqa;

namespace {

std::vector<GenerationInput> inputs_of(std::size_t n)
{
    std::vector<GenerationInput> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].ref = PassageRef{static_cast<std::uint32_t>(i)};
        out[i].rendered = "input " + std::to_string(i);
    }
    return out;
}

std::vector<SupportExample> support_fixture()
{
    return {{"Paris is the capital of France.", "What is the capital of France?", "Paris"},
            {"Mount Everest is the highest mountain.", "What is the highest mountain?", "Mount Everest"},
            {"Water boils at 100 degrees Celsius.", "At what temperature does water boil?", "100 degrees"},
            {"The Nile flows through Egypt.", "Which river flows through Egypt?", "The Nile"}};
}

const std::vector<std::string> k_lopez_contexts{
    "George Lopez They are American citizens, born in Los Angeles.",
    "George Lopez born April 23, 1961.",
    "Lopez was born on April 23, 1961, in Mission Hills, Los Angeles, California.",
    "George Lopez in San Fernando, California.",
    "Lopez was born at Daniel Freeman Memorial Hospital in Inglewood, California.",
    "George Lopez L\xC3\xB3pez was born in Mission Hills, Los Angeles, California.",
    "George Edward Lopez. Lopez was born in Mission Hills, Los Angeles.",
    "George Lopez had in his mouth.",
};

const std::vector<std::string> k_lopez_answers{"Los Angeles", "canada", "Mission Hills", "San Fernando",
                                               "Los Angeles", " Mission Hills", "Mission Hills",
                                               "Castle Hill"};

}  // namespace

TEST_SUITE("lm")
{
    TEST_CASE("stop sequences")
    {
        std::vector<std::string> stops{"\nQ:", "\n\n"};
        CHECK(apply_stop("context here\nQ: next", stops) == "context here");
        CHECK(apply_stop("a\n\nb\nQ:", stops) == "a");
        CHECK(apply_stop("no stop", stops) == "no stop");
        CHECK(apply_stop("x", {}) == "x");
    }

    TEST_CASE("echo model is deterministic and on topic")
    {
        EchoLm lm;
        CompletionRequest r;
        r.prompt = "Bananas are yellow. Masks reduce virus spread. Cars are fast. Do masks reduce spread?";
        r.max_tokens = 50;
        auto a = lm.complete(r);
        CHECK(a == lm.complete(r));
        CHECK(a.find("Masks reduce virus spread.") == 0);
        CHECK(a.find("Bananas") == std::string::npos);

        r.max_tokens = 2;
        CHECK(count_words(lm.complete(r)) >= 2);

        CompletionRequest fid;
        fid.prompt = "question: Which river? title: Rivers context: Hills are green. The Nile is a river.";
        fid.max_tokens = 40;
        CHECK(lm.complete(fid) == "The Nile is a river.");

        CompletionRequest qa;
        qa.prompt = "C: Lopez was born in Mission Hills.\nQ: Where was Lopez born?\n";
        qa.stop = {"\n"};
        qa.max_tokens = 20;
        CHECK(lm.complete(qa).find("Mission Hills") != std::string::npos);
    }
}

TEST_SUITE("answer_gen")
{
    TEST_CASE("abstractive input assembly")
    {
        PassageTable table({make_passage("d", "Masks", 0, "Masks help. They block droplets. Sky is blue.", false)});
        std::vector<ScoredPassage> ranked{{PassageRef{0}}};
        FusedAnswer fused;
        fused.spans.push_back({PassageRef{0}, 3, 5, SpanSource::merged});
        std::vector<FusedAnswer> spans{fused};

        auto caire = assemble_abstractive_input(ranked, spans, table, "Do masks work?");
        REQUIRE(caire.size() == 1);
        CHECK(caire[0].rendered == "Masks help. They block droplets. Sky is blue. They block droplets. Do masks work?");
        CHECK(caire[0].parts.back().role == PartRole::query);
        CHECK(caire[0].parts.back().text == "Do masks work?");

        std::vector<FusedAnswer> none{FusedAnswer{}};
        auto bare = assemble_abstractive_input(ranked, none, table, "Q?");
        CHECK(bare[0].parts.size() == 2);
        CHECK(bare[0].rendered == "Masks help. They block droplets. Sky is blue. Q?");

        auto fid = assemble_abstractive_input(ranked, spans, table, "Q?", InputTemplate::fid);
        CHECK(fid[0].rendered == "question: Q? title: Masks context: Masks help. They block droplets. Sky is blue.");

        CHECK_THROWS_AS(assemble_abstractive_input({}, {}, table, "Q?"), InvalidArgument);
        CHECK_THROWS_AS(assemble_abstractive_input(ranked, {}, table, "Q?"), DimensionError);
        CHECK(parse_input_template("fid") == InputTemplate::fid);
        CHECK_THROWS_AS(parse_input_template("t5"), InvalidArgument);
    }

    TEST_CASE("budgeted generation stops once the budget is reached")
    {
        mock::FunctionLm three(mock::fixed_length({100, 100, 100, 100}));
        auto inputs = inputs_of(4);
        auto a = generate_long_answer(three, inputs);
        CHECK(a.segments.size() == 3);
        CHECK(a.word_count == 300);
        CHECK(three.invocations() == 3);
        CHECK(count_words(a.text) == 300);

        mock::FunctionLm big(mock::fixed_length({260, 10}));
        auto b = generate_long_answer(big, inputs_of(2));
        CHECK(b.segments.size() == 1);
        CHECK(b.word_count == 260);
        CHECK(big.invocations() == 1);

        mock::FunctionLm short_lm(mock::fixed_length({10, 10}));
        auto c = generate_long_answer(short_lm, inputs_of(2));
        CHECK(c.segments.size() == 2);
        CHECK(c.word_count == 20);

        mock::FunctionLm seeds([](const CompletionRequest& r) { return std::to_string(r.seed); });
        GenerationOptions opts;
        opts.seed = 40;
        auto d = generate_long_answer(seeds, inputs_of(3), opts);
        CHECK(d.text == "40 41 42");
    }

    TEST_CASE("budget rule holds for random segment lengths")
    {
        std::mt19937_64 rng(19);
        for (int trial = 0; trial < 200; ++trial) {
            std::size_t n = 1 + rng() % 8;
            std::vector<std::size_t> lengths(n);
            for (auto& l : lengths) {
                l = rng() % 150;
            }
            mock::FunctionLm lm(mock::fixed_length(lengths));
            auto a = generate_long_answer(lm, inputs_of(n));
            std::size_t before_last = a.word_count - a.segments.back().word_count;
            CHECK(before_last < 250);
            if (a.segments.size() < n) {
                CHECK(a.word_count >= 250);
            }
            CHECK(lm.invocations() == a.segments.size());
        }
    }

    TEST_CASE("provider failure keeps the partial answer")
    {
        mock::FunctionLm lm(mock::fixed_length({30, 30, 30}, 1));
        auto a = generate_long_answer(lm, inputs_of(3));
        CHECK(a.segments.size() == 1);
        REQUIRE(a.error.has_value());
        CHECK(a.error->find("segment 1") == 0);
    }

    TEST_CASE("extractive candidates and ranking")
    {
        PassageTable table({make_passage("a", "", 0, "Masks block droplets. Cats purr.", false),
                            make_passage("b", "", 0, "Masks block droplets! Vaccines train immunity.", false)});
        FusedAnswer fa, fb;
        fa.spans.push_back({PassageRef{0}, 0, 5, SpanSource::a});
        fb.spans.push_back({PassageRef{1}, 0, 3, SpanSource::b});
        std::vector<FusedAnswer> fused{fa, fb};
        auto cands = extractive_candidates(fused, table);
        REQUIRE(cands.size() == 2);
        CHECK(cands[0].text == "Masks block droplets.");
        CHECK(cands[1].text == "Cats purr.");

        HashEmbedder emb(128);
        auto top = rank_extractive("Do masks block droplets?", cands, emb, 1);
        REQUIRE(top.segments.size() == 1);
        CHECK(top.text == "Masks block droplets.");
        auto all = rank_extractive("Do masks block droplets?", cands, emb, 3);
        CHECK(all.segments.size() == 2);

        // A query with no words embeds to zero; order then stays as given.
        auto zero = rank_extractive("?!", cands, emb, 2);
        CHECK(zero.segments[0].text == "Masks block droplets.");
        CHECK(rank_extractive("q", {}, emb, 3).segments.empty());
    }

    TEST_CASE("qfs input format")
    {
        CHECK(qfs_input_format("doc text", "query") == "[CLS] doc text [SEP] query");
        auto parsed = parse_qfs_input("[CLS] doc text [SEP] query");
        REQUIRE(parsed);
        CHECK(parsed->first == "doc text");
        CHECK(parsed->second == "query");
        auto empty_doc = parse_qfs_input(qfs_input_format("", "q"));
        REQUIRE(empty_doc);
        CHECK(empty_doc->first.empty());
        CHECK_FALSE(parse_qfs_input("no markers"));
    }

    TEST_CASE("text corruption")
    {
        std::string text = "one  two\tthree four five six seven eight nine ten";
        auto c = corrupt_for_rar(text, 0.3, 7);
        CHECK(c == corrupt_for_rar(text, 0.3, 7));
        auto words = split_whitespace(c);
        REQUIRE(words.size() == 10);
        CHECK(std::count(words.begin(), words.end(), "[MASK]") == 3);
        CHECK(c.find("  ") != std::string::npos);
        CHECK(c.find('\t') != std::string::npos);
        CHECK(corrupt_for_rar(text, 0.0, 1) == text);
        auto all_masked = corrupt_for_rar(text, 1.0, 1);
        CHECK(split_whitespace(all_masked).size() == 10);
        CHECK(all_masked.find("one") == std::string::npos);
        CHECK(corrupt_for_rar("", 0.5, 1).empty());
        CHECK_THROWS_AS(corrupt_for_rar(text, 1.5, 1), InvalidArgument);

        // Every word is masked about equally often across seeds.
        std::vector<int> hits(10, 0);
        for (std::uint64_t seed = 0; seed < 2000; ++seed) {
            auto masked = corrupt_for_rar(text, 0.3, seed);
            auto w = split_whitespace(masked);
            for (std::size_t i = 0; i < 10; ++i) {
                hits[i] += w[i] == "[MASK]" ? 1 : 0;
            }
        }
        for (int h : hits) {
            CHECK(h > 480);
            CHECK(h < 720);
        }
    }
}

TEST_SUITE("cgap")
{
    TEST_CASE("sample selection")
    {
        std::vector<SupportExample> ex(4);
        SupportRepository repo(ex, {{1, 0}, {0, 1}, {0.5, 0.5}, {1, 0}});
        std::vector<double> q{1, 0};
        CHECK(select_samples(repo, q, 3) == std::vector<std::size_t>{0, 3, 2});
        CHECK(select_samples(repo, q, 0).empty());
        CHECK_THROWS_AS(select_samples(repo, q, 5), InvalidArgument);
        CHECK_THROWS_AS(select_samples(repo, std::vector<double>{1, 0, 0}, 1), DimensionError);
        CHECK_THROWS_AS(SupportRepository(ex, {{1, 0}}), DimensionError);

        HashEmbedder emb(64);
        SupportRepository embedded(support_fixture(), emb);
        auto q_emb = emb.embed_one("What is the highest mountain on Earth?");
        CHECK(select_samples(embedded, q_emb, 1).front() == 1);
        CHECK(support_key(support_fixture()[0]) == "What is the capital of France? Paris is the capital of France.");
    }

    TEST_CASE("support jsonl")
    {
        std::istringstream in(R"({"context":"c","question":"q","answer":"a"}

{"context":"c2","question":"q2"}
)");
        try {
            read_support_jsonl(in);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 3);
        }
        std::istringstream good(R"({"context":"c","question":"q","answer":"a"})");
        CHECK(read_support_jsonl(good) == std::vector<SupportExample>{{"c", "q", "a"}});
    }

    TEST_CASE("prompt templates are byte exact")
    {
        std::vector<SupportExample> s{{"ctx1", "q1", "a1"}, {"ctx2", "q2", "a2"}};
        CHECK(build_context_prompt(s, "Where?") == "Q: q2\nA: ctx2\nQ: q1\nA: ctx1\nQ: Where?\n");
        CHECK(build_answer_prompt(s, "gen ctx", "Where?")
              == "C: ctx2\nQ: q2\nA: a2\nC: ctx1\nQ: q1\nA: a1\nC: gen ctx\nQ: Where?\n");
        CHECK(build_context_prompt({}, "Where?") == "Q: Where?\n");
        CHECK(build_answer_prompt({}, "g", "Where?") == "C: g\nQ: Where?\n");
    }

    TEST_CASE("prompts parse back into their samples")
    {
        std::mt19937_64 rng(29);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<SupportExample> s(rng() % 6);
            for (auto& e : s) {
                e = {oracle::random_text(rng, 2, 6), oracle::random_text(rng, 1, 5), oracle::random_text(rng, 1, 2)};
            }
            auto q = oracle::random_text(rng, 1, 6);
            auto g = oracle::random_text(rng, 2, 6);

            auto pc = parse_context_prompt(build_context_prompt(s, q));
            CHECK(pc.question == q);
            REQUIRE(pc.samples.size() == s.size());
            for (std::size_t i = 0; i < s.size(); ++i) {
                CHECK(pc.samples[i].question == s[i].question);
                CHECK(pc.samples[i].context == s[i].context);
            }
            auto pa = parse_answer_prompt(build_answer_prompt(s, g, q));
            CHECK(pa.samples == s);
            CHECK(pa.generated_context == g);
            CHECK(pa.question == q);
        }
        CHECK_THROWS_AS(parse_context_prompt("Q: no newline"), InvalidArgument);
    }

    TEST_CASE("context generation")
    {
        mock::FunctionLm lm([](const CompletionRequest& r) { return "ctx " + std::to_string(r.seed) + "\nQ: more"; });
        SamplingOptions opts;
        opts.seed = 10;
        auto c = generate_contexts(lm, "P", 3, opts);
        CHECK(c == std::vector<std::string>{"ctx 10", "ctx 11", "ctx 12"});
        auto reqs = lm.requests();
        REQUIRE(reqs.size() == 3);
        CHECK(reqs[0].top_p == 0.9);
        CHECK(reqs[0].temperature == 1.0);
        CHECK(reqs[0].stop == std::vector<std::string>{"\nQ:"});
        CHECK_THROWS_AS(generate_contexts(lm, "P", 0), InvalidArgument);

        mock::FunctionLm failing(mock::fixed_length({5, 5, 5}, 2));
        try {
            generate_contexts(failing, "P", 3);
            FAIL("expected failure");
        } catch (const ContextGenerationError& e) {
            CHECK(e.partial().size() == 2);
        }
    }

    TEST_CASE("answer prediction is greedy and single line")
    {
        mock::FunctionLm lm([](const CompletionRequest&) { return "  Mission Hills \nQ: next"; });
        CHECK(predict_answer(lm, "P") == "Mission Hills");
        auto r = lm.requests().front();
        CHECK(r.temperature == 0.0);
        CHECK(r.stop == std::vector<std::string>{"\n"});
    }

    TEST_CASE("majority vote")
    {
        auto lopez = majority_vote(k_lopez_answers);
        CHECK(lopez.final_answer == "Mission Hills");
        REQUIRE(lopez.tallies.size() == 5);
        CHECK(lopez.tallies[2].count == 3);
        CHECK(lopez.tallies[0].count == 2);

        std::vector<std::string> deadpool{"May 18, 2018", "date21-May-2018", "May 29, 2019", "16th May 2018"};
        CHECK(majority_vote(deadpool).final_answer == "May 18, 2018");

        std::vector<std::string> single{"Paris"};
        CHECK(majority_vote(single).final_answer == "Paris");
        std::vector<std::string> tie{"b", "a", "a", "b"};
        CHECK(majority_vote(tie).final_answer == "b");
        std::vector<std::string> articles{"The Nile", "nile", "Amazon"};
        CHECK(majority_vote(articles).final_answer == "The Nile");
        CHECK_THROWS_AS(majority_vote({}), InvalidArgument);
    }

    TEST_CASE("majority vote matches brute-force counting")
    {
        std::mt19937_64 rng(53);
        const std::vector<std::string> pool{"Paris", "paris", "The Paris", "Rome", "rome.", "Oslo", "Lima"};
        for (int trial = 0; trial < 300; ++trial) {
            std::vector<std::string> answers(1 + rng() % 12);
            for (auto& a : answers) {
                a = pool[rng() % pool.size()];
            }
            auto got = majority_vote(answers);
            auto want = oracle::vote(answers);
            CHECK(got.final_answer == want.final_answer);
            REQUIRE(got.tallies.size() == want.counts.size());
            for (const auto& t : got.tallies) {
                CHECK(t.count == want.counts.at(t.normalized));
            }

            // A unique winner survives any permutation.
            std::size_t top = 0, runner = 0;
            for (const auto& t : got.tallies) {
                if (t.count > top) {
                    runner = top;
                    top = t.count;
                } else {
                    runner = std::max(runner, t.count);
                }
            }
            if (top > runner) {
                auto shuffled = answers;
                std::shuffle(shuffled.begin(), shuffled.end(), rng);
                CHECK(normalize_answer(majority_vote(shuffled).final_answer) == normalize_answer(got.final_answer));
            }
        }
    }

    TEST_CASE("scripted George Lopez run")
    {
        auto script = k_lopez_contexts;
        script.insert(script.end(), k_lopez_answers.begin(), k_lopez_answers.end());
        mock::ScriptedLm lm(script);
        HashEmbedder emb(64);
        SupportRepository repo(support_fixture(), emb);
        CgapConfig cfg;
        cfg.k = 8;
        cfg.m = 3;
        auto result = run_cgap("Where George Lopez was born?", repo, lm, emb, cfg);
        CHECK(result.final_answer == "Mission Hills");
        CHECK(result.contexts == k_lopez_contexts);
        CHECK(result.raw_answers[5] == "Mission Hills");
        CHECK(lm.invocations() == 16);

        // Both stages see the same samples, and each answer prompt carries its context.
        auto reqs = lm.requests();
        auto ctx_prompt = parse_context_prompt(reqs[0].prompt);
        REQUIRE(ctx_prompt.samples.size() == 3);
        for (std::size_t i = 0; i < 8; ++i) {
            auto ans_prompt = parse_answer_prompt(reqs[8 + i].prompt);
            CHECK(ans_prompt.generated_context == k_lopez_contexts[i]);
            REQUIRE(ans_prompt.samples.size() == 3);
            for (std::size_t s = 0; s < 3; ++s) {
                CHECK(ans_prompt.samples[s].question == ctx_prompt.samples[s].question);
                CHECK(ans_prompt.samples[s].context == ctx_prompt.samples[s].context);
            }
        }
    }

    TEST_CASE("call counts with and without batching")
    {
        HashEmbedder emb(32);
        SupportRepository repo(support_fixture(), emb);
        for (std::size_t k : {1, 5, 9}) {
            CgapConfig cfg;
            cfg.k = k;
            cfg.m = 2;
            mock::FunctionLm batched([](const CompletionRequest&) { return "x"; }, true);
            run_cgap("q?", repo, batched, emb, cfg);
            CHECK(batched.invocations() == 1 + k);
            mock::FunctionLm plain([](const CompletionRequest&) { return "x"; }, false);
            run_cgap("q?", repo, plain, emb, cfg);
            CHECK(plain.invocations() == 2 * k);
        }
    }

    TEST_CASE("run is deterministic and works zero-shot")
    {
        HashEmbedder emb(64);
        SupportRepository repo(support_fixture(), emb);
        EchoLm lm;
        CgapConfig cfg;
        cfg.k = 4;
        cfg.seed = 3;
        auto a = run_cgap("What is the capital of France?", repo, lm, emb, cfg);
        auto b = run_cgap("What is the capital of France?", repo, lm, emb, cfg);
        CHECK(a.contexts == b.contexts);
        CHECK(a.raw_answers == b.raw_answers);
        CHECK(a.final_answer == b.final_answer);

        mock::FunctionLm counting([](const CompletionRequest&) { return "x"; });
        auto zero = run_cgap("q?", SupportRepository(), counting, emb, cfg);
        CHECK(zero.raw_answers.size() == 4);
        CHECK(counting.requests().front().prompt == "Q: q?\n");
    }
}
