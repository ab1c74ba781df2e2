#include <doctest.h>

#include <random>
#include <sstream>

#include "lfqa/errors.hpp"
#include "lfqa/metrics.hpp"
#include "support/oracles.hpp"

using namespace lfqa;

namespace {

std::vector<std::string> random_words(std::mt19937_64& rng, std::size_t max_len)
{
    static const std::vector<std::string> vocab{"a1", "b2", "c3", "d4", "e5"};
    std::vector<std::string> out(rng() % (max_len + 1));
    for (auto& w : out) {
        w = vocab[rng() % vocab.size()];
    }
    return out;
}

std::string join(const std::vector<std::string>& words)
{
    std::string s;
    for (const auto& w : words) {
        s += (s.empty() ? "" : " ") + w;
    }
    return s;
}

}  // namespace

TEST_SUITE("metrics")
{
    TEST_CASE("answer normalization")
    {
        CHECK(normalize_answer("The Cat!") == "cat");
        CHECK(normalize_answer("  An   apple, a day ") == "apple day");
        CHECK(normalize_answer("") == "");
        CHECK(normalize_answer("theory") == "theory");
    }

    TEST_CASE("exact match")
    {
        std::vector<std::string> golds{"Mission Hills"};
        CHECK(exact_match("Mission Hills", golds) == 1);
        CHECK(exact_match("the mission hills", golds) == 1);
        CHECK(exact_match("Los Angeles", golds) == 0);
        std::vector<std::string> several{"Paris", "the city of light"};
        CHECK(exact_match("City of Light.", several) == 1);
        CHECK_THROWS_AS(exact_match("x", std::vector<std::string>{}), InvalidArgument);

        std::mt19937_64 rng(3);
        for (int i = 0; i < 100; ++i) {
            auto text = oracle::random_text(rng, 2, 5);
            std::vector<std::string> self{normalize_answer(text)};
            CHECK(exact_match(text, self) == 1);
        }
    }

    TEST_CASE("token f1")
    {
        CHECK(token_f1("a b c", "b c d") == doctest::Approx(2.0 / 3.0));
        CHECK(token_f1("same words", "Same words.") == 1.0);
        CHECK(token_f1("x y", "z") == 0.0);
        CHECK(token_f1("", "") == 1.0);
        CHECK(token_f1("", "word") == 0.0);
        CHECK(token_f1("dog dog cat", "dog cat cat") == doctest::Approx(2.0 / 3.0));

        std::mt19937_64 rng(5);
        for (int i = 0; i < 200; ++i) {
            auto a = join(random_words(rng, 6)), b = join(random_words(rng, 6));
            CHECK(token_f1(a, b) == token_f1(b, a));
            CHECK(token_f1(a, b) >= 0.0);
            CHECK(token_f1(a, b) <= 1.0);
        }
    }

    TEST_CASE("rouge-l")
    {
        auto r = rouge_l("the cat sat", "the cat ate");
        CHECK(r.recall == doctest::Approx(2.0 / 3.0));
        CHECK(r.precision == doctest::Approx(2.0 / 3.0));
        CHECK(r.f1 == doctest::Approx(2.0 / 3.0));
        auto same = rouge_l("one two three", "one two three");
        CHECK(same.f1 == 1.0);
        CHECK(same.recall == 1.0);
        CHECK(rouge_l("", "").f1 == 1.0);
        CHECK(rouge_l("x", "").f1 == 0.0);

        std::mt19937_64 rng(9);
        for (int i = 0; i < 200; ++i) {
            auto a = join(random_words(rng, 8)), b = join(random_words(rng, 8));
            auto ab = rouge_l(a, b), ba = rouge_l(b, a);
            CHECK(ab.recall == ba.precision);
            CHECK(ab.precision == ba.recall);
            CHECK(ab.f1 == doctest::Approx(ba.f1));
        }
    }

    TEST_CASE("lcs matches subsequence enumeration")
    {
        std::mt19937_64 rng(13);
        for (int i = 0; i < 300; ++i) {
            auto a = random_words(rng, 12), b = random_words(rng, 12);
            std::vector<std::string_view> av(a.begin(), a.end()), bv(b.begin(), b.end());
            CHECK(lcs_length(av, bv) == oracle::lcs_exhaustive(a, b));
        }
    }

    TEST_CASE("multi-reference takes the best")
    {
        std::vector<std::string> golds{"nothing here", "red apple"};
        CHECK(token_f1_max("red apple", golds) == 1.0);
        CHECK(rouge_l_max("red apple", golds) == 1.0);
    }

    TEST_CASE("ranking metrics")
    {
        std::vector<std::optional<std::size_t>> ranks{1, 2, std::nullopt, 4};
        CHECK(mrr(ranks) == 0.4375);
        std::vector<std::optional<std::size_t>> all_first{1, 1};
        CHECK(mrr(all_first) == 1.0);
        std::vector<std::optional<std::size_t>> none{std::nullopt, std::nullopt};
        CHECK(mrr(none) == 0.0);
        CHECK_THROWS_AS(mrr({}), InvalidArgument);
        std::vector<std::optional<std::size_t>> zero{0};
        CHECK_THROWS_AS(mrr(zero), InvalidArgument);

        auto flags_for = [](std::size_t rank) {
            std::vector<bool> f(6, false);
            f[rank - 1] = true;
            return f;
        };
        std::vector<std::vector<bool>> mixed{flags_for(1), flags_for(2), flags_for(5), flags_for(3)};
        CHECK(precision_at_1(mixed) == 0.25);
        CHECK(recall_at_3(mixed) == 0.75);
        std::vector<std::vector<bool>> third{flags_for(3), flags_for(3)};
        CHECK(precision_at_1(third) == 0.0);
        CHECK(recall_at_3(third) == 1.0);
    }

    TEST_CASE("faithfulness recall")
    {
        std::vector<FaithfulnessPair> pairs{{"Paris", "It is in Paris, France."},
                                            {"London", "The answer is Berlin."},
                                            {"Rome", "Rome was not built in a day."}};
        CHECK(faithfulness_recall(pairs) == doctest::Approx(2.0 / 3.0));
        std::vector<FaithfulnessPair> empty_long{{"Paris", ""}};
        CHECK(faithfulness_recall(empty_long) == 0.0);
        CHECK_THROWS_AS(faithfulness_recall({}), InvalidArgument);
    }

    TEST_CASE("evaluation records")
    {
        std::istringstream in(R"({"question":"q1","prediction":"Mission Hills","golds":["Mission Hills"]}
{"question":"q2","prediction":"a b c","golds":["b c d"]}
)");
        auto recs = read_eval_jsonl(in);
        REQUIRE(recs.size() == 2);
        auto metrics = parse_metrics("em,f1,rougeL");
        REQUIRE(metrics.size() == 3);
        auto report = evaluate(recs, metrics);
        CHECK(report.count == 2);
        CHECK(report.metrics.at("em").per_example == std::vector<double>{1.0, 0.0});
        CHECK(report.metrics.at("f1").mean == doctest::Approx((1.0 + 2.0 / 3.0) / 2));
        CHECK_THROWS_AS(parse_metrics("bleu"), InvalidArgument);

        std::istringstream bad(R"({"question":"q1","prediction":"x","golds":["y"]}
{"question":"q2","golds":["y"]}
)");
        try {
            read_eval_jsonl(bad);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 2);
            CHECK(std::string(e.what()).find("record 1") != std::string::npos);
        }
    }
}
