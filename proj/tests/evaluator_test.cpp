#include <doctest.h>

#include <random>
#include <set>

#include "convgraph/error.hpp"
#include "convgraph/evaluator.hpp"
#include "convgraph/text.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace convgraph;

namespace {

const std::vector<EntityRef> kCountries = {make_entity("Q30", "United States", {"USA", "US"}),
                                           make_entity("Q145", "United Kingdom", {"UK"}),
                                           make_entity("Q77", "Uruguay")};

std::string random_word(std::mt19937& rng, std::size_t max_len) {
    static const std::string alphabet = "abcdeAB ";
    std::string s;
    const std::size_t n = rng() % (max_len + 1);
    for (std::size_t i = 0; i < n; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
    return s;
}

void check_cell(const StratumStats& s, oracle::Cell expected) {
    CHECK(s.count == expected.count);
    CHECK(s.hits1 == expected.hits1);
    CHECK(s.hits5 == expected.hits5);
}

}  // namespace

TEST_CASE("levenshtein") {
    CHECK(levenshtein("kid a", "kid a") == 0);
    CHECK(levenshtein("abc", "") == 3);
    CHECK(levenshtein("united states of america", "united states") == 11);
    CHECK(levenshtein("  Kid A ", "kid a") == 0);
}

TEST_CASE("levenshtein matches the DP oracle and is a metric") {
    std::mt19937 rng(8);
    for (int i = 0; i < 1000; ++i) {
        const std::string a = random_word(rng, 12), b = random_word(rng, 12), c = random_word(rng, 12);
        CHECK(levenshtein(a, b) == oracle::edit_distance(fold(a), fold(b)));
        CHECK(levenshtein(a, b) == levenshtein(b, a));
        CHECK(levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c));
    }
}

TEST_CASE("answer normalization") {
    CHECK(normalize_answer("United States of America", kCountries).front() == "United States");
    CHECK(levenshtein("united states of america", "united kingdom") == 15);
    CHECK(levenshtein("united states of america", "uruguay") == 22);
    CHECK(normalize_answer("USA", kCountries).front() == "United States");
    CHECK(normalize_answer("United States of America", {}) == std::vector<std::string>{"United States of America"});
    CHECK(normalize_answer("x", kCountries, 2).size() == 2);

    std::mt19937 rng(9);
    std::vector<EntityRef> pool;
    for (int i = 0; i < 30; ++i) pool.push_back(make_entity("E" + std::to_string(i), "w" + random_word(rng, 8)));
    pool.push_back(make_entity("dup", pool[0].label));
    for (int trial = 0; trial < 200; ++trial) {
        const std::string generated = random_word(rng, 10);
        const auto ranking = normalize_answer(generated, pool);
        CHECK(std::set<std::string>(ranking.begin(), ranking.end()).size() == ranking.size());
        bool exact = false;
        std::size_t best = SIZE_MAX;
        for (const auto& e : pool) {
            exact |= fold(e.label) == fold(generated);
            best = std::min(best, levenshtein(generated, e.label));
        }
        if (exact) {
            CHECK(fold(ranking.front()) == fold(generated));
        } else {
            CHECK(levenshtein(generated, ranking.front()) == best);
        }
    }
}

TEST_CASE("answer types") {
    CHECK(classify_answer_type("2 October 2000") == AnswerType::Date);
    CHECK(classify_answer_type("October 2, 2000") == AnswerType::Date);
    CHECK(classify_answer_type("2000-10-02") == AnswerType::Date);
    CHECK(classify_answer_type("2/10/2002") == AnswerType::Date);
    CHECK(classify_answer_type("2000") == AnswerType::Date);
    CHECK(classify_answer_type("7") == AnswerType::Number);
    CHECK(classify_answer_type("-3.5") == AnswerType::Number);
    CHECK(classify_answer_type("99,354") == AnswerType::Number);
    CHECK(classify_answer_type("Noah Shachtman") == AnswerType::String);
    CHECK(classify_answer_type("12,34") == AnswerType::String);
    CHECK(parse_answer_type(to_string(AnswerType::Number)) == AnswerType::Number);
}

TEST_CASE("turn scoring") {
    TurnScoreInput in{"c", 3, "music", SourceKind::Table, "1", "1", {}};
    auto r = score_turn(in, normalize_answer("1", {make_entity("a", "7")}));
    CHECK(r.hit1);
    CHECK(r.hit5);
    CHECK(r.answer_type == AnswerType::Number);

    in.generated = "Rolling";
    in.gold = "Noah Shachtman";
    r = score_turn(in, {"Rolling Stone", "Jann Wenner", "Kid A", "noah shachtman ", "UK"});
    CHECK_FALSE(r.hit1);
    CHECK(r.hit5);
    CHECK(r.normalized == "Rolling Stone");

    r = score_turn(in, {"a", "b", "c", "d", "e", "Noah Shachtman"});
    CHECK_FALSE(r.hit1);
    CHECK_FALSE(r.hit5);

    in.gold_aliases = {"Shachtman"};
    CHECK(score_turn(in, {"shachtman"}).hit1);
}

TEST_CASE("hit at one implies hit at five") {
    std::mt19937 rng(10);
    for (int i = 0; i < 500; ++i) {
        std::vector<EntityRef> candidates;
        for (int c = 0; c < 6; ++c) candidates.push_back(make_entity("E" + std::to_string(c), random_word(rng, 4) + "x"));
        TurnScoreInput in{"c", 1, "d", std::nullopt, random_word(rng, 5), candidates[rng() % 6].label, {}};
        const auto r = score_turn(in, normalize_answer(in.generated, candidates));
        CHECK((!r.hit1 || r.hit5));
    }
    nlohmann::json bad = {{"conv_id", "c"}, {"turn", 1}, {"generated", "x"}, {"gold", "y"}, {"hit1", true}, {"hit5", false}};
    CHECK_THROWS_AS(bad.get<EvalRecord>(), InvalidInput);
}

TEST_CASE("stratification basics") {
    EvalRecord a;
    a.domain = "music";
    a.turn = 1;
    a.hit1 = a.hit5 = true;
    auto report = stratify({a});
    CHECK(report.overall.h1() == 1.0);
    CHECK(report.by_domain.at("music").h1() == 1.0);
    CHECK(report.by_source.at(kUnknownStratum).h1() == 1.0);
    CHECK(report.by_turn.at(1).h5() == 1.0);

    EvalRecord b = a;
    b.hit1 = false;
    report = stratify({a, b});
    CHECK(report.by_domain.at("music").h1() == 0.5);
    CHECK(stratify({}).overall.count == 0);
}

TEST_CASE("stratification of the shipped 20-record fixture matches the hand-computed table") {
    const auto records = load_eval_records(support::fixture("eval_records.jsonl").string());
    REQUIRE(records.size() == 20);
    const auto r = stratify(records);

    check_cell(r.overall, {20, 9, 13});

    CHECK(r.by_domain.size() == 4);
    check_cell(r.by_domain.at("music"), {5, 3, 4});
    check_cell(r.by_domain.at("books"), {5, 2, 3});
    check_cell(r.by_domain.at("soccer"), {5, 2, 3});
    check_cell(r.by_domain.at("tv_series"), {5, 2, 3});

    CHECK(r.by_source.size() == 5);
    check_cell(r.by_source.at("kb"), {4, 3, 4});
    check_cell(r.by_source.at("table"), {4, 2, 3});
    check_cell(r.by_source.at("infobox"), {7, 2, 3});
    check_cell(r.by_source.at("text"), {4, 1, 2});
    check_cell(r.by_source.at("unknown"), {1, 1, 1});

    CHECK(r.by_turn.size() == 5);
    check_cell(r.by_turn.at(1), {4, 3, 4});
    check_cell(r.by_turn.at(2), {4, 1, 2});
    check_cell(r.by_turn.at(3), {4, 1, 3});
    check_cell(r.by_turn.at(4), {4, 3, 3});
    check_cell(r.by_turn.at(5), {4, 1, 1});

    CHECK(r.by_answer_type.size() == 3);
    check_cell(r.by_answer_type.at("Date"), {4, 2, 2});
    check_cell(r.by_answer_type.at("Number"), {4, 1, 2});
    check_cell(r.by_answer_type.at("String"), {12, 6, 9});

    CHECK(r.overall.h1() == 0.45);
    CHECK(r.overall.h5() == 0.65);

    // Every axis partitions the records, so its weighted mean is the overall rate.
    auto weighted = [&](const auto& table) {
        std::size_t count = 0, hits = 0;
        for (const auto& [key, s] : table) {
            CHECK(s.hits1 <= s.hits5);
            CHECK(s.hits5 <= s.count);
            count += s.count;
            hits += s.hits1;
        }
        CHECK(count == 20);
        return static_cast<double>(hits) / static_cast<double>(count);
    };
    CHECK(weighted(r.by_domain) == r.overall.h1());
    CHECK(weighted(r.by_source) == r.overall.h1());
    CHECK(weighted(r.by_turn) == r.overall.h1());
    CHECK(weighted(r.by_answer_type) == r.overall.h1());

    CHECK(report_text(r) == support::slurp(support::fixture("metrics_report.json")));
}

TEST_CASE("eval records round trip") {
    const auto records = load_eval_records(support::fixture("eval_records.jsonl").string());
    const auto dir = support::scratch_dir("records");
    write_eval_records((dir / "r.jsonl").string(), records);
    const auto again = load_eval_records((dir / "r.jsonl").string());
    REQUIRE(again.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(nlohmann::json(again[i]) == nlohmann::json(records[i]));
    }
}
