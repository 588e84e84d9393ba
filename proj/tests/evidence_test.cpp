#include <doctest.h>

#include <random>

#include "convgraph/error.hpp"
#include "convgraph/evidence.hpp"
#include "convgraph/text.hpp"
#include "support.hpp"

using namespace convgraph;

TEST_CASE("build_query with empty history is the question alone") {
    const auto q = build_query({}, "What is the release date of album Kid A?");
    CHECK(q.turn == 1);
    REQUIRE(q.parts.size() == 1);
    CHECK(q.parts[0].role == QueryRole::Question);
    CHECK(q.text == "What is the release date of album Kid A?");
}

TEST_CASE("build_query interleaves history and ends with the new question") {
    const std::vector<QaPair> history = {{"What is the release date of album Kid A?", "2 October 2000"},
                                         {"Fact Rank?", "7"}};
    const auto q = build_query(history, "Ranking on Rolling Stone in 2009?");
    CHECK(q.turn == 3);
    REQUIRE(q.parts.size() == 5);
    CHECK(q.parts[1].text == "2 October 2000");
    CHECK(q.parts[3].role == QueryRole::Answer);
    CHECK(q.parts.back().text == "Ranking on Rolling Stone in 2009?");
    CHECK(q.text ==
          "What is the release date of album Kid A? 2 October 2000 Fact Rank? 7 Ranking on Rolling Stone in 2009?");
}

TEST_CASE("build_query rejects empty input") {
    CHECK_THROWS_AS(build_query({}, ""), InvalidInput);
    CHECK_THROWS_AS(build_query({{"q", ""}}, "next"), InvalidInput);
}

TEST_CASE("build_query is order preserving for any history length") {
    std::mt19937 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<QaPair> history;
        const int n = static_cast<int>(rng() % 9);
        for (int i = 0; i < n; ++i) history.emplace_back("q" + std::to_string(i), "a" + std::to_string(i));
        const auto q = build_query(history, "now");
        REQUIRE(q.parts.size() == 2 * history.size() + 1);
        for (std::size_t i = 0; i < history.size(); ++i) {
            CHECK(q.parts[2 * i].text == history[i].first);
            CHECK(q.parts[2 * i + 1].text == history[i].second);
        }
        std::string joined;
        for (const auto& p : q.parts) joined += (joined.empty() ? "" : " ") + p.text;
        CHECK(q.text == joined);
    }
}

TEST_CASE("make_entity drops case-insensitive duplicate aliases") {
    const auto e = make_entity("Q30", "United States", {"USA", "usa", "US", "Usa"});
    CHECK(e.aliases == std::vector<std::string>{"USA", "US"});
}

TEST_CASE("source kinds serialize as lowercase strings") {
    for (auto kind : {SourceKind::KB, SourceKind::Text, SourceKind::Table, SourceKind::Infobox}) {
        const nlohmann::json j = kind;
        CHECK(j.get<std::string>() == to_lower(j.get<std::string>()));
        CHECK(j.get<SourceKind>() == kind);
    }
    CHECK_THROWS(parse_source_kind("wiki"));
}

TEST_CASE("every evidence type round-trips through JSON") {
    Evidence kb{"e1", SourceKind::KB, std::nullopt, TriplePayload{"Kid A", "publication", "2 October 2000"},
                "Kid A, publication, 2 October 2000", {make_entity("Q1", "Kid A")}, 2};
    Evidence row{"e2", SourceKind::Table, "Kid A", TableRowPayload{{"Year", "Rank"}, {"2009", "1"}}, "", {}, 1};
    Evidence box{"e3", SourceKind::Infobox, "Rolling Stone",
                 InfoboxPayload{"Details", {{"Founded", "1967"}, {"Editor", "Noah Shachtman"}}}, "", {}, 3};
    Evidence text{"e4", SourceKind::Text, "Rolling Stone", SentencePayload{"It was founded in 1967."}, "", {}, 1};
    for (const auto& e : {kb, row, box, text}) {
        const nlohmann::json j = e;
        CHECK(j.get<Evidence>() == e);
    }

    Interaction conv{"c1", "music", {{1, "Q?", "A", {"alias"}, SourceKind::KB, "music"}, {2, "Q2?", "B", {}, {}, "music"}}};
    CHECK(nlohmann::json(conv).get<Interaction>() == conv);
    conv.turns[1].domain.clear();
    CHECK(nlohmann::json(conv).get<Interaction>().turns[1].domain == "music");

    const auto query = build_query({{"a", "b"}}, "c");
    CHECK(nlohmann::json(query).get<ConversationQuery>() == query);

    EvidencePool pool{"c1", 2, {kb, row}};
    CHECK(nlohmann::json(pool).get<EvidencePool>() == pool);
}

TEST_CASE("pools reject duplicate evidence ids") {
    nlohmann::json e = {{"evidence_id", "x"}, {"source_kind", "kb"},
                        {"payload", {{"subject", "a"}, {"predicate", "b"}, {"object", "c"}}}};
    nlohmann::json pool = {{"conv_id", "c"}, {"turn", 1}, {"evidence", {e, e}}};
    CHECK_THROWS_AS(pool.get<EvidencePool>(), InvalidInput);
}

TEST_CASE("malformed JSON lines report the file and line") {
    const auto dir = support::scratch_dir("evidence");
    const auto path = dir / "broken.jsonl";
    support::spit(path, "{\"conv_id\": \"a\", \"domain\": \"x\", \"turns\": []}\n{\"conv_id\": \n");
    try {
        load_interactions(path.string());
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("broken.jsonl:2") != std::string::npos);
    }
}

TEST_CASE("bundled fixtures load") {
    const auto conversations = load_interactions(support::fixture("interactions.jsonl").string());
    REQUIRE(conversations.size() == 5);
    for (const auto& c : conversations) {
        REQUIRE(c.turns.size() == 5);
        for (std::size_t i = 0; i < c.turns.size(); ++i) CHECK(c.turns[i].index == i + 1);
    }
    CHECK(load_pools(support::fixture("pools.jsonl").string()).size() == 25);
    CHECK_FALSE(load_entities(support::fixture("entities.jsonl").string()).empty());
}
