#include <doctest.h>

#include <algorithm>
#include <random>

#include "convgraph/error.hpp"
#include "convgraph/linearizer.hpp"

using namespace convgraph;

namespace {

const std::vector<std::string> kAccoladeHeaders = {"Publication", "Country", "Accolade", "Year", "Rank"};
const std::vector<std::string> kRollingStoneRow = {"Rolling Stone", "US", "The 100 Best Albums of the decade", "2009",
                                                   "1"};

}  // namespace

TEST_CASE("triples are comma joined") {
    CHECK(linearize_triple("Kid A", "publication", "2 October 2000") == "Kid A, publication, 2 October 2000");
    CHECK(linearize_triple("Rolling Stone", "Editor", "Noah Shachtman") == "Rolling Stone, Editor, Noah Shachtman");
    CHECK_THROWS_AS(linearize_triple("a", "b", ""), InvalidInput);
}

TEST_CASE("triple output has exactly two more separators than its elements") {
    std::mt19937 rng(11);
    const std::vector<std::string> parts = {"a", "b, c", "d,e", "x, y, z", "plain"};
    auto commas = [](const std::string& s) { return std::count(s.begin(), s.end(), ','); };
    for (int i = 0; i < 100; ++i) {
        const auto& s = parts[rng() % parts.size()];
        const auto& p = parts[rng() % parts.size()];
        const auto& o = parts[rng() % parts.size()];
        CHECK(commas(linearize_triple(s, p, o)) == commas(s) + commas(p) + commas(o) + 2);
    }
}

TEST_CASE("table rows pair each header with its cell") {
    CHECK(linearize_table_row("Kid A", kAccoladeHeaders, kRollingStoneRow, false) ==
          "Publication Rolling Stone, Country US, Accolade The 100 Best Albums of the decade, Year 2009, Rank 1");
    CHECK(linearize_table_row("Kid A", kAccoladeHeaders, kRollingStoneRow, true) ==
          "Kid A, Publication Rolling Stone, Country US, Accolade The 100 Best Albums of the decade, Year 2009, Rank 1");
    CHECK_THROWS_AS(linearize_table_row("T", {"A"}, {"x", "y"}, false), InvalidInput);
    CHECK_THROWS_AS(linearize_table_row("T", {}, {}, false), InvalidInput);
}

TEST_CASE("infobox entries carry the title and optional header") {
    CHECK(linearize_infobox("Rolling Stone", std::nullopt, {{"Editor", "Noah Shachtman"}}) ==
          "Rolling Stone, Editor Noah Shachtman");
    CHECK(linearize_infobox("X", "Details", {{"Founded", "1967"}}) == "X, Details, Founded 1967");
    CHECK_THROWS_AS(linearize_infobox("X", std::nullopt, {}), InvalidInput);
}

TEST_CASE("sentence splitting") {
    SUBCASE("an initial inside a name does not split") {
        const auto s = split_sentences(
            "Rolling Stone", "Rolling Stone was founded in San Francisco in 1967 by Jann Wenner and Ralph J. Gleason.",
            false);
        REQUIRE(s.size() == 1);
        CHECK(s[0] == "Rolling Stone was founded in San Francisco in 1967 by Jann Wenner and Ralph J. Gleason.");
    }
    SUBCASE("sentence-initial single letters still split") {
        CHECK(split_sentences("T", "A. B? C.", false) == std::vector<std::string>{"A.", "B?", "C."});
    }
    SUBCASE("empty text") { CHECK(split_sentences("T", "", false).empty()); }
    SUBCASE("lowercase continuation does not split") {
        CHECK(split_sentences("T", "Born c. 1900 in town. Later moved!", false) ==
              std::vector<std::string>{"Born c. 1900 in town.", "Later moved!"});
    }
    SUBCASE("title prefix") {
        CHECK(split_sentences("Kid A", "It sold. It charted.", true) ==
              std::vector<std::string>{"Kid A: It sold.", "Kid A: It charted."});
    }
}

TEST_CASE("linearize follows the per-source title defaults") {
    Evidence kb{"k", SourceKind::KB, "Kid A", TriplePayload{"Kid A", "publication", "2 October 2000"}};
    Evidence row{"t", SourceKind::Table, "Kid A", TableRowPayload{{"Year"}, {"2009"}}};
    Evidence text{"s", SourceKind::Text, "Kid A", SentencePayload{"It sold."}};
    linearize(kb);
    linearize(row);
    linearize(text);
    CHECK(kb.linearized == "Kid A, publication, 2 October 2000");
    CHECK(row.linearized == "Kid A, Year 2009");
    CHECK(text.linearized == "Kid A: It sold.");

    LinearizeOptions off;
    off.prepend_title_table = false;
    off.prepend_title_text = false;
    linearize(row, off);
    linearize(text, off);
    CHECK(row.linearized == "Year 2009");
    CHECK(text.linearized == "It sold.");
}

TEST_CASE("linearize_pool splits passages and fills every instance") {
    std::vector<Evidence> pool = {
        {"p", SourceKind::Text, "Rolling Stone", SentencePayload{"It is a magazine. It was founded in 1967."}},
        {"k", SourceKind::KB, std::nullopt, TriplePayload{"a", "b", "c"}},
        {"e", SourceKind::Text, "T", SentencePayload{""}},
    };
    const auto out = linearize_pool(pool);
    REQUIRE(out.size() == 3);
    CHECK(out[0].evidence_id == "p#1");
    CHECK(out[1].evidence_id == "p#2");
    CHECK(out[1].linearized == "Rolling Stone: It was founded in 1967.");
    for (const auto& e : out) CHECK_FALSE(e.linearized.empty());

    SUBCASE("deterministic and idempotent") {
        CHECK(linearize_pool(pool) == out);
        CHECK(linearize_pool(out) == out);
    }
}
