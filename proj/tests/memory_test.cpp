#include <doctest.h>

#include <random>
#include <set>

#include "convgraph/error.hpp"
#include "convgraph/memory.hpp"

using namespace convgraph;

namespace {

Evidence item(const std::string& id, const std::string& text = "filler") {
    Evidence e;
    e.evidence_id = id;
    e.source_kind = SourceKind::Text;
    e.payload = SentencePayload{text};
    e.linearized = text;
    return e;
}

std::vector<RankedEvidence> ranked(const std::string& prefix, std::size_t n) {
    std::vector<RankedEvidence> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({item(prefix + std::to_string(i)), static_cast<double>(n - i), i + 1});
    }
    return out;
}

ConversationQuery query(const std::string& text) { return {2, text, {{QueryRole::Question, text}}}; }

std::vector<std::string> ids(const std::vector<Evidence>& v) {
    std::vector<std::string> out;
    for (const auto& e : v) out.push_back(e.evidence_id);
    return out;
}

}  // namespace

TEST_CASE("update_memory concatenates turns in order and deduplicates") {
    EvidenceMemory m;
    m = update_memory(m, ranked("a", 50));
    CHECK(m.items.size() == 50);
    CHECK(m.turn == 2);
    m = update_memory(m, ranked("b", 50));
    m = update_memory(m, ranked("c", 50));
    REQUIRE(m.items.size() == 150);
    CHECK(m.turn == 4);
    CHECK(m.items[0].evidence_id == "a0");
    CHECK(m.items[50].evidence_id == "b0");
    CHECK(m.items[149].evidence_id == "c49");
    CHECK(m.items[0].origin_turn == 1);
    CHECK(m.items[149].origin_turn == 3);

    m = update_memory(m, ranked("a", 3));
    CHECK(m.items.size() == 150);
    CHECK(m.items[0].origin_turn == 1);
    for (const auto& e : m.items) CHECK(e.origin_turn < m.turn);
}

TEST_CASE("replacement count") {
    CHECK(replacement_count(30, 1.0 / 3.0) == 10);
    CHECK(replacement_count(50, 1.0 / 3.0) == 16);
    CHECK(replacement_count(10, 0.0) == 0);
    CHECK(replacement_count(10, 1.0) == 10);
    CHECK_THROWS_AS(replacement_count(10, 1.5), InvalidInput);
    CHECK_THROWS_AS(replacement_count(10, -0.1), InvalidInput);
}

TEST_CASE("merge with one third of k = 30 replaces exactly ten") {
    const auto current = ranked("cur", 30);
    EvidenceMemory memory;
    memory = update_memory(memory, ranked("mem", 40));
    TfidfCosineScorer scorer;
    const auto merged = merge_with_memory(current, memory, query("q"), scorer, 1.0 / 3.0).evidence;
    REQUIRE(merged.size() == 30);
    std::size_t from_memory = 0;
    for (const auto& e : merged) from_memory += e.evidence_id.rfind("mem", 0) == 0;
    CHECK(from_memory == 10);
    for (std::size_t i = 0; i < 20; ++i) CHECK(merged[i].evidence_id == current[i].evidence.evidence_id);
}

TEST_CASE("merge at turn one is the identity") {
    const auto current = ranked("cur", 12);
    TfidfCosineScorer scorer;
    const auto merged = merge_with_memory(current, EvidenceMemory{}, query("q"), scorer, 1.0 / 3.0).evidence;
    CHECK(ids(merged) == ids(update_memory({}, current).items));
}

TEST_CASE("memory inside the retained prefix backfills the dropped items") {
    const auto current = ranked("x", 6);
    EvidenceMemory memory = update_memory({}, std::vector<RankedEvidence>(current.begin(), current.begin() + 3));
    TfidfCosineScorer scorer;
    const auto merged = merge_with_memory(current, memory, query("x0"), scorer, 0.5).evidence;
    CHECK(ids(merged) == std::vector<std::string>{"x0", "x1", "x2", "x3", "x4", "x5"});
}

TEST_CASE("merge invariants on random inputs") {
    std::mt19937 rng(17);
    const std::vector<std::string> words = {"kid", "a", "rolling", "stone", "rank", "year", "editor"};
    auto text = [&] {
        std::string t;
        for (int i = 0; i < 4; ++i) t += (i ? " " : "") + words[rng() % words.size()];
        return t;
    };
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t k = 1 + rng() % 40;
        std::vector<RankedEvidence> current;
        for (std::size_t i = 0; i < k; ++i) current.push_back({item("e" + std::to_string(rng() % 200), text()), 0.0, i + 1});
        std::set<std::string> seen;
        std::vector<RankedEvidence> unique;
        for (auto& r : current) {
            if (seen.insert(r.evidence.evidence_id).second) unique.push_back(r);
        }
        for (std::size_t i = 0; i < unique.size(); ++i) unique[i].rank = i + 1;
        EvidenceMemory memory;
        const std::size_t mem_n = rng() % 60;
        std::vector<Evidence> mem;
        for (std::size_t i = 0; i < mem_n; ++i) mem.push_back(item("e" + std::to_string(rng() % 200), text()));
        memory = update_memory(memory, mem);

        const double rho = static_cast<double>(rng() % 101) / 100.0;
        TfidfCosineScorer scorer;
        const auto merged = merge_with_memory(unique, memory, query(text()), scorer, rho).evidence;
        REQUIRE(merged.size() == unique.size());
        const std::size_t keep = unique.size() - replacement_count(unique.size(), rho);
        for (std::size_t i = 0; i < keep; ++i) CHECK(merged[i] == unique[i].evidence);
        std::set<std::string> out_ids;
        for (const auto& e : merged) CHECK(out_ids.insert(e.evidence_id).second);

        const auto identity = merge_with_memory(unique, memory, query(text()), scorer, 0.0).evidence;
        for (std::size_t i = 0; i < unique.size(); ++i) CHECK(identity[i] == unique[i].evidence);

        const auto random = merge_with_random_memory(unique, memory, rho, trial).evidence;
        CHECK(random.size() == unique.size());
        CHECK(random == merge_with_random_memory(unique, memory, rho, trial).evidence);
    }
}

TEST_CASE("rho = 1 with a large memory replaces everything with the memory's best") {
    const auto current = ranked("cur", 5);
    std::vector<Evidence> mem;
    for (int i = 0; i < 8; ++i) mem.push_back(item("m" + std::to_string(i), i == 3 ? "rolling stone" : "other words"));
    const EvidenceMemory memory = update_memory({}, mem);
    TfidfCosineScorer scorer;
    const auto merged = merge_with_memory(current, memory, query("rolling stone"), scorer, 1.0).evidence;
    REQUIRE(merged.size() == 5);
    CHECK(merged[0].evidence_id == "m3");
    for (const auto& e : merged) CHECK(e.evidence_id[0] == 'm');
}

TEST_CASE("unsorted input is rejected") {
    auto current = ranked("c", 3);
    std::swap(current[0], current[2]);
    TfidfCosineScorer scorer;
    CHECK_THROWS_AS(merge_with_memory(current, EvidenceMemory{}, query("q"), scorer, 0.5), InvalidInput);
}
