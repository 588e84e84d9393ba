#include "convgraph/memory.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_set>

#include "convgraph/error.hpp"

namespace convgraph {

EvidenceMemory update_memory(EvidenceMemory memory, const std::vector<Evidence>& previous) {
    std::unordered_set<std::string> present;
    for (const auto& item : memory.items) present.insert(item.evidence_id);
    for (const auto& evidence : previous) {
        if (!present.insert(evidence.evidence_id).second) continue;
        Evidence stored = evidence;
        stored.origin_turn = memory.turn;
        memory.items.push_back(std::move(stored));
    }
    ++memory.turn;
    return memory;
}

EvidenceMemory update_memory(EvidenceMemory memory, const std::vector<RankedEvidence>& previous) {
    std::vector<Evidence> plain;
    plain.reserve(previous.size());
    for (const auto& ranked : previous) plain.push_back(ranked.evidence);
    return update_memory(std::move(memory), plain);
}

std::size_t replacement_count(std::size_t k, double rho) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw InvalidInput("rho must lie in [0, 1]");
    // The epsilon keeps products such as (1/3) * 30 from flooring to 9.
    const double raw = rho * static_cast<double>(k);
    return std::min(k, static_cast<std::size_t>(std::floor(raw + 1e-9)));
}

namespace {

MergeOutcome splice(const std::vector<RankedEvidence>& current, std::size_t m,
                    const std::vector<const Evidence*>& memory_order) {
    MergeOutcome outcome;
    const std::size_t k = current.size();
    std::unordered_set<std::string> used;
    for (std::size_t i = 0; i + m < k; ++i) {
        outcome.evidence.push_back(current[i].evidence);
        used.insert(current[i].evidence.evidence_id);
    }
    for (const Evidence* item : memory_order) {
        if (outcome.evidence.size() == k) break;
        if (used.insert(item->evidence_id).second) outcome.evidence.push_back(*item);
    }
    for (std::size_t i = k - m; i < k && outcome.evidence.size() < k; ++i) {
        if (used.insert(current[i].evidence.evidence_id).second) outcome.evidence.push_back(current[i].evidence);
    }
    return outcome;
}

void check_sorted(const std::vector<RankedEvidence>& current) {
    for (std::size_t i = 1; i < current.size(); ++i) {
        if (current[i].rank < current[i - 1].rank) throw InvalidInput("merge_with_memory: evidence not sorted by rank");
    }
}

}  // namespace

MergeOutcome merge_with_memory(const std::vector<RankedEvidence>& current, const EvidenceMemory& memory,
                               const ConversationQuery& query, RerankScorer& scorer, double rho) {
    check_sorted(current);
    const std::size_t m = replacement_count(current.size(), rho);
    if (m == 0 || memory.items.empty()) {
        MergeOutcome outcome;
        for (const auto& ranked : current) outcome.evidence.push_back(ranked.evidence);
        return outcome;
    }
    auto reranked = rerank(query, memory.items, scorer);
    std::vector<const Evidence*> order;
    order.reserve(reranked.ranking.size());
    for (const auto& ranked : reranked.ranking) order.push_back(&ranked.evidence);
    auto outcome = splice(current, m, order);
    outcome.scorer_errors = std::move(reranked.errors);
    return outcome;
}

MergeOutcome merge_with_random_memory(const std::vector<RankedEvidence>& current, const EvidenceMemory& memory,
                                      double rho, std::uint64_t seed) {
    check_sorted(current);
    const std::size_t m = replacement_count(current.size(), rho);
    std::vector<const Evidence*> order;
    for (const auto& item : memory.items) order.push_back(&item);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    return splice(current, m, order);
}

}  // namespace convgraph
