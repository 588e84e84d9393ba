#pragma once
// Turn-wise evidence memory: M_t is the concatenation of the evidence retrieved at turns 1..t-1.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "convgraph/evidence.hpp"
#include "convgraph/ranker.hpp"

namespace convgraph {

enum class MemoryMode { Off, On, Random };

struct EvidenceMemory {
    std::vector<Evidence> items;
    std::size_t turn = 1;
};

// Appends the evidence of the finished turn (stamped with origin_turn = memory.turn unless
// it was already present) and advances to the next turn. Items are unique by evidence_id;
// the earliest occurrence wins.
EvidenceMemory update_memory(EvidenceMemory memory, const std::vector<RankedEvidence>& previous);
EvidenceMemory update_memory(EvidenceMemory memory, const std::vector<Evidence>& previous);

// Number of low-ranked items swapped out of a k-item set, floor(rho * k).
std::size_t replacement_count(std::size_t k, double rho);

struct MergeOutcome {
    std::vector<Evidence> evidence;
    std::vector<std::string> scorer_errors;
};

// Replaces the floor(rho * k) lowest-ranked items of `current` with the best novel items of
// the memory re-ranked against `query`. Dropped items are restored (best first) when the
// memory offers too few novel items, so the result always has |current| items.
MergeOutcome merge_with_memory(const std::vector<RankedEvidence>& current, const EvidenceMemory& memory,
                               const ConversationQuery& query, RerankScorer& scorer, double rho);

// Same splice, but the memory items are drawn uniformly at random (the random-memory ablation).
MergeOutcome merge_with_random_memory(const std::vector<RankedEvidence>& current, const EvidenceMemory& memory,
                                      double rho, std::uint64_t seed);

}  // namespace convgraph
