#pragma once
// Per-turn evidence graph: one token chain per evidence instance, joined by entity links.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "convgraph/evidence.hpp"

namespace convgraph {

using TokenId = std::uint32_t;

class Vocab {
public:
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kUnk = 1;
    static constexpr TokenId kEos = 2;

    // Only the reserved tokens.
    Vocab();

    // Reserved tokens followed by the sorted distinct tokens of `texts`.
    static Vocab build(const std::vector<std::string>& texts);
    // vocab.txt: one token per line, line number = id, first three lines reserved.
    static Vocab load(const std::string& path);
    void save(const std::string& path) const;

    std::size_t size() const { return tokens_.size(); }
    TokenId id(const std::string& surface) const;
    const std::string& surface(TokenId id) const { return tokens_.at(id); }
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    explicit Vocab(std::vector<std::string> tokens);

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> ids_;
};

struct Token {
    TokenId id = Vocab::kUnk;
    std::string surface;
    bool operator==(const Token&) const = default;
};

// Lowercase, split on whitespace and punctuation (punctuation kept); OOV -> unk with surface kept.
std::vector<Token> tokenize(const std::string& text, const Vocab& vocab);

struct EntitySpan {
    std::size_t start = 0;  // first token
    std::size_t end = 0;    // one past the last token
    std::string entity_id;
    bool operator==(const EntitySpan&) const = default;
};

// Compiled entity lexicon: every label and alias as a lowercase token sequence.
class EntityMatcher {
public:
    explicit EntityMatcher(const std::vector<EntityRef>& lexicon);

    // Greedy left-to-right, longest match first, non-overlapping.
    std::vector<EntitySpan> match(const std::vector<std::string>& surfaces) const;

private:
    std::unordered_map<std::string, std::string> phrases_;  // joined tokens -> entity_id
    std::size_t max_len_ = 0;
};

std::vector<EntitySpan> match_entities(const std::vector<std::string>& surfaces, const std::vector<EntityRef>& lexicon);

struct GraphNode {
    std::size_t node_idx = 0;
    TokenId token_id = Vocab::kUnk;
    std::string surface;
    std::string evidence_id;
    std::size_t pos = 0;
    std::optional<std::string> entity_id;
    bool operator==(const GraphNode&) const = default;
};

enum class EdgeKind { Chain, EntityLink, SelfLoop };

struct GraphEdge {
    std::size_t src = 0;
    std::size_t dst = 0;
    EdgeKind kind = EdgeKind::Chain;
    bool operator==(const GraphEdge&) const = default;
    auto operator<=>(const GraphEdge&) const = default;
};

struct EvidenceGraph {
    std::vector<GraphNode> nodes;
    std::vector<GraphEdge> edges;  // sorted by (src, dst, kind)
    std::size_t turn = 1;
    bool operator==(const EvidenceGraph&) const = default;
};

enum class EntityLinkMode { Heads, AllTokens, None };

struct GraphOptions {
    EntityLinkMode link_mode = EntityLinkMode::Heads;
    bool reverse_chain = false;
    // Collapse every multi-token entity span into a single node carrying the head token.
    bool contract_spans = false;
};

struct GraphBuildResult {
    EvidenceGraph graph;
    std::vector<std::string> warnings;
};

GraphBuildResult build_graph(const std::vector<Evidence>& instances, const std::vector<EntityRef>& lexicon,
                             const Vocab& vocab, const GraphOptions& options = {}, std::size_t turn = 1);

std::size_t count_edges(const EvidenceGraph& graph, EdgeKind kind);

// Canonical JSON: sorted keys, nodes by node_idx, edges by (src, dst, kind).
std::string serialize_graph(const EvidenceGraph& graph);
EvidenceGraph deserialize_graph(const std::string& bytes);

std::string_view to_string(EdgeKind kind);

}  // namespace convgraph
