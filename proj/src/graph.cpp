#include "convgraph/graph.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "convgraph/error.hpp"
#include "convgraph/text.hpp"

namespace convgraph {

using nlohmann::json;

Vocab::Vocab() : Vocab(std::vector<std::string>{}) {}

Vocab::Vocab(std::vector<std::string> tokens) {
    tokens_ = {"<pad>", "<unk>", "<eos>"};
    for (auto& token : tokens) tokens_.push_back(std::move(token));
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!ids_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
            throw InvalidInput("vocab: duplicate token '" + tokens_[i] + "'");
        }
    }
}

Vocab Vocab::build(const std::vector<std::string>& texts) {
    std::set<std::string> distinct;
    for (const auto& text : texts) {
        for (auto& token : split_tokens(text, true)) distinct.insert(std::move(token));
    }
    return Vocab(std::vector<std::string>(distinct.begin(), distinct.end()));
}

Vocab Vocab::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    if (lines.size() < 3) throw InvalidInput(path + ": vocab must start with three reserved lines");
    return Vocab(std::vector<std::string>(lines.begin() + 3, lines.end()));
}

void Vocab::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& token : tokens_) out << token << '\n';
}

TokenId Vocab::id(const std::string& surface) const {
    const auto it = ids_.find(surface);
    return it == ids_.end() ? kUnk : it->second;
}

std::vector<Token> tokenize(const std::string& text, const Vocab& vocab) {
    std::vector<Token> out;
    for (auto& surface : split_tokens(text, true)) {
        const TokenId id = vocab.id(surface);
        out.push_back({id, std::move(surface)});
    }
    return out;
}

namespace {

std::string join_tokens(const std::vector<std::string>& tokens, std::size_t begin, std::size_t end) {
    std::string out;
    for (std::size_t i = begin; i < end; ++i) {
        if (i > begin) out += ' ';
        out += tokens[i];
    }
    return out;
}

}  // namespace

EntityMatcher::EntityMatcher(const std::vector<EntityRef>& lexicon) {
    // Lexicon order decides between entities sharing a surface form.
    for (const auto& entity : lexicon) {
        std::vector<std::string> names{entity.label};
        names.insert(names.end(), entity.aliases.begin(), entity.aliases.end());
        for (const auto& name : names) {
            const auto tokens = split_tokens(name, true);
            if (tokens.empty()) continue;
            phrases_.emplace(join_tokens(tokens, 0, tokens.size()), entity.entity_id);
            max_len_ = std::max(max_len_, tokens.size());
        }
    }
}

std::vector<EntitySpan> EntityMatcher::match(const std::vector<std::string>& surfaces) const {
    std::vector<EntitySpan> spans;
    std::size_t i = 0;
    while (i < surfaces.size()) {
        bool matched = false;
        for (std::size_t len = std::min(max_len_, surfaces.size() - i); len >= 1; --len) {
            const auto it = phrases_.find(to_lower(join_tokens(surfaces, i, i + len)));
            if (it != phrases_.end()) {
                spans.push_back({i, i + len, it->second});
                i += len;
                matched = true;
                break;
            }
        }
        if (!matched) ++i;
    }
    return spans;
}

std::vector<EntitySpan> match_entities(const std::vector<std::string>& surfaces, const std::vector<EntityRef>& lexicon) {
    return EntityMatcher(lexicon).match(surfaces);
}

namespace {

struct SpanRef {
    std::string evidence_id;
    std::size_t start;
    std::vector<std::size_t> nodes;  // node indices covered by the span, head first
};

}  // namespace

GraphBuildResult build_graph(const std::vector<Evidence>& instances, const std::vector<EntityRef>& lexicon,
                             const Vocab& vocab, const GraphOptions& options, std::size_t turn) {
    GraphBuildResult result;
    auto& graph = result.graph;
    graph.turn = turn;
    const EntityMatcher matcher(lexicon);
    std::map<std::string, std::vector<SpanRef>> spans_by_entity;

    for (const auto& evidence : instances) {
        const auto tokens = tokenize(evidence.linearized, vocab);
        if (tokens.empty()) {
            result.warnings.push_back("evidence '" + evidence.evidence_id + "' has no tokens; skipped");
            continue;
        }
        std::vector<std::string> surfaces;
        surfaces.reserve(tokens.size());
        for (const auto& token : tokens) surfaces.push_back(token.surface);
        const auto spans = matcher.match(surfaces);

        // Per-token span membership, then emit nodes (contracting spans when requested).
        std::vector<std::ptrdiff_t> span_of(tokens.size(), -1);
        for (std::size_t s = 0; s < spans.size(); ++s) {
            for (std::size_t t = spans[s].start; t < spans[s].end; ++t) span_of[t] = static_cast<std::ptrdiff_t>(s);
        }
        std::vector<SpanRef> local_spans(spans.size());
        for (std::size_t s = 0; s < spans.size(); ++s) local_spans[s] = {evidence.evidence_id, spans[s].start, {}};

        const std::size_t first_node = graph.nodes.size();
        std::size_t pos = 0;
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            const auto s = span_of[t];
            GraphNode node;
            node.node_idx = graph.nodes.size();
            node.token_id = tokens[t].id;
            node.surface = tokens[t].surface;
            node.evidence_id = evidence.evidence_id;
            node.pos = pos++;
            if (s >= 0) {
                const auto& span = spans[static_cast<std::size_t>(s)];
                node.entity_id = span.entity_id;
                if (options.contract_spans) {
                    node.surface = join_tokens(surfaces, span.start, span.end);
                    t = span.end - 1;
                }
                local_spans[static_cast<std::size_t>(s)].nodes.push_back(node.node_idx);
            }
            graph.nodes.push_back(std::move(node));
        }
        for (std::size_t n = first_node; n + 1 < graph.nodes.size(); ++n) {
            graph.edges.push_back({n, n + 1, EdgeKind::Chain});
            if (options.reverse_chain) graph.edges.push_back({n + 1, n, EdgeKind::Chain});
        }
        for (std::size_t s = 0; s < spans.size(); ++s) {
            spans_by_entity[spans[s].entity_id].push_back(std::move(local_spans[s]));
        }
    }

    if (options.link_mode != EntityLinkMode::None) {
        for (auto& [entity_id, spans] : spans_by_entity) {
            std::sort(spans.begin(), spans.end(), [](const SpanRef& a, const SpanRef& b) {
                return std::tie(a.evidence_id, a.start) < std::tie(b.evidence_id, b.start);
            });
            for (std::size_t a = 0; a < spans.size(); ++a) {
                for (std::size_t b = 0; b < spans.size(); ++b) {
                    if (a == b) continue;
                    if (options.link_mode == EntityLinkMode::Heads) {
                        graph.edges.push_back({spans[a].nodes.front(), spans[b].nodes.front(), EdgeKind::EntityLink});
                    } else {
                        for (auto src : spans[a].nodes) {
                            for (auto dst : spans[b].nodes) graph.edges.push_back({src, dst, EdgeKind::EntityLink});
                        }
                    }
                }
            }
        }
    }
    for (const auto& node : graph.nodes) graph.edges.push_back({node.node_idx, node.node_idx, EdgeKind::SelfLoop});
    std::sort(graph.edges.begin(), graph.edges.end());
    return result;
}

std::size_t count_edges(const EvidenceGraph& graph, EdgeKind kind) {
    return static_cast<std::size_t>(
        std::count_if(graph.edges.begin(), graph.edges.end(), [kind](const GraphEdge& e) { return e.kind == kind; }));
}

std::string_view to_string(EdgeKind kind) {
    switch (kind) {
        case EdgeKind::Chain: return "chain";
        case EdgeKind::EntityLink: return "entity_link";
        case EdgeKind::SelfLoop: return "self_loop";
    }
    return "chain";
}

namespace {

EdgeKind parse_edge_kind(const std::string& text) {
    if (text == "chain") return EdgeKind::Chain;
    if (text == "entity_link") return EdgeKind::EntityLink;
    if (text == "self_loop") return EdgeKind::SelfLoop;
    throw InvalidInput("unknown edge kind '" + text + "'");
}

}  // namespace

std::string serialize_graph(const EvidenceGraph& graph) {
    json nodes = json::array();
    for (const auto& node : graph.nodes) {
        nodes.push_back({{"node_idx", node.node_idx},
                         {"token_id", node.token_id},
                         {"surface", node.surface},
                         {"evidence_id", node.evidence_id},
                         {"pos", node.pos},
                         {"entity_id", node.entity_id ? json(*node.entity_id) : json(nullptr)}});
    }
    auto edges_sorted = graph.edges;
    std::sort(edges_sorted.begin(), edges_sorted.end());
    json edges = json::array();
    for (const auto& edge : edges_sorted) {
        edges.push_back({{"src", edge.src}, {"dst", edge.dst}, {"kind", to_string(edge.kind)}});
    }
    return json{{"turn", graph.turn}, {"nodes", nodes}, {"edges", edges}}.dump() + "\n";
}

EvidenceGraph deserialize_graph(const std::string& bytes) {
    json j;
    try {
        j = json::parse(bytes);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("graph: ") + e.what(), e.byte);
    }
    EvidenceGraph graph;
    try {
        graph.turn = j.at("turn").get<std::size_t>();
        for (const auto& n : j.at("nodes")) {
            GraphNode node;
            node.node_idx = n.at("node_idx").get<std::size_t>();
            node.token_id = n.at("token_id").get<TokenId>();
            node.surface = n.at("surface").get<std::string>();
            node.evidence_id = n.at("evidence_id").get<std::string>();
            node.pos = n.at("pos").get<std::size_t>();
            if (!n.at("entity_id").is_null()) node.entity_id = n["entity_id"].get<std::string>();
            if (node.node_idx != graph.nodes.size()) throw InvalidInput("graph: node_idx out of order");
            graph.nodes.push_back(std::move(node));
        }
        for (const auto& e : j.at("edges")) {
            GraphEdge edge{e.at("src").get<std::size_t>(), e.at("dst").get<std::size_t>(),
                           parse_edge_kind(e.at("kind").get<std::string>())};
            if (edge.src >= graph.nodes.size() || edge.dst >= graph.nodes.size()) {
                throw InvalidInput("graph: edge endpoint out of range");
            }
            graph.edges.push_back(edge);
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("graph: ") + e.what(), 0);
    }
    return graph;
}

}  // namespace convgraph
