#pragma once
// Random evidence sets whose structural counts are known by construction.

#include <cstddef>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "convgraph/evidence.hpp"
#include "convgraph/graph.hpp"

namespace gen {

struct EvidenceSet {
    std::vector<convgraph::Evidence> instances;
    std::vector<convgraph::EntityRef> lexicon;
    std::size_t tokens = 0;
    std::size_t chain_edges = 0;
    std::map<std::string, std::size_t> spans;  // entity_id -> inserted mentions
};

// Filler words never occur inside an entity name, and no two entity names share a token,
// so greedy matching finds exactly the inserted mentions.
inline EvidenceSet random_evidence_set(std::mt19937_64& rng, std::size_t max_instances = 6) {
    static const std::vector<std::string> filler = {"the", "of", "album", "released", "rank", "year", "in", "by"};
    static const std::vector<std::vector<std::string>> mentions = {
        {"kid a"}, {"rolling stone", "rs"}, {"noah shachtman"}, {"camp nou"}, {"amc"}, {"jann wenner", "wenner"}};
    EvidenceSet out;
    for (std::size_t e = 0; e < mentions.size(); ++e) {
        std::vector<std::string> aliases(mentions[e].begin() + 1, mentions[e].end());
        out.lexicon.push_back(convgraph::make_entity("E" + std::to_string(e), mentions[e][0], aliases));
    }
    const std::size_t n = 1 + rng() % max_instances;
    for (std::size_t i = 0; i < n; ++i) {
        std::string text;
        std::size_t count = 0;
        const std::size_t pieces = 1 + rng() % 6;
        for (std::size_t p = 0; p < pieces; ++p) {
            std::string piece;
            if (rng() % 3 == 0) {
                const std::size_t e = rng() % mentions.size();
                piece = mentions[e][rng() % mentions[e].size()];
                ++out.spans["E" + std::to_string(e)];
            } else {
                piece = filler[rng() % filler.size()];
            }
            for (char c : piece) count += c == ' ';
            ++count;
            text += (text.empty() ? "" : " ") + piece;
        }
        convgraph::Evidence ev;
        ev.evidence_id = "ev" + std::to_string(i);
        ev.source_kind = convgraph::SourceKind::Text;
        ev.payload = convgraph::SentencePayload{text};
        ev.linearized = text;
        out.instances.push_back(ev);
        out.tokens += count;
        out.chain_edges += count - 1;
    }
    return out;
}

inline convgraph::Vocab vocab_for(const EvidenceSet& set) {
    std::vector<std::string> texts;
    for (const auto& e : set.instances) texts.push_back(e.linearized);
    return convgraph::Vocab::build(texts);
}

}  // namespace gen
