#pragma once
// Generated datasets for the training experiments: a small overfit set and a two-hop
// lookup task whose answer is only reachable through a shared bridge entity.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "convgraph/evidence.hpp"
#include "convgraph/graph.hpp"
#include "convgraph/trainer.hpp"

namespace convgraph {

struct SyntheticDataset {
    Vocab vocab;
    std::vector<EntityRef> lexicon;
    std::vector<TrainingExample> train;
    std::vector<TrainingExample> test;
};

// `count` examples, each a one- or two-instance graph with a distinct question and a
// one- or two-token answer. Everything is in `train`.
SyntheticDataset make_overfit_dataset(std::size_t count = 20, std::uint64_t seed = 0);

struct TwoHopOptions {
    std::size_t examples = 200;
    std::size_t test_examples = 40;  // held out from the tail of the generated list
    std::size_t pairs = 3;           // (subject, bridge) / (value, bridge) instance pairs per example
    std::size_t subjects = 4;
    std::size_t bridges = 4;
    std::size_t values = 4;
    std::uint64_t seed = 0;
    EntityLinkMode link_mode = EntityLinkMode::Heads;
};

// Each example holds instances "s_i b_i" and "v_i b_i" for `pairs` distinct triples,
// shuffled. Only bridge tokens are lexicon entities. The question names s_1; the
// answer is v_1. The generated instances are identical for every link mode.
SyntheticDataset make_two_hop_dataset(const TwoHopOptions& options);

// Fraction of examples whose greedy answer equals the gold answer after folding.
double exact_match(const std::vector<TrainingExample>& examples, const ModelParams& params, const Vocab& vocab);

}  // namespace convgraph
