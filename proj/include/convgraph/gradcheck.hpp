#pragma once
// Five-point central finite-difference checks of the analytic gradients.

#include <cstddef>
#include <cstdint>
#include <string>

#include "convgraph/graph.hpp"
#include "convgraph/trainer.hpp"

namespace convgraph {

struct GradCheckResult {
    double max_relative_error = 0.0;
    double max_absolute_error = 0.0;
    std::size_t entries = 0;
    std::string worst;  // tensor name and flat index of the largest relative error
};

// A step whose stencil straddles a LeakyReLU kink gives a wrong estimate, so each entry is
// retried with steps step, step/10, ... >= min_step until one agrees within `accept`; the
// best estimate is reported. A wrong analytic gradient disagrees at every step.
struct GradCheckOptions {
    double step = 1e-4;
    double min_step = 1e-7;
    double accept = 1e-7;
    // Relative error = |analytic - numeric| / max(|analytic| + |numeric|, floor).
    double floor = 1e-5;
};

struct RandomGraph {
    Vocab vocab;
    EvidenceGraph graph;
};

// Chains of 1-4 tokens over a small word list, entity-linked where words repeat as entities.
RandomGraph random_evidence_graph(std::size_t nodes, std::uint64_t seed);

// GAT plus node table under L = sum(R .* GAT(x)) for a fixed random R, no dropout.
GradCheckResult gat_gradcheck(std::size_t nodes, std::uint64_t seed, const GradCheckOptions& options = {});

// Completion loss through the LM, the injected rows, the GAT and the node table, no dropout.
// LoRA B matrices are randomised first so every adapter path carries gradient.
GradCheckResult full_gradcheck(std::size_t nodes, std::uint64_t seed, const GradCheckOptions& options = {});

}  // namespace convgraph
