#pragma once
// End-to-end model (GAT + node-embedding table + toy LM with LoRA), completion-only
// training with Adam and gradient accumulation, inference, and checkpoints.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "convgraph/gat.hpp"
#include "convgraph/graph.hpp"
#include "convgraph/injector.hpp"
#include "convgraph/lm.hpp"

namespace convgraph {

struct ModelConfig {
    LmConfig lm;
    std::size_t gat_layers = 2;
    std::size_t gat_heads = 2;
    double gat_dropout = 0.5;
    double leaky_slope = 0.2;
    Activation gat_activation = Activation::Elu;
    std::size_t lora_rank = 4;
    double lora_alpha = 32.0;
    double lora_dropout = 0.05;
};

struct ModelParams {
    ModelConfig config;
    GatParams gat;
    NodeEmbeddingTable nodes;
    ToyLmParams lm;
    LoraAdapters lora;

    // The node-embedding table starts as a copy of the LM token embeddings.
    static ModelParams init(ModelConfig config, std::uint64_t seed);
};

struct ModelGradients {
    GatParams gat;
    Matrix nodes;
    LoraAdapters lora;

    static ModelGradients zeros_for(const ModelParams& params);
    void clear();
};

using TensorVisitor = std::function<void(const std::string&, Matrix&)>;

// Trainable tensors (GAT, node table, LoRA) in a fixed order; the gradient overload
// visits the matching gradients in the same order.
void for_each_trainable(ModelParams& params, const TensorVisitor& fn);
void for_each_trainable(ModelGradients& grads, const TensorVisitor& fn);
void for_each_tensor(ModelParams& params, const TensorVisitor& fn);

struct TrainingExample {
    std::string id;
    EvidenceGraph graph;
    std::string prefix;
    std::string suffix;
    std::string answer;
};

struct ExampleSequence {
    AssembledInput input;
    std::vector<TokenId> targets;
    std::vector<bool> completion_mask;
};

// H = prefix (+) GAT(graph) (+) suffix (+) answer (+) eos; the mask covers the positions
// that predict the answer tokens and the closing eos.
ExampleSequence build_sequence(const TrainingExample& example, const Matrix& graph_embeddings,
                               const ToyLmParams& params, const Vocab& vocab);

// Completion loss of one example. With `grads` set, also back-propagates through the LM,
// the injected rows, the GAT and the node table, accumulating into `grads`.
double example_loss(const TrainingExample& example, const ModelParams& params, const Vocab& vocab, bool train,
                    Rng* rng, ModelGradients* grads);

struct TrainConfig {
    double lr = 5e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t batch_size = 1;
    std::size_t accumulation = 4;
    std::size_t max_steps = 100;
    std::uint64_t seed = 0;
};

class AdamOptimizer {
public:
    AdamOptimizer(ModelParams& params, const TrainConfig& config);
    // Applies one update using grads * grad_scale.
    void step(ModelParams& params, ModelGradients& grads, double grad_scale);
    std::size_t steps() const { return steps_; }

private:
    TrainConfig config_;
    std::vector<Matrix> first_;
    std::vector<Matrix> second_;
    std::size_t steps_ = 0;
};

struct LossRecord {
    std::size_t step = 0;
    std::string example_id;
    double loss = 0.0;
};

struct TrainResult {
    std::vector<LossRecord> trace;
    std::size_t steps = 0;
};

class TrainingAborted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Adam update after every `accumulation` examples (batch size 1), for `max_steps` updates.
// Examples are visited in a seeded shuffled order, reshuffled every epoch.
TrainResult train_loop(const std::vector<TrainingExample>& dataset, const TrainConfig& config, ModelParams& params,
                       const Vocab& vocab);

void write_loss_trace(const std::string& path, const std::vector<LossRecord>& trace);

// Greedy answer for a graph and prompt, no dropout.
std::string answer(const EvidenceGraph& graph, const std::string& prefix, const std::string& suffix,
                   const ModelParams& params, const Vocab& vocab, std::size_t max_tokens = 32);

// Versioned JSON tensor dump: {"format", "version", "config", "tensors": {name: {"shape", "data"}}}.
std::string checkpoint_json(const ModelParams& params);
ModelParams checkpoint_from_json(const std::string& text);
void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

}  // namespace convgraph
