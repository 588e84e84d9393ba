#pragma once
// GATv2 encoder over an evidence graph, with exact reverse-mode gradients.
//
// For each head h and edge j -> i:
//   psi(x_i, x_j) = a_h . LeakyReLU(W_h [x_i ; x_j])
//   alpha_ij      = softmax over the in-neighbours of i
//   x_i'          = sigma(sum_j alpha_ij W_h^src x_j)
// W_h is a single d_head x 2 d_in map over the concatenated (target, source) pair;
// messages use its source half. Heads are concatenated in intermediate layers and
// averaged in the last one, so the encoder maps d -> d.

#include <cstddef>
#include <vector>

#include "convgraph/graph.hpp"
#include "convgraph/tensor.hpp"

namespace convgraph {

enum class HeadCombine { Concat, Average };
enum class Activation { Elu, Identity };

// |vocab| x d node-embedding table, separate from the language model's own embeddings.
struct NodeEmbeddingTable {
    Matrix matrix;
    std::size_t dim() const { return matrix.cols(); }
};

struct GatHeadParams {
    Matrix weight;     // d_head x 2 d_in, columns [target | source]
    Matrix attention;  // 1 x d_head
};

struct GatLayerParams {
    std::vector<GatHeadParams> heads;
    double leaky_slope = 0.2;
    Activation activation = Activation::Elu;

    std::size_t input_dim() const { return heads.empty() ? 0 : heads.front().weight.cols() / 2; }
    std::size_t head_dim() const { return heads.empty() ? 0 : heads.front().weight.rows(); }
    std::size_t output_dim(HeadCombine combine) const {
        return combine == HeadCombine::Concat ? head_dim() * heads.size() : head_dim();
    }
};

struct GatParams {
    std::vector<GatLayerParams> layers;
    double dropout = 0.5;

    // `layers` layers of `heads` heads mapping dim -> dim. Intermediate layers use
    // d_head = dim / heads (concatenated), the last layer d_head = dim (averaged).
    static GatParams init(std::size_t dim, std::size_t layers, std::size_t heads, Rng& rng, double leaky_slope = 0.2,
                          Activation activation = Activation::Elu, double dropout = 0.5);

    HeadCombine combine_for(std::size_t layer) const {
        return layer + 1 == layers.size() ? HeadCombine::Average : HeadCombine::Concat;
    }
};

GatParams zeros_like(const GatParams& params);

struct Edge {
    std::size_t src = 0;
    std::size_t dst = 0;
};

std::vector<Edge> message_edges(const EvidenceGraph& graph);

// In-edges grouped by target node. Construction fails if a node has no in-edge.
class InEdgeIndex {
public:
    InEdgeIndex() = default;
    InEdgeIndex(std::size_t node_count, const std::vector<Edge>& edges);

    std::size_t node_count() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
    std::size_t begin(std::size_t node) const { return offsets_[node]; }
    std::size_t end(std::size_t node) const { return offsets_[node + 1]; }
    // Position p in grouped order -> source node / original edge index.
    std::size_t source(std::size_t p) const { return sources_[p]; }
    std::size_t edge(std::size_t p) const { return order_[p]; }
    std::size_t edge_count() const { return order_.size(); }

private:
    std::vector<std::size_t> offsets_;
    std::vector<std::size_t> sources_;
    std::vector<std::size_t> order_;
};

// Row i = table row of node i's token.
Matrix init_node_embeddings(const EvidenceGraph& graph, const NodeEmbeddingTable& table);

// Attention coefficients alpha for every edge (aligned with `edges`), no dropout.
std::vector<double> attention_coefficients(const Matrix& x, const std::vector<Edge>& edges,
                                           const GatLayerParams& layer, std::size_t head);

struct GatHeadCache {
    Matrix target;     // n x d_head, W^tgt x_i
    Matrix source;     // n x d_head, W^src x_j
    Matrix pre;        // E x d_head, target_i + source_j in grouped edge order
    std::vector<double> alpha;
    std::vector<double> keep;  // dropout multiplier per grouped edge
    Matrix output;     // n x d_head after the activation
};

struct GatLayerCache {
    Matrix input;
    InEdgeIndex index;
    HeadCombine combine = HeadCombine::Concat;
    std::vector<GatHeadCache> heads;
};

// Dropout (probability `dropout`) is applied to attention coefficients only when `train` is set.
Matrix gat_layer_forward(const Matrix& x, const std::vector<Edge>& edges, const GatLayerParams& layer,
                         HeadCombine combine, bool train = false, double dropout = 0.0, Rng* rng = nullptr,
                         GatLayerCache* cache = nullptr);

// Accumulates parameter gradients into `grads` and returns dL/dx.
Matrix gat_layer_backward(const GatLayerCache& cache, const GatLayerParams& layer, const Matrix& d_out,
                          GatLayerParams& grads);

struct GatForwardState {
    std::vector<TokenId> token_ids;
    std::vector<GatLayerCache> layers;
};

Matrix gat_forward_features(const Matrix& x, const std::vector<Edge>& edges, const GatParams& params, bool train,
                            Rng* rng, GatForwardState* state);

// H_g: one output row per graph node, in node_idx order.
Matrix gat_forward(const EvidenceGraph& graph, const GatParams& params, const NodeEmbeddingTable& table,
                   bool train = false, Rng* rng = nullptr, GatForwardState* state = nullptr);

// Backward through all layers; returns dL/d(initial node embeddings).
Matrix gat_backward_features(const GatForwardState& state, const GatParams& params, const Matrix& d_out,
                             GatParams& grads);

// Also scatters the input gradient into the table rows of each node's token.
void gat_backward(const GatForwardState& state, const GatParams& params, const Matrix& d_out, GatParams& grads,
                  Matrix& table_grad);

}  // namespace convgraph
