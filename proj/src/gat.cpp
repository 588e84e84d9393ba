#include "convgraph/gat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "convgraph/error.hpp"

namespace convgraph {

GatParams GatParams::init(std::size_t dim, std::size_t layers, std::size_t heads, Rng& rng, double leaky_slope,
                          Activation activation, double dropout) {
    if (heads == 0) throw InvalidInput("GAT needs at least one head");
    if (layers > 1 && dim % heads != 0) throw InvalidInput("GAT dimension must be divisible by the head count");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidInput("GAT dropout must lie in [0, 1)");
    GatParams params;
    params.dropout = dropout;
    for (std::size_t l = 0; l < layers; ++l) {
        const bool last = l + 1 == layers;
        const std::size_t head_dim = last ? dim : dim / heads;
        GatLayerParams layer;
        layer.leaky_slope = leaky_slope;
        layer.activation = activation;
        const double w_std = std::sqrt(2.0 / static_cast<double>(2 * dim + head_dim));
        const double a_std = std::sqrt(2.0 / static_cast<double>(head_dim + 1));
        for (std::size_t h = 0; h < heads; ++h) {
            layer.heads.push_back({Matrix::randn(head_dim, 2 * dim, w_std, rng), Matrix::randn(1, head_dim, a_std, rng)});
        }
        params.layers.push_back(std::move(layer));
    }
    return params;
}

GatParams zeros_like(const GatParams& params) {
    GatParams out = params;
    for (auto& layer : out.layers) {
        for (auto& head : layer.heads) {
            head.weight.fill(0.0);
            head.attention.fill(0.0);
        }
    }
    return out;
}

std::vector<Edge> message_edges(const EvidenceGraph& graph) {
    std::vector<Edge> edges;
    edges.reserve(graph.edges.size());
    for (const auto& e : graph.edges) edges.push_back({e.src, e.dst});
    return edges;
}

InEdgeIndex::InEdgeIndex(std::size_t node_count, const std::vector<Edge>& edges) {
    offsets_.assign(node_count + 1, 0);
    for (const auto& e : edges) {
        if (e.src >= node_count || e.dst >= node_count) throw InvalidState("edge endpoint out of range");
        ++offsets_[e.dst + 1];
    }
    for (std::size_t i = 0; i < node_count; ++i) {
        if (offsets_[i + 1] == 0) throw InvalidState("node " + std::to_string(i) + " has no incoming edge");
        offsets_[i + 1] += offsets_[i];
    }
    sources_.resize(edges.size());
    order_.resize(edges.size());
    auto cursor = offsets_;
    for (std::size_t k = 0; k < edges.size(); ++k) {
        const std::size_t p = cursor[edges[k].dst]++;
        sources_[p] = edges[k].src;
        order_[p] = k;
    }
}

Matrix init_node_embeddings(const EvidenceGraph& graph, const NodeEmbeddingTable& table) {
    Matrix x(graph.nodes.size(), table.dim());
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        const TokenId id = graph.nodes[i].token_id;
        if (id >= table.matrix.rows()) {
            throw InvalidState("node " + std::to_string(i) + " token id " + std::to_string(id) +
                               " outside the node-embedding table");
        }
        std::copy_n(table.matrix.row(id).begin(), table.dim(), x.row(i).begin());
    }
    return x;
}

namespace {

double leaky(double v, double slope) { return v > 0.0 ? v : slope * v; }
double leaky_grad(double v, double slope) { return v > 0.0 ? 1.0 : slope; }

double activate(double v, Activation act) {
    if (act == Activation::Identity) return v;
    return v > 0.0 ? v : std::expm1(v);
}

// Derivative expressed through the activation output.
double activate_grad(double out, Activation act) {
    if (act == Activation::Identity) return 1.0;
    return out > 0.0 ? 1.0 : out + 1.0;
}

// Splits W_h into its target (first d_in columns) and source halves applied to every node.
void project(const Matrix& x, const Matrix& weight, Matrix& target, Matrix& source) {
    const std::size_t d_in = x.cols();
    const std::size_t d_head = weight.rows();
    target = Matrix(x.rows(), d_head);
    source = Matrix(x.rows(), d_head);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto xi = x.row(i);
        for (std::size_t c = 0; c < d_head; ++c) {
            const auto w = weight.row(c);
            double t = 0.0, s = 0.0;
            for (std::size_t p = 0; p < d_in; ++p) {
                t += w[p] * xi[p];
                s += w[d_in + p] * xi[p];
            }
            target(i, c) = t;
            source(i, c) = s;
        }
    }
}

// Fills pre-activations and softmax coefficients for one head in grouped edge order.
void head_attention(const InEdgeIndex& index, const GatHeadParams& head, double slope, const Matrix& target,
                    const Matrix& source, Matrix& pre, std::vector<double>& alpha) {
    const std::size_t d_head = head.weight.rows();
    pre = Matrix(index.edge_count(), d_head);
    alpha.assign(index.edge_count(), 0.0);
    const auto a = head.attention.row(0);
    for (std::size_t i = 0; i < index.node_count(); ++i) {
        double max_score = -std::numeric_limits<double>::infinity();
        for (std::size_t p = index.begin(i); p < index.end(i); ++p) {
            const std::size_t j = index.source(p);
            double score = 0.0;
            for (std::size_t c = 0; c < d_head; ++c) {
                const double z = target(i, c) + source(j, c);
                pre(p, c) = z;
                score += a[c] * leaky(z, slope);
            }
            alpha[p] = score;
            max_score = std::max(max_score, score);
        }
        double total = 0.0;
        for (std::size_t p = index.begin(i); p < index.end(i); ++p) {
            alpha[p] = std::exp(alpha[p] - max_score);
            total += alpha[p];
        }
        for (std::size_t p = index.begin(i); p < index.end(i); ++p) alpha[p] /= total;
    }
}

void check_layer(const Matrix& x, const GatLayerParams& layer) {
    if (layer.heads.empty()) throw InvalidState("GAT layer has no heads");
    for (const auto& head : layer.heads) {
        if (head.weight.cols() != 2 * x.cols()) {
            throw InvalidState("GAT layer expects input dimension " + std::to_string(head.weight.cols() / 2) +
                               ", got " + std::to_string(x.cols()));
        }
        require_shape(head.attention, 1, head.weight.rows(), "GAT attention vector");
        if (head.weight.rows() != layer.head_dim()) throw InvalidState("GAT heads disagree on dimension");
    }
}

}  // namespace

std::vector<double> attention_coefficients(const Matrix& x, const std::vector<Edge>& edges,
                                           const GatLayerParams& layer, std::size_t head) {
    check_layer(x, layer);
    if (head >= layer.heads.size()) throw InvalidInput("attention_coefficients: head out of range");
    const InEdgeIndex index(x.rows(), edges);
    Matrix target, source, pre;
    std::vector<double> grouped;
    project(x, layer.heads[head].weight, target, source);
    head_attention(index, layer.heads[head], layer.leaky_slope, target, source, pre, grouped);
    std::vector<double> alpha(edges.size());
    for (std::size_t p = 0; p < grouped.size(); ++p) alpha[index.edge(p)] = grouped[p];
    return alpha;
}

Matrix gat_layer_forward(const Matrix& x, const std::vector<Edge>& edges, const GatLayerParams& layer,
                         HeadCombine combine, bool train, double dropout, Rng* rng, GatLayerCache* cache) {
    check_layer(x, layer);
    GatLayerCache local;
    GatLayerCache& c = cache ? *cache : local;
    c.input = x;
    c.index = InEdgeIndex(x.rows(), edges);
    c.combine = combine;
    c.heads.assign(layer.heads.size(), {});

    const std::size_t n = x.rows();
    const std::size_t d_head = layer.head_dim();
    const std::size_t heads = layer.heads.size();
    Matrix out(n, layer.output_dim(combine));
    const bool use_dropout = train && dropout > 0.0;
    if (use_dropout && rng == nullptr) throw InvalidState("GAT dropout requires a random generator");
    std::bernoulli_distribution keep_dist(1.0 - dropout);

    for (std::size_t h = 0; h < heads; ++h) {
        auto& hc = c.heads[h];
        project(x, layer.heads[h].weight, hc.target, hc.source);
        head_attention(c.index, layer.heads[h], layer.leaky_slope, hc.target, hc.source, hc.pre, hc.alpha);
        hc.keep.assign(c.index.edge_count(), 1.0);
        if (use_dropout) {
            for (auto& k : hc.keep) k = keep_dist(*rng) ? 1.0 / (1.0 - dropout) : 0.0;
        }
        hc.output = Matrix(n, d_head);
        for (std::size_t i = 0; i < n; ++i) {
            auto row = hc.output.row(i);
            for (std::size_t p = c.index.begin(i); p < c.index.end(i); ++p) {
                const double weight = hc.alpha[p] * hc.keep[p];
                if (weight == 0.0) continue;
                const auto src = hc.source.row(c.index.source(p));
                for (std::size_t k = 0; k < d_head; ++k) row[k] += weight * src[k];
            }
            for (auto& v : row) v = activate(v, layer.activation);
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < d_head; ++k) {
                if (combine == HeadCombine::Concat) {
                    out(i, h * d_head + k) = hc.output(i, k);
                } else {
                    out(i, k) += hc.output(i, k) / static_cast<double>(heads);
                }
            }
        }
    }
    return out;
}

Matrix gat_layer_backward(const GatLayerCache& cache, const GatLayerParams& layer, const Matrix& d_out,
                          GatLayerParams& grads) {
    const Matrix& x = cache.input;
    const std::size_t n = x.rows();
    const std::size_t d_in = x.cols();
    const std::size_t d_head = layer.head_dim();
    const std::size_t heads = layer.heads.size();
    require_shape(d_out, n, layer.output_dim(cache.combine), "GAT layer output gradient");
    const auto& index = cache.index;
    Matrix d_x(n, d_in);

    for (std::size_t h = 0; h < heads; ++h) {
        const auto& hc = cache.heads[h];
        const auto& params = layer.heads[h];
        auto& g = grads.heads[h];
        const auto a = params.attention.row(0);

        // Gradient w.r.t. the pre-activation aggregate of this head.
        Matrix d_agg(n, d_head);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < d_head; ++k) {
                const double upstream = cache.combine == HeadCombine::Concat
                                            ? d_out(i, h * d_head + k)
                                            : d_out(i, k) / static_cast<double>(heads);
                d_agg(i, k) = upstream * activate_grad(hc.output(i, k), layer.activation);
            }
        }

        Matrix d_target(n, d_head);
        Matrix d_source(n, d_head);
        std::vector<double> d_alpha(index.edge_count(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto dg = d_agg.row(i);
            for (std::size_t p = index.begin(i); p < index.end(i); ++p) {
                const std::size_t j = index.source(p);
                const double weight = hc.alpha[p] * hc.keep[p];
                const auto src = hc.source.row(j);
                auto dsrc = d_source.row(j);
                double dot = 0.0;
                for (std::size_t k = 0; k < d_head; ++k) {
                    dsrc[k] += weight * dg[k];
                    dot += dg[k] * src[k];
                }
                d_alpha[p] = dot * hc.keep[p];
            }
            // Softmax backward over the in-neighbourhood of i.
            double weighted = 0.0;
            for (std::size_t p = index.begin(i); p < index.end(i); ++p) weighted += hc.alpha[p] * d_alpha[p];
            for (std::size_t p = index.begin(i); p < index.end(i); ++p) {
                const double d_score = hc.alpha[p] * (d_alpha[p] - weighted);
                if (d_score == 0.0) continue;
                const std::size_t j = index.source(p);
                const auto z = hc.pre.row(p);
                auto dtgt = d_target.row(i);
                auto dsrc = d_source.row(j);
                auto da = g.attention.row(0);
                for (std::size_t k = 0; k < d_head; ++k) {
                    da[k] += d_score * leaky(z[k], layer.leaky_slope);
                    const double dz = d_score * a[k] * leaky_grad(z[k], layer.leaky_slope);
                    dtgt[k] += dz;
                    dsrc[k] += dz;
                }
            }
        }

        // W = [W_tgt | W_src]; target = x W_tgt^T, source = x W_src^T.
        for (std::size_t k = 0; k < d_head; ++k) {
            auto gw = g.weight.row(k);
            const auto w = params.weight.row(k);
            for (std::size_t i = 0; i < n; ++i) {
                const double dt = d_target(i, k);
                const double ds = d_source(i, k);
                if (dt == 0.0 && ds == 0.0) continue;
                const auto xi = x.row(i);
                auto dxi = d_x.row(i);
                for (std::size_t p = 0; p < d_in; ++p) {
                    gw[p] += dt * xi[p];
                    gw[d_in + p] += ds * xi[p];
                    dxi[p] += dt * w[p] + ds * w[d_in + p];
                }
            }
        }
    }
    return d_x;
}

Matrix gat_forward_features(const Matrix& x, const std::vector<Edge>& edges, const GatParams& params, bool train,
                            Rng* rng, GatForwardState* state) {
    if (state) state->layers.assign(params.layers.size(), {});
    Matrix current = x;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        current = gat_layer_forward(current, edges, params.layers[l], params.combine_for(l), train, params.dropout, rng,
                                    state ? &state->layers[l] : nullptr);
    }
    return current;
}

Matrix gat_forward(const EvidenceGraph& graph, const GatParams& params, const NodeEmbeddingTable& table, bool train,
                   Rng* rng, GatForwardState* state) {
    const Matrix x = init_node_embeddings(graph, table);
    if (state) {
        state->token_ids.clear();
        for (const auto& node : graph.nodes) state->token_ids.push_back(node.token_id);
    }
    if (graph.nodes.empty()) {
        if (state) state->layers.clear();
        return x;
    }
    return gat_forward_features(x, message_edges(graph), params, train, rng, state);
}

Matrix gat_backward_features(const GatForwardState& state, const GatParams& params, const Matrix& d_out,
                             GatParams& grads) {
    Matrix grad = d_out;
    for (std::size_t l = state.layers.size(); l-- > 0;) {
        grad = gat_layer_backward(state.layers[l], params.layers[l], grad, grads.layers[l]);
    }
    return grad;
}

void gat_backward(const GatForwardState& state, const GatParams& params, const Matrix& d_out, GatParams& grads,
                  Matrix& table_grad) {
    const Matrix d_x = gat_backward_features(state, params, d_out, grads);
    require_shape(d_x, state.token_ids.size(), table_grad.cols(), "GAT input gradient");
    for (std::size_t i = 0; i < state.token_ids.size(); ++i) {
        auto row = table_grad.row(state.token_ids[i]);
        const auto g = d_x.row(i);
        for (std::size_t k = 0; k < row.size(); ++k) row[k] += g[k];
    }
}

}  // namespace convgraph
