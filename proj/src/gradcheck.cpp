#include "convgraph/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "convgraph/error.hpp"

namespace convgraph {

namespace {

const std::vector<std::string> kWords = {"alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta"};

void compare(const std::string& name, Matrix& param, const Matrix& analytic, const std::function<double()>& loss,
             const GradCheckOptions& options, GradCheckResult& result) {
    auto values = param.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double saved = values[i];
        auto at = [&](double offset) {
            values[i] = saved + offset;
            return loss();
        };
        const double a = analytic.values()[i];
        double abs_err = std::numeric_limits<double>::infinity();
        double rel = abs_err;
        for (double h = options.step; h >= options.min_step; h /= 10.0) {
            const double numeric = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
            const double err = std::abs(a - numeric);
            if (err < abs_err) {
                abs_err = err;
                rel = err / std::max(std::abs(a) + std::abs(numeric), options.floor);
            }
            if (rel <= options.accept) break;
        }
        values[i] = saved;
        result.max_absolute_error = std::max(result.max_absolute_error, abs_err);
        if (rel > result.max_relative_error) {
            result.max_relative_error = rel;
            result.worst = name + "[" + std::to_string(i) + "]";
        }
        ++result.entries;
    }
}

}  // namespace

RandomGraph random_evidence_graph(std::size_t nodes, std::uint64_t seed) {
    if (nodes == 0) throw InvalidInput("gradient check needs at least one node");
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> word(0, kWords.size() - 1);
    std::uniform_int_distribution<std::size_t> length(1, 4);
    const std::vector<EntityRef> lexicon = {make_entity("E1", kWords[0]), make_entity("E2", kWords[1]),
                                            make_entity("E3", kWords[2])};

    std::vector<Evidence> instances;
    std::size_t remaining = nodes;
    while (remaining > 0) {
        const std::size_t len = std::min(remaining, length(rng));
        std::string text;
        for (std::size_t i = 0; i < len; ++i) text += (i ? " " : "") + kWords[word(rng)];
        Evidence e;
        e.evidence_id = "g" + std::to_string(instances.size());
        e.payload = SentencePayload{text};
        e.source_kind = SourceKind::Text;
        e.linearized = text;
        instances.push_back(std::move(e));
        remaining -= len;
    }
    RandomGraph out;
    out.vocab = Vocab::build(kWords);
    out.graph = build_graph(instances, lexicon, out.vocab).graph;
    return out;
}

GradCheckResult gat_gradcheck(std::size_t nodes, std::uint64_t seed, const GradCheckOptions& options) {
    const RandomGraph g = random_evidence_graph(nodes, seed);
    Rng rng(seed + 1);
    const std::size_t dim = 8;
    GatParams params = GatParams::init(dim, 2, 2, rng);
    NodeEmbeddingTable table{Matrix::randn(g.vocab.size(), dim, 1.0, rng)};
    const Matrix weights = Matrix::randn(nodes, dim, 1.0, rng);

    auto loss = [&] {
        const Matrix out = gat_forward(g.graph, params, table);
        double total = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) total += out.values()[i] * weights.values()[i];
        return total;
    };

    GatForwardState state;
    gat_forward(g.graph, params, table, false, nullptr, &state);
    GatParams grads = zeros_like(params);
    Matrix table_grad = Matrix::zeros_like(table.matrix);
    gat_backward(state, params, weights, grads, table_grad);

    GradCheckResult result;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        for (std::size_t h = 0; h < params.layers[l].heads.size(); ++h) {
            const std::string base = "gat." + std::to_string(l) + "." + std::to_string(h);
            compare(base + ".weight", params.layers[l].heads[h].weight, grads.layers[l].heads[h].weight, loss, options,
                    result);
            compare(base + ".attention", params.layers[l].heads[h].attention, grads.layers[l].heads[h].attention, loss,
                    options, result);
        }
    }
    compare("nodes", table.matrix, table_grad, loss, options, result);
    return result;
}

GradCheckResult full_gradcheck(std::size_t nodes, std::uint64_t seed, const GradCheckOptions& options) {
    const RandomGraph g = random_evidence_graph(nodes, seed);
    ModelConfig config;
    config.lm.vocab_size = g.vocab.size();
    config.lm.d_model = 8;
    config.lm.d_ff = 16;
    config.lora_rank = 2;
    config.lora_alpha = 4.0;
    ModelParams params = ModelParams::init(config, seed);
    Rng rng(seed + 2);
    for_each_tensor(params.lora, [&](const std::string& name, Matrix& m) {
        if (name.back() == 'b') m = Matrix::randn(m.rows(), m.cols(), 0.1, rng);
    });

    TrainingExample example;
    example.id = "gradcheck";
    example.graph = g.graph;
    example.prefix = "alpha beta";
    example.suffix = "gamma";
    example.answer = "delta epsilon";

    ModelGradients grads = ModelGradients::zeros_for(params);
    example_loss(example, params, g.vocab, false, nullptr, &grads);
    auto loss = [&] { return example_loss(example, params, g.vocab, false, nullptr, nullptr); };

    std::vector<std::pair<std::string, Matrix*>> analytic;
    for_each_trainable(grads, [&](const std::string& name, Matrix& m) { analytic.emplace_back(name, &m); });
    GradCheckResult result;
    std::size_t index = 0;
    for_each_trainable(params, [&](const std::string& name, Matrix& m) {
        compare(name, m, *analytic.at(index++).second, loss, options, result);
    });
    return result;
}

}  // namespace convgraph
