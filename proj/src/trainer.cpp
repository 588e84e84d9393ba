#include "convgraph/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "convgraph/error.hpp"

namespace convgraph {

namespace {

constexpr const char* kCheckpointFormat = "convgraph-checkpoint";
constexpr int kCheckpointVersion = 1;

std::vector<TokenId> token_ids(const std::string& text, const Vocab& vocab) {
    std::vector<TokenId> ids;
    for (const auto& token : tokenize(text, vocab)) ids.push_back(token.id);
    return ids;
}

void visit_gat(GatParams& gat, const TensorVisitor& fn) {
    for (std::size_t l = 0; l < gat.layers.size(); ++l) {
        for (std::size_t h = 0; h < gat.layers[l].heads.size(); ++h) {
            const std::string base = "gat." + std::to_string(l) + "." + std::to_string(h);
            fn(base + ".weight", gat.layers[l].heads[h].weight);
            fn(base + ".attention", gat.layers[l].heads[h].attention);
        }
    }
}

std::string parameter_norms(ModelParams& params) {
    std::ostringstream out;
    out << std::setprecision(6);
    bool first = true;
    for_each_trainable(params, [&](const std::string& name, Matrix& m) {
        out << (first ? "" : ", ") << name << "=" << frobenius_norm(m);
        first = false;
    });
    return out.str();
}

nlohmann::json config_json(const ModelConfig& c) {
    return {{"vocab_size", c.lm.vocab_size},
            {"d_model", c.lm.d_model},
            {"lm_layers", c.lm.layers},
            {"lm_heads", c.lm.heads},
            {"d_ff", c.lm.d_ff},
            {"embed_std", c.lm.embed_std},
            {"position_scale", c.lm.position_scale},
            {"gat_layers", c.gat_layers},
            {"gat_heads", c.gat_heads},
            {"gat_dropout", c.gat_dropout},
            {"leaky_slope", c.leaky_slope},
            {"gat_activation", c.gat_activation == Activation::Elu ? "elu" : "identity"},
            {"lora_rank", c.lora_rank},
            {"lora_alpha", c.lora_alpha},
            {"lora_dropout", c.lora_dropout}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.lm.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.lm.d_model = j.at("d_model").get<std::size_t>();
    c.lm.layers = j.at("lm_layers").get<std::size_t>();
    c.lm.heads = j.at("lm_heads").get<std::size_t>();
    c.lm.d_ff = j.at("d_ff").get<std::size_t>();
    c.lm.embed_std = j.at("embed_std").get<double>();
    c.lm.position_scale = j.at("position_scale").get<double>();
    c.gat_layers = j.at("gat_layers").get<std::size_t>();
    c.gat_heads = j.at("gat_heads").get<std::size_t>();
    c.gat_dropout = j.at("gat_dropout").get<double>();
    c.leaky_slope = j.at("leaky_slope").get<double>();
    const auto act = j.at("gat_activation").get<std::string>();
    if (act != "elu" && act != "identity") throw ParseError("unknown GAT activation '" + act + "'", 0);
    c.gat_activation = act == "elu" ? Activation::Elu : Activation::Identity;
    c.lora_rank = j.at("lora_rank").get<std::size_t>();
    c.lora_alpha = j.at("lora_alpha").get<double>();
    c.lora_dropout = j.at("lora_dropout").get<double>();
    return c;
}

}  // namespace

ModelParams ModelParams::init(ModelConfig config, std::uint64_t seed) {
    if (config.lm.vocab_size == 0) throw InvalidInput("model vocabulary is empty");
    Rng rng(seed);
    ModelParams params;
    params.config = config;
    params.lm = ToyLmParams::init(config.lm, rng);
    params.nodes.matrix = params.lm.token_embeddings;
    params.gat = GatParams::init(config.lm.d_model, config.gat_layers, config.gat_heads, rng, config.leaky_slope,
                                 config.gat_activation, config.gat_dropout);
    params.lora = LoraAdapters::init(params.lm, config.lora_rank, config.lora_alpha, config.lora_dropout, rng);
    return params;
}

ModelGradients ModelGradients::zeros_for(const ModelParams& params) {
    return {zeros_like(params.gat), Matrix::zeros_like(params.nodes.matrix), zeros_like(params.lora)};
}

void ModelGradients::clear() {
    for_each_trainable(*this, [](const std::string&, Matrix& m) { m.fill(0.0); });
}

void for_each_trainable(ModelParams& params, const TensorVisitor& fn) {
    visit_gat(params.gat, fn);
    fn("nodes", params.nodes.matrix);
    for_each_tensor(params.lora, fn);
}

void for_each_trainable(ModelGradients& grads, const TensorVisitor& fn) {
    visit_gat(grads.gat, fn);
    fn("nodes", grads.nodes);
    for_each_tensor(grads.lora, fn);
}

void for_each_tensor(ModelParams& params, const TensorVisitor& fn) {
    for_each_tensor(params.lm, fn);
    for_each_trainable(params, fn);
}

ExampleSequence build_sequence(const TrainingExample& example, const Matrix& graph_embeddings,
                               const ToyLmParams& params, const Vocab& vocab) {
    ExampleSequence seq;
    seq.input = assemble_embeddings(example.prefix, graph_embeddings, example.suffix, params, vocab);
    std::vector<TokenId> completion = token_ids(example.answer, vocab);
    completion.push_back(Vocab::kEos);

    const std::size_t context = seq.input.embeddings.rows();
    if (context == 0) throw InvalidInput("example '" + example.id + "' has an empty prompt and graph");
    const Matrix completion_rows = embed_ids(completion, params);
    const std::size_t total = context + completion.size();
    Matrix h(total, params.d_model());
    for (std::size_t r = 0; r < context; ++r) {
        std::copy(seq.input.embeddings.row(r).begin(), seq.input.embeddings.row(r).end(), h.row(r).begin());
    }
    for (std::size_t r = 0; r < completion.size(); ++r) {
        std::copy(completion_rows.row(r).begin(), completion_rows.row(r).end(), h.row(context + r).begin());
    }
    seq.input.embeddings = std::move(h);

    // Positions before the last context row predict prompt or graph rows and carry no target.
    seq.targets.assign(total - 1, Vocab::kPad);
    seq.completion_mask.assign(total - 1, false);
    for (std::size_t i = context - 1; i + 1 < total; ++i) {
        seq.targets[i] = completion[i + 1 - context];
        seq.completion_mask[i] = true;
    }
    return seq;
}

double example_loss(const TrainingExample& example, const ModelParams& params, const Vocab& vocab, bool train,
                    Rng* rng, ModelGradients* grads) {
    if (train && !rng) throw InvalidInput("training forward pass needs an RNG");
    GatForwardState gat_state;
    const Matrix h_g = gat_forward(example.graph, params.gat, params.nodes, train, rng, grads ? &gat_state : nullptr);
    const ExampleSequence seq = build_sequence(example, h_g, params.lm, vocab);

    LmOptions options;
    options.train = train;
    options.rng = rng;
    options.rows = LogitRows::Completion;
    LmCache cache;
    const LmOutput out = lm_forward(seq.input.embeddings, seq.targets, seq.completion_mask, params.lm, params.lora,
                                    options, grads ? &cache : nullptr);
    if (!grads || !std::isfinite(out.loss)) return out.loss;

    const Matrix d_h = lm_backward(cache, params.lm, params.lora, grads->lora);
    const std::size_t n = seq.input.graph_end - seq.input.graph_begin;
    Matrix d_graph(n, params.lm.d_model());
    for (std::size_t r = 0; r < n; ++r) {
        const auto src = d_h.row(seq.input.graph_begin + r);
        std::copy(src.begin(), src.end(), d_graph.row(r).begin());
    }
    gat_backward(gat_state, params.gat, d_graph, grads->gat, grads->nodes);
    return out.loss;
}

AdamOptimizer::AdamOptimizer(ModelParams& params, const TrainConfig& config) : config_(config) {
    if (!(config.lr >= 0.0) || !std::isfinite(config.lr)) throw InvalidInput("learning rate must be finite and >= 0");
    for_each_trainable(params, [&](const std::string&, Matrix& m) {
        first_.push_back(Matrix::zeros_like(m));
        second_.push_back(Matrix::zeros_like(m));
    });
}

void AdamOptimizer::step(ModelParams& params, ModelGradients& grads, double grad_scale) {
    ++steps_;
    const double t = static_cast<double>(steps_);
    const double correction1 = 1.0 - std::pow(config_.beta1, t);
    const double correction2 = 1.0 - std::pow(config_.beta2, t);

    std::vector<Matrix*> gradient_tensors;
    for_each_trainable(grads, [&](const std::string&, Matrix& g) { gradient_tensors.push_back(&g); });
    std::size_t index = 0;
    for_each_trainable(params, [&](const std::string& name, Matrix& p) {
        const Matrix& g = *gradient_tensors.at(index);
        require_shape(g, p.rows(), p.cols(), name.c_str());
        auto m = first_[index].values();
        auto v = second_[index].values();
        auto pv = p.values();
        const auto gv = g.values();
        for (std::size_t i = 0; i < pv.size(); ++i) {
            const double gi = gv[i] * grad_scale;
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
            const double update = config_.lr * (m[i] / correction1) / (std::sqrt(v[i] / correction2) + config_.eps);
            pv[i] -= update;
        }
        ++index;
    });
}

TrainResult train_loop(const std::vector<TrainingExample>& dataset, const TrainConfig& config, ModelParams& params,
                       const Vocab& vocab) {
    if (dataset.empty()) throw InvalidInput("training dataset is empty");
    if (config.accumulation < 1) throw InvalidInput("gradient accumulation must be >= 1");
    if (config.batch_size != 1) throw InvalidInput("only batch size 1 is supported");

    Rng rng(config.seed);
    AdamOptimizer optimizer(params, config);
    ModelGradients grads = ModelGradients::zeros_for(params);
    const double grad_scale = 1.0 / static_cast<double>(config.accumulation);

    TrainResult result;
    std::vector<std::size_t> order(dataset.size());
    std::size_t cursor = order.size();
    std::size_t pending = 0;
    while (optimizer.steps() < config.max_steps) {
        if (cursor == order.size()) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::shuffle(order.begin(), order.end(), rng);
            cursor = 0;
        }
        const TrainingExample& example = dataset[order[cursor++]];
        const double loss = example_loss(example, params, vocab, true, &rng, &grads);
        if (!std::isfinite(loss)) {
            throw TrainingAborted("non-finite loss at step " + std::to_string(optimizer.steps() + 1) + " on example '" +
                                  example.id + "'; parameter norms: " + parameter_norms(params));
        }
        result.trace.push_back({optimizer.steps() + 1, example.id, loss});
        if (++pending == config.accumulation) {
            optimizer.step(params, grads, grad_scale);
            grads.clear();
            pending = 0;
        }
    }
    result.steps = optimizer.steps();
    return result;
}

void write_loss_trace(const std::string& path, const std::vector<LossRecord>& trace) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write loss trace to " + path);
    out << "step,example_id,loss\n" << std::setprecision(17);
    for (const auto& r : trace) out << r.step << ',' << r.example_id << ',' << r.loss << '\n';
}

std::string answer(const EvidenceGraph& graph, const std::string& prefix, const std::string& suffix,
                   const ModelParams& params, const Vocab& vocab, std::size_t max_tokens) {
    const Matrix h_g = gat_forward(graph, params.gat, params.nodes);
    const AssembledInput input = assemble_embeddings(prefix, h_g, suffix, params.lm, vocab);
    if (input.embeddings.rows() == 0) return {};
    return generate(input.embeddings, params.lm, params.lora, vocab, max_tokens);
}

std::string checkpoint_json(const ModelParams& params) {
    nlohmann::json tensors = nlohmann::json::object();
    ModelParams snapshot = params;
    for_each_tensor(snapshot, [&](const std::string& name, Matrix& m) {
        tensors[name] = {{"shape", {m.rows(), m.cols()}},
                         {"data", std::vector<double>(m.values().begin(), m.values().end())}};
    });
    nlohmann::json j = {{"format", kCheckpointFormat},
                        {"version", kCheckpointVersion},
                        {"config", config_json(params.config)},
                        {"tensors", std::move(tensors)}};
    return j.dump() + "\n";
}

ModelParams checkpoint_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("checkpoint: ") + e.what(), e.byte);
    }
    try {
        if (j.at("format").get<std::string>() != kCheckpointFormat) throw ParseError("checkpoint: unknown format", 0);
        if (j.at("version").get<int>() != kCheckpointVersion) throw ParseError("checkpoint: unsupported version", 0);
        ModelParams params = ModelParams::init(config_from_json(j.at("config")), 0);
        const auto& tensors = j.at("tensors");
        std::size_t seen = 0;
        for_each_tensor(params, [&](const std::string& name, Matrix& m) {
            const auto it = tensors.find(name);
            if (it == tensors.end()) throw ParseError("checkpoint: missing tensor " + name, 0);
            const auto shape = it->at("shape").get<std::vector<std::size_t>>();
            const auto data = it->at("data").get<std::vector<double>>();
            if (shape.size() != 2 || shape[0] != m.rows() || shape[1] != m.cols() || data.size() != m.size()) {
                throw ParseError("checkpoint: shape mismatch for " + name, 0);
            }
            std::copy(data.begin(), data.end(), m.values().begin());
            ++seen;
        });
        if (seen != tensors.size()) throw ParseError("checkpoint: unexpected extra tensors", 0);
        return params;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("checkpoint: ") + e.what(), 0);
    }
}

void save_checkpoint(const std::string& path, const ModelParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write checkpoint to " + path);
    out << checkpoint_json(params);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot read checkpoint " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return checkpoint_from_json(buffer.str());
}

}  // namespace convgraph
