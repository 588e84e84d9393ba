#include "convgraph/lm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "convgraph/error.hpp"

namespace convgraph {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

Matrix ones(std::size_t cols) { return Matrix(1, cols, 1.0); }

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, LayerNormCache& cache) {
    const std::size_t d = x.cols();
    Matrix y(x.rows(), d);
    cache.normalized = Matrix(x.rows(), d);
    cache.inv_std.assign(x.rows(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto row = x.row(i);
        double mean = 0.0;
        for (double v : row) mean += v;
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (double v : row) var += (v - mean) * (v - mean);
        var /= static_cast<double>(d);
        const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
        cache.inv_std[i] = inv_std;
        for (std::size_t c = 0; c < d; ++c) {
            const double xhat = (row[c] - mean) * inv_std;
            cache.normalized(i, c) = xhat;
            y(i, c) = xhat * gain(0, c) + bias(0, c);
        }
    }
    return y;
}

Matrix layer_norm_backward(const Matrix& d_y, const LayerNormCache& cache, const Matrix& gain) {
    const std::size_t d = d_y.cols();
    Matrix d_x(d_y.rows(), d);
    std::vector<double> d_xhat(d);
    for (std::size_t i = 0; i < d_y.rows(); ++i) {
        double mean_d = 0.0, mean_dx = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            d_xhat[c] = d_y(i, c) * gain(0, c);
            mean_d += d_xhat[c];
            mean_dx += d_xhat[c] * cache.normalized(i, c);
        }
        mean_d /= static_cast<double>(d);
        mean_dx /= static_cast<double>(d);
        for (std::size_t c = 0; c < d; ++c) {
            d_x(i, c) = cache.inv_std[i] * (d_xhat[c] - mean_d - cache.normalized(i, c) * mean_dx);
        }
    }
    return d_x;
}

double gelu(double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); }

double gelu_grad(double v) {
    const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
    return cdf + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
}

void add_bias(Matrix& m, const Matrix& bias) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto row = m.row(i);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias(0, c);
    }
}

void add_positions(Matrix& x, double scale) {
    if (scale == 0.0) return;
    const std::size_t d = x.cols();
    for (std::size_t pos = 0; pos < x.rows(); ++pos) {
        for (std::size_t c = 0; c < d; ++c) {
            const double exponent = static_cast<double>(2 * (c / 2)) / static_cast<double>(d);
            const double angle = static_cast<double>(pos) / std::pow(10000.0, exponent);
            x(pos, c) += scale * (c % 2 == 0 ? std::sin(angle) : std::cos(angle));
        }
    }
}

// Causal multi-head attention; fills per-head probabilities and the concatenated context.
void attention_forward(const Matrix& q, const Matrix& k, const Matrix& v, std::size_t heads,
                       std::vector<Matrix>& probs, Matrix& context) {
    const std::size_t t = q.rows();
    const std::size_t d = q.cols();
    const std::size_t dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    probs.assign(heads, Matrix(t, t));
    context = Matrix(t, d);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * dh;
        auto& p = probs[h];
        for (std::size_t i = 0; i < t; ++i) {
            const double* qi = q.row(i).data() + off;
            double max_score = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j <= i; ++j) {
                const double* kj = k.row(j).data() + off;
                double s = 0.0;
                for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
                s *= scale;
                p(i, j) = s;
                max_score = std::max(max_score, s);
            }
            double total = 0.0;
            for (std::size_t j = 0; j <= i; ++j) {
                p(i, j) = std::exp(p(i, j) - max_score);
                total += p(i, j);
            }
            double* ci = context.row(i).data() + off;
            for (std::size_t j = 0; j <= i; ++j) {
                p(i, j) /= total;
                const double* vj = v.row(j).data() + off;
                const double w = p(i, j);
                for (std::size_t c = 0; c < dh; ++c) ci[c] += w * vj[c];
            }
        }
    }
}

void attention_backward(const Matrix& q, const Matrix& k, const Matrix& v, const std::vector<Matrix>& probs,
                        const Matrix& d_context, Matrix& d_q, Matrix& d_k, Matrix& d_v) {
    const std::size_t t = q.rows();
    const std::size_t d = q.cols();
    const std::size_t heads = probs.size();
    const std::size_t dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    d_q = Matrix(t, d);
    d_k = Matrix(t, d);
    d_v = Matrix(t, d);
    std::vector<double> d_p(t);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * dh;
        const auto& p = probs[h];
        for (std::size_t i = 0; i < t; ++i) {
            const double* dci = d_context.row(i).data() + off;
            double weighted = 0.0;
            for (std::size_t j = 0; j <= i; ++j) {
                const double* vj = v.row(j).data() + off;
                double* dvj = d_v.row(j).data() + off;
                double s = 0.0;
                for (std::size_t c = 0; c < dh; ++c) {
                    s += dci[c] * vj[c];
                    dvj[c] += p(i, j) * dci[c];
                }
                d_p[j] = s;
                weighted += p(i, j) * s;
            }
            const double* qi = q.row(i).data() + off;
            double* dqi = d_q.row(i).data() + off;
            for (std::size_t j = 0; j <= i; ++j) {
                const double d_s = p(i, j) * (d_p[j] - weighted) * scale;
                if (d_s == 0.0) continue;
                const double* kj = k.row(j).data() + off;
                double* dkj = d_k.row(j).data() + off;
                for (std::size_t c = 0; c < dh; ++c) {
                    dqi[c] += d_s * kj[c];
                    dkj[c] += d_s * qi[c];
                }
            }
        }
    }
}

}  // namespace

ToyLmParams ToyLmParams::init(const LmConfig& config, Rng& rng) {
    if (config.vocab_size < 3) throw InvalidInput("LM vocabulary must include the reserved tokens");
    if (config.heads == 0 || config.d_model % config.heads != 0) {
        throw InvalidInput("d_model must be divisible by the attention head count");
    }
    const std::size_t d = config.d_model;
    const double w_std = 1.0 / std::sqrt(static_cast<double>(d));
    ToyLmParams params;
    params.heads = config.heads;
    params.position_scale = config.position_scale;
    params.token_embeddings = Matrix::randn(config.vocab_size, d, config.embed_std, rng);
    for (std::size_t l = 0; l < config.layers; ++l) {
        TransformerBlock block;
        block.ln1_gain = ones(d);
        block.ln1_bias = Matrix(1, d);
        block.wq = Matrix::randn(d, d, w_std, rng);
        block.wk = Matrix::randn(d, d, w_std, rng);
        block.wv = Matrix::randn(d, d, w_std, rng);
        block.wo = Matrix::randn(d, d, w_std, rng);
        block.ln2_gain = ones(d);
        block.ln2_bias = Matrix(1, d);
        block.ff_in = Matrix::randn(config.d_ff, d, w_std, rng);
        block.ff_in_bias = Matrix(1, config.d_ff);
        block.ff_out = Matrix::randn(d, config.d_ff, 1.0 / std::sqrt(static_cast<double>(config.d_ff)), rng);
        block.ff_out_bias = Matrix(1, d);
        params.blocks.push_back(std::move(block));
    }
    params.final_gain = ones(d);
    params.final_bias = Matrix(1, d);
    return params;
}

void for_each_tensor(ToyLmParams& params, const std::function<void(const std::string&, Matrix&)>& fn) {
    fn("lm.token_embeddings", params.token_embeddings);
    for (std::size_t l = 0; l < params.blocks.size(); ++l) {
        auto& b = params.blocks[l];
        const std::string p = "lm.blocks." + std::to_string(l) + ".";
        fn(p + "ln1_gain", b.ln1_gain);
        fn(p + "ln1_bias", b.ln1_bias);
        fn(p + "wq", b.wq);
        fn(p + "wk", b.wk);
        fn(p + "wv", b.wv);
        fn(p + "wo", b.wo);
        fn(p + "ln2_gain", b.ln2_gain);
        fn(p + "ln2_bias", b.ln2_bias);
        fn(p + "ff_in", b.ff_in);
        fn(p + "ff_in_bias", b.ff_in_bias);
        fn(p + "ff_out", b.ff_out);
        fn(p + "ff_out_bias", b.ff_out_bias);
    }
    fn("lm.final_gain", params.final_gain);
    fn("lm.final_bias", params.final_bias);
}

LoraAdapter LoraAdapter::init(std::size_t d_in, std::size_t d_out, std::size_t rank, double alpha, double dropout,
                              Rng& rng) {
    if (rank == 0) throw InvalidInput("LoRA rank must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidInput("LoRA dropout must lie in [0, 1)");
    return LoraAdapter{Matrix::randn(rank, d_in, 1.0 / std::sqrt(static_cast<double>(d_in)), rng), Matrix(d_out, rank),
                       alpha, dropout};
}

LoraAdapters LoraAdapters::init(const ToyLmParams& params, std::size_t rank, double alpha, double dropout, Rng& rng) {
    LoraAdapters adapters;
    const std::size_t d = params.d_model();
    for (std::size_t l = 0; l < params.blocks.size(); ++l) {
        adapters.layers.push_back({LoraAdapter::init(d, d, rank, alpha, dropout, rng),
                                   LoraAdapter::init(d, d, rank, alpha, dropout, rng),
                                   LoraAdapter::init(d, d, rank, alpha, dropout, rng)});
    }
    return adapters;
}

LoraAdapters zeros_like(const LoraAdapters& adapters) {
    LoraAdapters out = adapters;
    for (auto& layer : out.layers) {
        for (auto& adapter : layer) {
            adapter.a.fill(0.0);
            adapter.b.fill(0.0);
        }
    }
    return out;
}

void for_each_tensor(LoraAdapters& adapters, const std::function<void(const std::string&, Matrix&)>& fn) {
    static constexpr std::array<const char*, 3> kNames{"q", "k", "v"};
    for (std::size_t l = 0; l < adapters.layers.size(); ++l) {
        for (std::size_t p = 0; p < 3; ++p) {
            const std::string prefix = "lora." + std::to_string(l) + "." + kNames[p] + ".";
            fn(prefix + "a", adapters.layers[l][p].a);
            fn(prefix + "b", adapters.layers[l][p].b);
        }
    }
}

Matrix lora_apply(const Matrix& base, const LoraAdapter& adapter, const Matrix& input, bool train, Rng* rng,
                  LoraCache* cache) {
    if (base.cols() != input.cols() || adapter.a.cols() != input.cols() || adapter.b.rows() != base.rows() ||
        adapter.b.cols() != adapter.a.rows()) {
        throw InvalidState("lora_apply: inconsistent shapes");
    }
    Matrix out;
    matmul_nt(input, base, out);

    LoraCache local;
    LoraCache& c = cache ? *cache : local;
    c.keep = Matrix();
    if (train && adapter.dropout > 0.0) {
        if (rng == nullptr) throw InvalidState("LoRA dropout requires a random generator");
        std::bernoulli_distribution keep_dist(1.0 - adapter.dropout);
        c.keep = Matrix(input.rows(), input.cols());
        c.adapter_input = input;
        auto keep = c.keep.values();
        auto values = c.adapter_input.values();
        for (std::size_t i = 0; i < keep.size(); ++i) {
            keep[i] = keep_dist(*rng) ? 1.0 / (1.0 - adapter.dropout) : 0.0;
            values[i] *= keep[i];
        }
    } else {
        c.adapter_input = input;
    }
    matmul_nt(c.adapter_input, adapter.a, c.low);
    Matrix update;
    matmul_nt(c.low, adapter.b, update);
    const double scale = adapter.scale();
    auto o = out.values();
    auto u = update.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += scale * u[i];
    return out;
}

void lora_backward(const Matrix& base, const LoraAdapter& adapter, const LoraCache& cache, const Matrix& d_output,
                   LoraAdapter& grads, Matrix& d_input) {
    const double scale = adapter.scale();
    matmul_nn(d_output, base, d_input, true);

    Matrix d_b;
    matmul_tn(d_output, cache.low, d_b);
    auto gb = grads.b.values();
    auto db = d_b.values();
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += scale * db[i];

    Matrix d_low;
    matmul_nn(d_output, adapter.b, d_low);
    for (auto& v : d_low.values()) v *= scale;
    matmul_tn(d_low, cache.adapter_input, grads.a, true);

    Matrix d_adapter_input;
    matmul_nn(d_low, adapter.a, d_adapter_input);
    if (!cache.keep.empty()) {
        auto dv = d_adapter_input.values();
        auto keep = cache.keep.values();
        for (std::size_t i = 0; i < dv.size(); ++i) dv[i] *= keep[i];
    }
    add_inplace(d_input, d_adapter_input);
}

Matrix embed_ids(const std::vector<TokenId>& ids, const ToyLmParams& params) {
    Matrix out(ids.size(), params.d_model());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= params.vocab_size()) throw InvalidState("token id outside the LM vocabulary");
        const auto src = params.token_embeddings.row(ids[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

Matrix embed_tokens(const std::string& text, const Vocab& vocab, const ToyLmParams& params) {
    std::vector<TokenId> ids;
    for (const auto& token : tokenize(text, vocab)) ids.push_back(token.id);
    return embed_ids(ids, params);
}

LmOutput lm_forward(const Matrix& embeddings, const std::vector<TokenId>& targets,
                    const std::vector<bool>& completion_mask, const ToyLmParams& params,
                    const LoraAdapters& adapters, const LmOptions& options, LmCache* cache) {
    const std::size_t t = embeddings.rows();
    const std::size_t d = params.d_model();
    if (embeddings.cols() != d) {
        throw InvalidState("lm_forward: embedding width " + std::to_string(embeddings.cols()) + " != model width " +
                           std::to_string(d));
    }
    const bool adapted = !adapters.layers.empty();
    if (adapted && adapters.layers.size() != params.blocks.size()) {
        throw InvalidState("lm_forward: adapter count mismatch");
    }

    const bool with_loss = !completion_mask.empty();
    std::vector<std::size_t> loss_rows;
    if (with_loss) {
        if (t == 0 || targets.size() != t - 1 || completion_mask.size() != t - 1) {
            throw InvalidInput("lm_forward: targets and mask must have |H| - 1 entries");
        }
        for (std::size_t p = 0; p < completion_mask.size(); ++p) {
            if (completion_mask[p]) loss_rows.push_back(p);
        }
        if (loss_rows.empty()) throw InvalidInput("lm_forward: no completion tokens, loss undefined");
    }

    LmCache local;
    LmCache& c = cache ? *cache : local;
    c.blocks.assign(params.blocks.size(), {});

    Matrix x = embeddings;
    add_positions(x, params.position_scale);
    for (std::size_t l = 0; l < params.blocks.size(); ++l) {
        const auto& block = params.blocks[l];
        auto& bc = c.blocks[l];
        bc.input = x;
        bc.attn_in = layer_norm(x, block.ln1_gain, block.ln1_bias, bc.ln1);
        if (adapted) {
            const auto& adapter = adapters.layers[l];
            bc.q = lora_apply(block.wq, adapter[0], bc.attn_in, options.train, options.rng, &bc.lora[0]);
            bc.k = lora_apply(block.wk, adapter[1], bc.attn_in, options.train, options.rng, &bc.lora[1]);
            bc.v = lora_apply(block.wv, adapter[2], bc.attn_in, options.train, options.rng, &bc.lora[2]);
        } else {
            matmul_nt(bc.attn_in, block.wq, bc.q);
            matmul_nt(bc.attn_in, block.wk, bc.k);
            matmul_nt(bc.attn_in, block.wv, bc.v);
        }
        attention_forward(bc.q, bc.k, bc.v, params.heads, bc.probs, bc.context);
        matmul_nt(bc.context, block.wo, bc.mid);
        add_inplace(bc.mid, x);
        bc.ff_in = layer_norm(bc.mid, block.ln2_gain, block.ln2_bias, bc.ln2);
        matmul_nt(bc.ff_in, block.ff_in, bc.hidden);
        add_bias(bc.hidden, block.ff_in_bias);
        bc.act = bc.hidden;
        for (auto& v : bc.act.values()) v = gelu(v);
        Matrix ff;
        matmul_nt(bc.act, block.ff_out, ff);
        add_bias(ff, block.ff_out_bias);
        x = bc.mid;
        add_inplace(x, ff);
    }
    c.final_input = x;
    const Matrix z = layer_norm(x, params.final_gain, params.final_bias, c.final_ln);

    auto logits_for = [&](const std::vector<std::size_t>& rows) {
        Matrix selected(rows.size(), d);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            std::copy(z.row(rows[r]).begin(), z.row(rows[r]).end(), selected.row(r).begin());
        }
        Matrix logits;
        matmul_nt(selected, params.token_embeddings, logits);
        return logits;
    };

    LmOutput output;
    switch (options.rows) {
        case LogitRows::All:
            for (std::size_t p = 0; p < t; ++p) output.logit_rows.push_back(p);
            break;
        case LogitRows::Completion:
            output.logit_rows = loss_rows;
            break;
        case LogitRows::Last:
            if (t > 0) output.logit_rows.push_back(t - 1);
            break;
    }
    output.logits = logits_for(output.logit_rows);
    c.logit_rows = output.logit_rows;

    c.loss_rows = loss_rows;
    c.loss_targets.clear();
    if (with_loss) {
        const Matrix loss_logits = options.rows == LogitRows::Completion ? output.logits : logits_for(loss_rows);
        c.probs = Matrix(loss_rows.size(), params.vocab_size());
        double total = 0.0;
        for (std::size_t r = 0; r < loss_rows.size(); ++r) {
            const TokenId target = targets[loss_rows[r]];
            if (target >= params.vocab_size()) throw InvalidState("target token outside the LM vocabulary");
            c.loss_targets.push_back(target);
            const auto row = loss_logits.row(r);
            const double max_logit = *std::max_element(row.begin(), row.end());
            double sum = 0.0;
            for (double v : row) sum += std::exp(v - max_logit);
            const double log_norm = max_logit + std::log(sum);
            for (std::size_t v = 0; v < row.size(); ++v) c.probs(r, v) = std::exp(row[v] - log_norm);
            total += log_norm - row[target];
        }
        output.loss = total / static_cast<double>(loss_rows.size());
    }
    return output;
}

LmOutput lm_logits(const Matrix& embeddings, const ToyLmParams& params, const LoraAdapters& adapters, LogitRows rows) {
    LmOptions options;
    options.rows = rows;
    return lm_forward(embeddings, {}, {}, params, adapters, options, nullptr);
}

Matrix lm_backward(const LmCache& cache, const ToyLmParams& params, const LoraAdapters& adapters,
                   LoraAdapters& grads) {
    if (cache.loss_rows.empty()) throw InvalidState("lm_backward: forward pass recorded no loss");
    const std::size_t t = cache.final_input.rows();
    const std::size_t d = params.d_model();
    const double inv_count = 1.0 / static_cast<double>(cache.loss_rows.size());

    Matrix d_z(t, d);
    std::vector<double> d_logit(params.vocab_size());
    for (std::size_t r = 0; r < cache.loss_rows.size(); ++r) {
        for (std::size_t v = 0; v < d_logit.size(); ++v) d_logit[v] = cache.probs(r, v) * inv_count;
        d_logit[cache.loss_targets[r]] -= inv_count;
        auto dz = d_z.row(cache.loss_rows[r]);
        for (std::size_t v = 0; v < d_logit.size(); ++v) {
            const auto e = params.token_embeddings.row(v);
            const double g = d_logit[v];
            for (std::size_t c = 0; c < d; ++c) dz[c] += g * e[c];
        }
    }
    Matrix d_x = layer_norm_backward(d_z, cache.final_ln, params.final_gain);

    for (std::size_t l = params.blocks.size(); l-- > 0;) {
        const auto& block = params.blocks[l];
        const auto& bc = cache.blocks[l];

        Matrix d_act;
        matmul_nn(d_x, block.ff_out, d_act);
        auto da = d_act.values();
        auto hidden = bc.hidden.values();
        for (std::size_t i = 0; i < da.size(); ++i) da[i] *= gelu_grad(hidden[i]);
        Matrix d_ff_in;
        matmul_nn(d_act, block.ff_in, d_ff_in);
        Matrix d_mid = d_x;
        add_inplace(d_mid, layer_norm_backward(d_ff_in, bc.ln2, block.ln2_gain));

        Matrix d_context;
        matmul_nn(d_mid, block.wo, d_context);
        Matrix d_q, d_k, d_v;
        attention_backward(bc.q, bc.k, bc.v, bc.probs, d_context, d_q, d_k, d_v);

        Matrix d_attn_in(t, d);
        if (adapters.layers.empty()) {
            matmul_nn(d_q, block.wq, d_attn_in, true);
            matmul_nn(d_k, block.wk, d_attn_in, true);
            matmul_nn(d_v, block.wv, d_attn_in, true);
        } else {
            lora_backward(block.wq, adapters.layers[l][0], bc.lora[0], d_q, grads.layers[l][0], d_attn_in);
            lora_backward(block.wk, adapters.layers[l][1], bc.lora[1], d_k, grads.layers[l][1], d_attn_in);
            lora_backward(block.wv, adapters.layers[l][2], bc.lora[2], d_v, grads.layers[l][2], d_attn_in);
        }

        d_x = d_mid;
        add_inplace(d_x, layer_norm_backward(d_attn_in, bc.ln1, block.ln1_gain));
    }
    return d_x;
}

}  // namespace convgraph
