#pragma once
// Toy decoder-only language model that consumes embedding rows directly, so graph node
// embeddings can be injected between prompt segments. Query/key/value projections carry
// LoRA adapters; every other weight is frozen.

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "convgraph/graph.hpp"
#include "convgraph/tensor.hpp"

namespace convgraph {

struct LmConfig {
    std::size_t vocab_size = 0;
    std::size_t d_model = 64;
    std::size_t layers = 2;
    std::size_t heads = 2;
    std::size_t d_ff = 256;
    double embed_std = 0.5;
    double position_scale = 0.1;  // sinusoidal position signal added to the input rows
};

struct TransformerBlock {
    Matrix ln1_gain, ln1_bias;  // 1 x d
    Matrix wq, wk, wv, wo;      // d x d, y = x W^T
    Matrix ln2_gain, ln2_bias;  // 1 x d
    Matrix ff_in, ff_in_bias;   // d_ff x d, 1 x d_ff
    Matrix ff_out, ff_out_bias; // d x d_ff, 1 x d
};

struct ToyLmParams {
    Matrix token_embeddings;  // |vocab| x d, tied with the output projection
    std::vector<TransformerBlock> blocks;
    Matrix final_gain, final_bias;
    std::size_t heads = 2;
    double position_scale = 0.1;

    static ToyLmParams init(const LmConfig& config, Rng& rng);
    std::size_t d_model() const { return token_embeddings.cols(); }
    std::size_t vocab_size() const { return token_embeddings.rows(); }
};

// Every tensor of the base model, named, in a fixed order.
void for_each_tensor(ToyLmParams& params, const std::function<void(const std::string&, Matrix&)>& fn);

struct LoraAdapter {
    Matrix a;  // r x d_in
    Matrix b;  // d_out x r, zero at initialisation
    double alpha = 32.0;
    double dropout = 0.05;

    static LoraAdapter init(std::size_t d_in, std::size_t d_out, std::size_t rank, double alpha, double dropout, Rng& rng);
    std::size_t rank() const { return a.rows(); }
    double scale() const { return alpha / static_cast<double>(rank()); }
};

enum class Projection : std::size_t { Query = 0, Key = 1, Value = 2 };

// An empty adapter set runs the unadapted base model.
struct LoraAdapters {
    std::vector<std::array<LoraAdapter, 3>> layers;  // indexed by Projection

    static LoraAdapters init(const ToyLmParams& params, std::size_t rank, double alpha, double dropout, Rng& rng);
};

LoraAdapters zeros_like(const LoraAdapters& adapters);
void for_each_tensor(LoraAdapters& adapters, const std::function<void(const std::string&, Matrix&)>& fn);

struct LoraCache {
    Matrix adapter_input;  // input after adapter dropout
    Matrix keep;           // dropout multipliers, empty when no dropout was applied
    Matrix low;            // adapter_input A^T
};

// input W^T + (alpha / r) * drop(input) A^T B^T. Adapter dropout only when `train`.
Matrix lora_apply(const Matrix& base, const LoraAdapter& adapter, const Matrix& input, bool train = false,
                  Rng* rng = nullptr, LoraCache* cache = nullptr);

// Accumulates adapter gradients and adds dL/d(input) into `d_input`.
void lora_backward(const Matrix& base, const LoraAdapter& adapter, const LoraCache& cache, const Matrix& d_output,
                   LoraAdapter& grads, Matrix& d_input);

// Embed(Tok(text)).
Matrix embed_tokens(const std::string& text, const Vocab& vocab, const ToyLmParams& params);
Matrix embed_ids(const std::vector<TokenId>& ids, const ToyLmParams& params);

enum class LogitRows { All, Completion, Last };

struct LmOptions {
    bool train = false;
    Rng* rng = nullptr;
    LogitRows rows = LogitRows::All;
};

struct LayerNormCache {
    Matrix normalized;  // x_hat
    std::vector<double> inv_std;
};

struct BlockCache {
    Matrix input;
    LayerNormCache ln1;
    Matrix attn_in;
    std::array<LoraCache, 3> lora;
    Matrix q, k, v;
    std::vector<Matrix> probs;  // per head, T x T (lower triangle used)
    Matrix context;
    Matrix mid;
    LayerNormCache ln2;
    Matrix ff_in;   // layer-normed input of the feed-forward
    Matrix hidden;  // pre-activation
    Matrix act;     // GELU(hidden)
};

struct LmCache {
    std::vector<BlockCache> blocks;
    Matrix final_input;
    LayerNormCache final_ln;
    std::vector<std::size_t> logit_rows;
    Matrix probs;  // softmax of the loss rows, aligned with loss_rows
    std::vector<std::size_t> loss_rows;
    std::vector<TokenId> loss_targets;
};

struct LmOutput {
    Matrix logits;                       // one row per entry of logit_rows
    std::vector<std::size_t> logit_rows; // sequence positions of the logit rows
    double loss = 0.0;                   // mean completion cross-entropy (0 when no targets given)
};

// Next-token prediction over H. targets[p] is the token expected after position p
// (|targets| = |H| - 1) and completion_mask[p] selects the positions that carry loss.
LmOutput lm_forward(const Matrix& embeddings, const std::vector<TokenId>& targets,
                    const std::vector<bool>& completion_mask, const ToyLmParams& params,
                    const LoraAdapters& adapters, const LmOptions& options = {}, LmCache* cache = nullptr);

// Logits only (no loss).
LmOutput lm_logits(const Matrix& embeddings, const ToyLmParams& params, const LoraAdapters& adapters,
                   LogitRows rows = LogitRows::All);

// Backward from the completion loss recorded in `cache`. Accumulates adapter gradients
// and returns dL/dH.
Matrix lm_backward(const LmCache& cache, const ToyLmParams& params, const LoraAdapters& adapters,
                   LoraAdapters& grads);

}  // namespace convgraph
