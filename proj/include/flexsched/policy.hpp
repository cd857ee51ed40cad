#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flexsched/environment.hpp"
#include "flexsched/optim.hpp"
#include "flexsched/rng.hpp"
#include "flexsched/tensor.hpp"

namespace flexsched {

class CacheError : public InvariantError {
public:
    explicit CacheError(const std::string& msg) : InvariantError(msg) {}
};

struct PolicyConfig {
    int layers = 2;
    int heads = 8;
    int dim = 128;
    int ffn_dim = 512;
    int head_hidden = 64;  // decision MLP: 3 layers x head_hidden
    double rope_base = 10000.0;
    std::string ffn_activation = "relu";  // or "tanh"
    bool use_kv_cache = false;
    bool critic_head = false;

    int head_dim() const { return dim / heads; }
    void validate() const;

    friend bool operator==(const PolicyConfig&, const PolicyConfig&) = default;
};

struct AttentionLayerParams {
    nn::Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    nn::Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    nn::Tensor norm1_gain, norm1_bias, norm2_gain, norm2_bias;
};

// All learnable weights. The edge-attention projection is one weight set
// reused across layers, heads, and the query/key/value roles.
struct PolicyParameters {
    nn::Tensor op_in_w, op_in_b;      // 2 -> dim
    nn::Tensor mach_in_w, mach_in_b;  // 1 -> dim
    nn::Tensor edge_attn_w, edge_attn_b;  // 1 -> head_dim
    std::vector<AttentionLayerParams> op_layers;
    std::vector<AttentionLayerParams> mach_layers;
    nn::Tensor edge_head_w, edge_head_b;  // 1 -> dim, decision-head edge embedding
    std::vector<nn::Tensor> head_w, head_b;      // [3d->h], [h->h], [h->1]
    std::vector<nn::Tensor> critic_w, critic_b;  // [2d->h], [h->h], [h->1]

    static PolicyParameters init(const PolicyConfig& config, Rng& rng);

    std::vector<std::pair<std::string, nn::Tensor>> named() const;
    std::vector<nn::Tensor> all() const;
    // Deep copy: fresh tensors with copied values (handles share storage).
    PolicyParameters clone() const;
};

struct PolicyOutput {
    std::vector<Action> actions;  // the feasible pairs, canonical order
    std::vector<double> probs;    // categorical over `actions`, sums to 1
    nn::Tensor log_probs;         // [k]; graph-connected while grads are enabled
    nn::Tensor value;             // scalar critic estimate; undefined without critic head
};

// Test taps into the forward pass.
struct ForwardTrace {
    nn::Tensor op_embed;    // [n, dim] final operation-branch embeddings
    nn::Tensor mach_embed;  // [m, dim]
    // Attention rows per (layer, head): op branch [n x n], machine branch
    // [m x (n+1)] with the self weight in the last column.
    std::vector<std::vector<double>> op_attention;
    std::vector<std::vector<double>> mach_attention;
};

// Dual-branch forward pass: operation self-attention (RoPE, hop mask),
// machine cross-attention over feasible operations (edge-in-attention with a
// self connection), then the pairwise decision MLP.
PolicyOutput policy_forward(const StateFeatures& features, const PolicyParameters& params,
                            const PolicyConfig& config, ForwardTrace* trace = nullptr);

// Incremental forward for multi-step decoding: operation-branch keys/values
// are recomputed only for operations whose inputs changed since the cached
// step. Pure inference (no gradient graph). Results match policy_forward
// within 1e-6.
struct KvCache {
    bool valid = false;
    uintptr_t instance_tag = 0;
    const void* params_tag = nullptr;
    std::vector<double> op_feat;             // inputs seen at caching time
    std::vector<uint8_t> scheduled;
    std::vector<std::vector<double>> h;      // per level 0..L: [n * dim]
    std::vector<std::vector<double>> keys;   // per layer 1..L: [n * dim], post-RoPE
    std::vector<std::vector<double>> values; // per layer 1..L: [n * dim]

    void reset() { valid = false; }
};

PolicyOutput policy_forward_cached(const StateFeatures& features, const PolicyParameters& params,
                                   const PolicyConfig& config, KvCache& cache);

// Versioned JSON checkpoint; round-trips bit-exactly.
void save_checkpoint(const std::string& path, const PolicyParameters& params,
                     const PolicyConfig& config,
                     const nn::Adam::State* optimizer_state = nullptr,
                     const std::string& note = "");
struct Checkpoint {
    PolicyConfig config;
    PolicyParameters params;
    std::optional<nn::Adam::State> optimizer_state;
    std::string note;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace flexsched
