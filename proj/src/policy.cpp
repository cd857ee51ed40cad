#include "flexsched/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

namespace flexsched {

using nn::Tensor;

void PolicyConfig::validate() const {
    if (layers < 1 || heads < 1 || dim < 1 || ffn_dim < 1 || head_hidden < 1) {
        throw ConfigError("policy config: dimensions must be positive");
    }
    if (dim % heads != 0) throw ConfigError("policy config: dim must be divisible by heads");
    if (head_dim() % 2 != 0) throw ConfigError("policy config: head dim must be even for RoPE");
    if (ffn_activation != "relu" && ffn_activation != "tanh") {
        throw ConfigError("policy config: unknown ffn activation " + ffn_activation);
    }
    if (rope_base <= 1.0) throw ConfigError("policy config: rope_base must exceed 1");
}

namespace {

Tensor uniform_param(std::vector<int> shape, int fan_in, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    int64_t n = 1;
    for (int d : shape) n *= d;
    std::vector<double> data(static_cast<size_t>(n));
    for (double& v : data) v = (rng.uniform_real() * 2.0 - 1.0) * bound;
    return Tensor::from(std::move(data), std::move(shape), true);
}

AttentionLayerParams init_layer(int dim, int ffn_dim, Rng& rng) {
    AttentionLayerParams p;
    p.wq = uniform_param({dim, dim}, dim, rng);
    p.bq = uniform_param({dim}, dim, rng);
    p.wk = uniform_param({dim, dim}, dim, rng);
    p.bk = uniform_param({dim}, dim, rng);
    p.wv = uniform_param({dim, dim}, dim, rng);
    p.bv = uniform_param({dim}, dim, rng);
    p.wo = uniform_param({dim, dim}, dim, rng);
    p.bo = uniform_param({dim}, dim, rng);
    p.ffn_w1 = uniform_param({dim, ffn_dim}, dim, rng);
    p.ffn_b1 = uniform_param({ffn_dim}, dim, rng);
    p.ffn_w2 = uniform_param({ffn_dim, dim}, ffn_dim, rng);
    p.ffn_b2 = uniform_param({dim}, ffn_dim, rng);
    p.norm1_gain = Tensor::from(std::vector<double>(dim, 1.0), {dim}, true);
    p.norm1_bias = Tensor::zeros({dim}, true);
    p.norm2_gain = Tensor::from(std::vector<double>(dim, 1.0), {dim}, true);
    p.norm2_bias = Tensor::zeros({dim}, true);
    return p;
}

void name_layer(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
                const AttentionLayerParams& p) {
    out.emplace_back(prefix + ".wq", p.wq);
    out.emplace_back(prefix + ".bq", p.bq);
    out.emplace_back(prefix + ".wk", p.wk);
    out.emplace_back(prefix + ".bk", p.bk);
    out.emplace_back(prefix + ".wv", p.wv);
    out.emplace_back(prefix + ".bv", p.bv);
    out.emplace_back(prefix + ".wo", p.wo);
    out.emplace_back(prefix + ".bo", p.bo);
    out.emplace_back(prefix + ".ffn_w1", p.ffn_w1);
    out.emplace_back(prefix + ".ffn_b1", p.ffn_b1);
    out.emplace_back(prefix + ".ffn_w2", p.ffn_w2);
    out.emplace_back(prefix + ".ffn_b2", p.ffn_b2);
    out.emplace_back(prefix + ".norm1_gain", p.norm1_gain);
    out.emplace_back(prefix + ".norm1_bias", p.norm1_bias);
    out.emplace_back(prefix + ".norm2_gain", p.norm2_gain);
    out.emplace_back(prefix + ".norm2_bias", p.norm2_bias);
}

}  // namespace

PolicyParameters PolicyParameters::init(const PolicyConfig& config, Rng& rng) {
    config.validate();
    PolicyParameters p;
    p.op_in_w = uniform_param({2, config.dim}, 2, rng);
    p.op_in_b = uniform_param({config.dim}, 2, rng);
    p.mach_in_w = uniform_param({1, config.dim}, 1, rng);
    p.mach_in_b = uniform_param({config.dim}, 1, rng);
    p.edge_attn_w = uniform_param({1, config.head_dim()}, 1, rng);
    p.edge_attn_b = uniform_param({config.head_dim()}, 1, rng);
    for (int l = 0; l < config.layers; ++l) {
        p.op_layers.push_back(init_layer(config.dim, config.ffn_dim, rng));
        p.mach_layers.push_back(init_layer(config.dim, config.ffn_dim, rng));
    }
    p.edge_head_w = uniform_param({1, config.dim}, 1, rng);
    p.edge_head_b = uniform_param({config.dim}, 1, rng);
    int in = 3 * config.dim;
    for (int j = 0; j < 3; ++j) {
        int out = j == 2 ? 1 : config.head_hidden;
        p.head_w.push_back(uniform_param({in, out}, in, rng));
        p.head_b.push_back(uniform_param({out}, in, rng));
        in = out;
    }
    if (config.critic_head) {
        in = 2 * config.dim;
        for (int j = 0; j < 3; ++j) {
            int out = j == 2 ? 1 : config.head_hidden;
            p.critic_w.push_back(uniform_param({in, out}, in, rng));
            p.critic_b.push_back(uniform_param({out}, in, rng));
            in = out;
        }
    }
    return p;
}

std::vector<std::pair<std::string, Tensor>> PolicyParameters::named() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("op_in.w", op_in_w);
    out.emplace_back("op_in.b", op_in_b);
    out.emplace_back("mach_in.w", mach_in_w);
    out.emplace_back("mach_in.b", mach_in_b);
    out.emplace_back("edge_attn.w", edge_attn_w);
    out.emplace_back("edge_attn.b", edge_attn_b);
    for (size_t l = 0; l < op_layers.size(); ++l) {
        name_layer(out, "op_layer" + std::to_string(l), op_layers[l]);
        name_layer(out, "mach_layer" + std::to_string(l), mach_layers[l]);
    }
    out.emplace_back("edge_head.w", edge_head_w);
    out.emplace_back("edge_head.b", edge_head_b);
    for (size_t j = 0; j < head_w.size(); ++j) {
        out.emplace_back("head" + std::to_string(j) + ".w", head_w[j]);
        out.emplace_back("head" + std::to_string(j) + ".b", head_b[j]);
    }
    for (size_t j = 0; j < critic_w.size(); ++j) {
        out.emplace_back("critic" + std::to_string(j) + ".w", critic_w[j]);
        out.emplace_back("critic" + std::to_string(j) + ".b", critic_b[j]);
    }
    return out;
}

std::vector<Tensor> PolicyParameters::all() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named()) out.push_back(t);
    return out;
}

namespace {

Tensor clone_tensor(const Tensor& t) {
    return Tensor::from(t.data(), t.shape(), t.requires_grad());
}

AttentionLayerParams clone_layer(const AttentionLayerParams& p) {
    AttentionLayerParams out;
    out.wq = clone_tensor(p.wq);
    out.bq = clone_tensor(p.bq);
    out.wk = clone_tensor(p.wk);
    out.bk = clone_tensor(p.bk);
    out.wv = clone_tensor(p.wv);
    out.bv = clone_tensor(p.bv);
    out.wo = clone_tensor(p.wo);
    out.bo = clone_tensor(p.bo);
    out.ffn_w1 = clone_tensor(p.ffn_w1);
    out.ffn_b1 = clone_tensor(p.ffn_b1);
    out.ffn_w2 = clone_tensor(p.ffn_w2);
    out.ffn_b2 = clone_tensor(p.ffn_b2);
    out.norm1_gain = clone_tensor(p.norm1_gain);
    out.norm1_bias = clone_tensor(p.norm1_bias);
    out.norm2_gain = clone_tensor(p.norm2_gain);
    out.norm2_bias = clone_tensor(p.norm2_bias);
    return out;
}

}  // namespace

PolicyParameters PolicyParameters::clone() const {
    PolicyParameters out;
    out.op_in_w = clone_tensor(op_in_w);
    out.op_in_b = clone_tensor(op_in_b);
    out.mach_in_w = clone_tensor(mach_in_w);
    out.mach_in_b = clone_tensor(mach_in_b);
    out.edge_attn_w = clone_tensor(edge_attn_w);
    out.edge_attn_b = clone_tensor(edge_attn_b);
    for (const auto& l : op_layers) out.op_layers.push_back(clone_layer(l));
    for (const auto& l : mach_layers) out.mach_layers.push_back(clone_layer(l));
    out.edge_head_w = clone_tensor(edge_head_w);
    out.edge_head_b = clone_tensor(edge_head_b);
    for (const auto& t : head_w) out.head_w.push_back(clone_tensor(t));
    for (const auto& t : head_b) out.head_b.push_back(clone_tensor(t));
    for (const auto& t : critic_w) out.critic_w.push_back(clone_tensor(t));
    for (const auto& t : critic_b) out.critic_b.push_back(clone_tensor(t));
    return out;
}

namespace {

Tensor activation(const Tensor& x, const PolicyConfig& config) {
    return config.ffn_activation == "tanh" ? nn::tanh_act(x) : nn::relu(x);
}

// Row-wise dot product of same-shaped matrices -> [r, 1].
Tensor rowdot(const Tensor& a, const Tensor& b) {
    Tensor ones = Tensor::from(std::vector<double>(a.cols(), 1.0), {a.cols(), 1});
    return nn::matmul(nn::mul(a, b), ones);
}

// Broadcast a column [r,1] across c columns.
Tensor broadcast_col(const Tensor& col, int c) {
    Tensor ones = Tensor::from(std::vector<double>(c, 1.0), {1, c});
    return nn::matmul(col, ones);
}

Tensor ffn_block(const Tensor& h, const AttentionLayerParams& lp, const PolicyConfig& config) {
    Tensor mid = activation(nn::linear(h, lp.ffn_w1, lp.ffn_b1), config);
    Tensor out = nn::linear(mid, lp.ffn_w2, lp.ffn_b2);
    return nn::layer_norm(nn::add(h, out), lp.norm2_gain, lp.norm2_bias);
}

// Self-attention over operations: RoPE on queries and keys, hop mask
// restricting each op to itself and its unscheduled same-job successors.
Tensor op_branch_layer(const Tensor& h, const AttentionLayerParams& lp, const StateFeatures& f,
                       const PolicyConfig& config, ForwardTrace* trace) {
    int dh = config.head_dim();
    double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    Tensor q_full = nn::linear(h, lp.wq, lp.bq);
    Tensor k_full = nn::linear(h, lp.wk, lp.bk);
    Tensor v_full = nn::linear(h, lp.wv, lp.bv);

    std::vector<Tensor> heads;
    for (int hd = 0; hd < config.heads; ++hd) {
        Tensor q = nn::rope(nn::slice_cols(q_full, hd * dh, dh), f.positions, config.rope_base);
        Tensor k = nn::rope(nn::slice_cols(k_full, hd * dh, dh), f.positions, config.rope_base);
        Tensor v = nn::slice_cols(v_full, hd * dh, dh);
        Tensor logits = nn::scale(nn::matmul(q, nn::transpose(k)), inv_sqrt);
        Tensor attn = nn::softmax_masked(logits, f.o2o_mask);
        if (trace) trace->op_attention.push_back(attn.data());
        heads.push_back(nn::matmul(attn, v));
    }
    Tensor merged = nn::linear(nn::concat_cols(heads), lp.wo, lp.bo);
    Tensor h1 = nn::layer_norm(nn::add(h, merged), lp.norm1_gain, lp.norm1_bias);
    return ffn_block(h1, lp, config);
}

// Cross-attention from machines to their eligible unscheduled operations.
// Edge projections of the scaled duration are added to queries, keys, and
// values (single shared weight set); each machine additionally attends to
// itself with plain q.k and no edge term.
Tensor mach_branch_layer(const Tensor& h_mach, const Tensor& h_op, const Tensor& edge_proj,
                         const AttentionLayerParams& lp, const StateFeatures& f,
                         const PolicyConfig& config, ForwardTrace* trace) {
    int n = f.num_ops;
    int m = f.num_machines;
    int dh = config.head_dim();
    double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    Tensor q_full = nn::linear(h_mach, lp.wq, lp.bq);
    Tensor ko_full = nn::linear(h_op, lp.wk, lp.bk);
    Tensor vo_full = nn::linear(h_op, lp.wv, lp.bv);
    // Machine self keys/values share the operation projections.
    Tensor km_full = nn::linear(h_mach, lp.wk, lp.bk);
    Tensor vm_full = nn::linear(h_mach, lp.wv, lp.bv);

    // Pair index p = mach * n + op, matching edge_proj rows.
    std::vector<int> mach_of_pair(static_cast<size_t>(m) * n);
    std::vector<int> op_of_pair(static_cast<size_t>(m) * n);
    for (int mm = 0; mm < m; ++mm) {
        for (int op = 0; op < n; ++op) {
            mach_of_pair[static_cast<size_t>(mm) * n + op] = mm;
            op_of_pair[static_cast<size_t>(mm) * n + op] = op;
        }
    }
    // Mask: eligible pairs plus the always-on self column.
    std::vector<uint8_t> mask(static_cast<size_t>(m) * (n + 1), 0);
    for (int mm = 0; mm < m; ++mm) {
        for (int op = 0; op < n; ++op) {
            mask[static_cast<size_t>(mm) * (n + 1) + op] = f.o2m(mm, op);
        }
        mask[static_cast<size_t>(mm) * (n + 1) + n] = 1;
    }
    // Constant selector that sums pair rows back into machine rows.
    std::vector<double> sel(static_cast<size_t>(m) * m * n, 0.0);
    for (int mm = 0; mm < m; ++mm) {
        for (int op = 0; op < n; ++op) {
            sel[static_cast<size_t>(mm) * m * n + static_cast<size_t>(mm) * n + op] = 1.0;
        }
    }
    Tensor selector = Tensor::from(std::move(sel), {m, m * n});

    std::vector<Tensor> heads;
    for (int hd = 0; hd < config.heads; ++hd) {
        Tensor q = nn::slice_cols(q_full, hd * dh, dh);
        Tensor ko = nn::slice_cols(ko_full, hd * dh, dh);
        Tensor vo = nn::slice_cols(vo_full, hd * dh, dh);
        Tensor km = nn::slice_cols(km_full, hd * dh, dh);
        Tensor vm = nn::slice_cols(vm_full, hd * dh, dh);

        Tensor qg = nn::add(nn::gather_rows(q, mach_of_pair), edge_proj);
        Tensor kg = nn::add(nn::gather_rows(ko, op_of_pair), edge_proj);
        Tensor pair_logits = nn::reshape(rowdot(qg, kg), {m, n});
        Tensor self_logits = rowdot(q, km);
        Tensor logits =
            nn::scale(nn::concat_cols(std::vector<Tensor>{pair_logits, self_logits}), inv_sqrt);
        Tensor attn = nn::softmax_masked(logits, mask);
        if (trace) trace->mach_attention.push_back(attn.data());

        Tensor a_ops = nn::slice_cols(attn, 0, n);
        Tensor a_self = nn::slice_cols(attn, n, 1);
        Tensor out = nn::matmul(a_ops, vo);
        // Edge share of the values: sum_op alpha(m,op) * e(m,op).
        Tensor w = nn::reshape(a_ops, {m * n, 1});
        Tensor edge_sum = nn::matmul(selector, nn::mul(edge_proj, broadcast_col(w, dh)));
        Tensor self_part = nn::mul(vm, broadcast_col(a_self, dh));
        heads.push_back(nn::add(nn::add(out, edge_sum), self_part));
    }
    Tensor merged = nn::linear(nn::concat_cols(heads), lp.wo, lp.bo);
    Tensor h1 = nn::layer_norm(nn::add(h_mach, merged), lp.norm1_gain, lp.norm1_bias);
    return ffn_block(h1, lp, config);
}

Tensor mlp3(const Tensor& x, const std::vector<Tensor>& w, const std::vector<Tensor>& b,
            const PolicyConfig& config) {
    Tensor h = activation(nn::linear(x, w[0], b[0]), config);
    h = activation(nn::linear(h, w[1], b[1]), config);
    return nn::linear(h, w[2], b[2]);
}

}  // namespace

PolicyOutput policy_forward(const StateFeatures& f, const PolicyParameters& params,
                            const PolicyConfig& config, ForwardTrace* trace) {
    config.validate();
    int n = f.num_ops;
    int m = f.num_machines;
    if (f.feasible.empty()) throw InvariantError("policy: empty feasible set");

    Tensor x_op = Tensor::from(f.op_feat, {n, 2});
    Tensor x_mach = Tensor::from(f.mach_feat, {m, 1});
    Tensor h_op = nn::linear(x_op, params.op_in_w, params.op_in_b);
    Tensor h_mach = nn::linear(x_mach, params.mach_in_w, params.mach_in_b);

    // Shared edge projection of scaled durations, one row per (machine, op)
    // pair; reused across layers, heads, and the q/k/v roles.
    Tensor edge_col = Tensor::from(f.edge_scaled, {m * n, 1});
    Tensor edge_proj = nn::linear(edge_col, params.edge_attn_w, params.edge_attn_b);

    for (int l = 0; l < config.layers; ++l) {
        h_op = op_branch_layer(h_op, params.op_layers[l], f, config, trace);
        h_mach =
            mach_branch_layer(h_mach, h_op, edge_proj, params.mach_layers[l], f, config, trace);
    }
    if (trace) {
        trace->op_embed = h_op;
        trace->mach_embed = h_mach;
    }

    int k = static_cast<int>(f.feasible.size());
    std::vector<int> op_idx(k), mach_idx(k);
    std::vector<double> durs(k);
    for (int i = 0; i < k; ++i) {
        op_idx[i] = f.feasible[i].op;
        mach_idx[i] = f.feasible[i].machine;
        durs[i] = f.edge(f.feasible[i].machine, f.feasible[i].op);
    }
    Tensor pair_in = nn::concat_cols(std::vector<Tensor>{
        nn::gather_rows(h_op, op_idx), nn::gather_rows(h_mach, mach_idx),
        nn::linear(Tensor::from(durs, {k, 1}), params.edge_head_w, params.edge_head_b)});
    Tensor logits = nn::reshape(mlp3(pair_in, params.head_w, params.head_b, config), {k});

    PolicyOutput out;
    out.actions = f.feasible;
    out.log_probs = nn::log_softmax(logits);
    out.probs.resize(k);
    for (int i = 0; i < k; ++i) {
        out.probs[i] = std::exp(out.log_probs.data()[i]);
        if (!std::isfinite(out.probs[i])) {
            throw TrainingError("policy: non-finite action probability");
        }
    }
    if (config.critic_head) {
        if (params.critic_w.size() != 3) throw ConfigError("policy: critic weights missing");
        std::vector<int> unscheduled;
        for (int a = 0; a < n; ++a) {
            if (!f.scheduled[a]) unscheduled.push_back(a);
        }
        Tensor pooled = nn::concat_cols(std::vector<Tensor>{
            nn::mean_rows(nn::gather_rows(h_op, unscheduled)), nn::mean_rows(h_mach)});
        out.value = nn::reshape(mlp3(pooled, params.critic_w, params.critic_b, config), {1});
    }
    return out;
}

// ---- cached inference path ---------------------------------------------------

namespace {

// Plain f64 helpers over row-major buffers (no gradient graph).
void linear_row(const double* x, int in, const Tensor& w, const Tensor& b, double* out) {
    int cols = w.cols();
    const std::vector<double>& wv = w.data();
    const std::vector<double>& bv = b.data();
    for (int j = 0; j < cols; ++j) out[j] = bv[j];
    for (int i = 0; i < in; ++i) {
        double xv = x[i];
        if (xv == 0.0) continue;
        const double* wrow = &wv[static_cast<size_t>(i) * cols];
        for (int j = 0; j < cols; ++j) out[j] += xv * wrow[j];
    }
}

void rope_row(double* x, int dh, int pos, double base) {
    for (int k2 = 0; k2 < dh / 2; ++k2) {
        double theta = pos * std::pow(base, -2.0 * k2 / dh);
        double c = std::cos(theta), s = std::sin(theta);
        double x0 = x[2 * k2], x1 = x[2 * k2 + 1];
        x[2 * k2] = x0 * c - x1 * s;
        x[2 * k2 + 1] = x0 * s + x1 * c;
    }
}

void layer_norm_row(double* x, int d, const Tensor& gain, const Tensor& bias, double eps = 1e-5) {
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += x[j];
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (x[j] - mu) * (x[j] - mu);
    var /= d;
    double inv = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < d; ++j) x[j] = (x[j] - mu) * inv * gain.data()[j] + bias.data()[j];
}

void activate_row(double* x, int d, const PolicyConfig& config) {
    if (config.ffn_activation == "tanh") {
        for (int j = 0; j < d; ++j) x[j] = std::tanh(x[j]);
    } else {
        for (int j = 0; j < d; ++j) x[j] = x[j] > 0.0 ? x[j] : 0.0;
    }
}

// Residual + norm + FFN + residual + norm, in place on `row`.
void finish_block(double* row, const double* attn_out, int d, const AttentionLayerParams& lp,
                  const PolicyConfig& config) {
    std::vector<double> h1(d);
    for (int j = 0; j < d; ++j) h1[j] = row[j] + attn_out[j];
    layer_norm_row(h1.data(), d, lp.norm1_gain, lp.norm1_bias);
    int fd = lp.ffn_w1.cols();
    std::vector<double> mid(fd), out(d);
    linear_row(h1.data(), d, lp.ffn_w1, lp.ffn_b1, mid.data());
    activate_row(mid.data(), fd, config);
    linear_row(mid.data(), fd, lp.ffn_w2, lp.ffn_b2, out.data());
    for (int j = 0; j < d; ++j) out[j] += h1[j];
    layer_norm_row(out.data(), d, lp.norm2_gain, lp.norm2_bias);
    std::copy(out.begin(), out.end(), row);
}

}  // namespace

PolicyOutput policy_forward_cached(const StateFeatures& f, const PolicyParameters& params,
                                   const PolicyConfig& config, KvCache& cache) {
    config.validate();
    if (f.feasible.empty()) throw InvariantError("policy: empty feasible set");
    int n = f.num_ops;
    int m = f.num_machines;
    int d = config.dim;
    int dh = config.head_dim();
    int L = config.layers;
    double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    if (cache.valid) {
        if (cache.instance_tag != f.instance_tag || static_cast<int>(cache.scheduled.size()) != n) {
            throw CacheError("kv cache: cached episode belongs to a different instance");
        }
        if (cache.params_tag != static_cast<const void*>(&params)) {
            throw CacheError("kv cache: parameters changed under the cache");
        }
    }

    // An op is dirty when its own input changed; dirtiness propagates to the
    // earlier ops of its job, which attend to it.
    std::vector<uint8_t> dirty(n, 0);
    if (!cache.valid) {
        std::fill(dirty.begin(), dirty.end(), 1);
        cache.h.assign(static_cast<size_t>(L) + 1,
                       std::vector<double>(static_cast<size_t>(n) * d, 0.0));
        // Slots 0..L-1 hold op-branch K/V, slots L..2L-1 machine-branch K/V.
        cache.keys.assign(2 * static_cast<size_t>(L),
                          std::vector<double>(static_cast<size_t>(n) * d, 0.0));
        cache.values.assign(2 * static_cast<size_t>(L),
                            std::vector<double>(static_cast<size_t>(n) * d, 0.0));
    } else {
        for (int a = 0; a < n; ++a) {
            if (f.scheduled[a]) continue;
            if (cache.op_feat[static_cast<size_t>(a) * 2] != f.op_feat[static_cast<size_t>(a) * 2] ||
                cache.op_feat[static_cast<size_t>(a) * 2 + 1] !=
                    f.op_feat[static_cast<size_t>(a) * 2 + 1] ||
                cache.scheduled[a] != f.scheduled[a]) {
                dirty[a] = 1;
            }
        }
        for (int a = n - 1; a > 0; --a) {
            if (dirty[a] && f.positions[a] > 0 && !f.scheduled[a - 1]) dirty[a - 1] = 1;
        }
    }
    cache.op_feat = f.op_feat;
    cache.scheduled = f.scheduled;
    cache.instance_tag = f.instance_tag;
    cache.params_tag = &params;
    cache.valid = true;

    for (int a = 0; a < n; ++a) {
        if (f.scheduled[a] || !dirty[a]) continue;
        linear_row(&f.op_feat[static_cast<size_t>(a) * 2], 2, params.op_in_w, params.op_in_b,
                   &cache.h[0][static_cast<size_t>(a) * d]);
    }

    std::vector<std::vector<int>> attends(n);
    for (int a = 0; a < n; ++a) {
        if (f.scheduled[a]) continue;
        attends[a].push_back(a);
        for (int b = a + 1; b < n; ++b) {
            if (f.o2o(a, b)) attends[a].push_back(b);
        }
    }

    for (int l = 0; l < L; ++l) {
        const AttentionLayerParams& lp = params.op_layers[l];
        for (int a = 0; a < n; ++a) {
            if (f.scheduled[a] || !dirty[a]) continue;
            const double* h_in = &cache.h[l][static_cast<size_t>(a) * d];
            double* krow = &cache.keys[l][static_cast<size_t>(a) * d];
            double* vrow = &cache.values[l][static_cast<size_t>(a) * d];
            linear_row(h_in, d, lp.wk, lp.bk, krow);
            linear_row(h_in, d, lp.wv, lp.bv, vrow);
            for (int hd = 0; hd < config.heads; ++hd) {
                rope_row(krow + hd * dh, dh, f.positions[a], config.rope_base);
            }
        }
        for (int a = 0; a < n; ++a) {
            if (f.scheduled[a] || !dirty[a]) continue;
            const double* h_in = &cache.h[l][static_cast<size_t>(a) * d];
            std::vector<double> q(d);
            linear_row(h_in, d, lp.wq, lp.bq, q.data());
            std::vector<double> attn_concat(d, 0.0);
            const auto& targets = attends[a];
            for (int hd = 0; hd < config.heads; ++hd) {
                double* qh = q.data() + hd * dh;
                rope_row(qh, dh, f.positions[a], config.rope_base);
                std::vector<double> logits(targets.size());
                double mx = -std::numeric_limits<double>::infinity();
                for (size_t t = 0; t < targets.size(); ++t) {
                    const double* kh =
                        &cache.keys[l][static_cast<size_t>(targets[t]) * d] + hd * dh;
                    double dot = 0.0;
                    for (int j = 0; j < dh; ++j) dot += qh[j] * kh[j];
                    logits[t] = dot * inv_sqrt;
                    mx = std::max(mx, logits[t]);
                }
                double total = 0.0;
                for (double& v : logits) {
                    v = std::exp(v - mx);
                    total += v;
                }
                double* dst = attn_concat.data() + hd * dh;
                for (size_t t = 0; t < targets.size(); ++t) {
                    double alpha = logits[t] / total;
                    const double* vh =
                        &cache.values[l][static_cast<size_t>(targets[t]) * d] + hd * dh;
                    for (int j = 0; j < dh; ++j) dst[j] += alpha * vh[j];
                }
            }
            std::vector<double> merged(d);
            linear_row(attn_concat.data(), d, lp.wo, lp.bo, merged.data());
            std::copy_n(h_in, d, &cache.h[l + 1][static_cast<size_t>(a) * d]);
            finish_block(&cache.h[l + 1][static_cast<size_t>(a) * d], merged.data(), d, lp,
                         config);
        }
    }

    // Machine branch, recomputed fully each step; the op-side K/V rows under
    // this branch's projections are cached with the same dirty set.
    std::vector<double> h_mach(static_cast<size_t>(m) * d);
    for (int mm = 0; mm < m; ++mm) {
        linear_row(&f.mach_feat[mm], 1, params.mach_in_w, params.mach_in_b,
                   &h_mach[static_cast<size_t>(mm) * d]);
    }
    std::vector<double> e(dh);
    auto edge_vec = [&](int mm, int op) {
        double x = f.edge(mm, op);
        for (int j = 0; j < dh; ++j) {
            e[j] = params.edge_attn_w.data()[j] * x + params.edge_attn_b.data()[j];
        }
    };
    for (int l = 0; l < L; ++l) {
        const AttentionLayerParams& lp = params.mach_layers[l];
        std::vector<double>& ko = cache.keys[static_cast<size_t>(L) + l];
        std::vector<double>& vo = cache.values[static_cast<size_t>(L) + l];
        for (int a = 0; a < n; ++a) {
            if (f.scheduled[a] || !dirty[a]) continue;
            const double* h_in = &cache.h[l + 1][static_cast<size_t>(a) * d];
            linear_row(h_in, d, lp.wk, lp.bk, &ko[static_cast<size_t>(a) * d]);
            linear_row(h_in, d, lp.wv, lp.bv, &vo[static_cast<size_t>(a) * d]);
        }
        std::vector<double> h_next(static_cast<size_t>(m) * d);
        for (int mm = 0; mm < m; ++mm) {
            const double* hm = &h_mach[static_cast<size_t>(mm) * d];
            std::vector<double> q(d), km(d), vm(d);
            linear_row(hm, d, lp.wq, lp.bq, q.data());
            linear_row(hm, d, lp.wk, lp.bk, km.data());
            linear_row(hm, d, lp.wv, lp.bv, vm.data());
            std::vector<int> ops;
            for (int op = 0; op < n; ++op) {
                if (f.o2m(mm, op)) ops.push_back(op);
            }
            std::vector<double> attn_concat(d, 0.0);
            for (int hd = 0; hd < config.heads; ++hd) {
                const double* qh = q.data() + hd * dh;
                std::vector<double> logits(ops.size() + 1);
                for (size_t t = 0; t < ops.size(); ++t) {
                    edge_vec(mm, ops[t]);
                    const double* kh = &ko[static_cast<size_t>(ops[t]) * d] + hd * dh;
                    double dot = 0.0;
                    for (int j = 0; j < dh; ++j) dot += (qh[j] + e[j]) * (kh[j] + e[j]);
                    logits[t] = dot * inv_sqrt;
                }
                {
                    const double* kh = km.data() + hd * dh;
                    double dot = 0.0;
                    for (int j = 0; j < dh; ++j) dot += qh[j] * kh[j];
                    logits[ops.size()] = dot * inv_sqrt;
                }
                double mx = -std::numeric_limits<double>::infinity();
                for (double v : logits) mx = std::max(mx, v);
                double total = 0.0;
                for (double& v : logits) {
                    v = std::exp(v - mx);
                    total += v;
                }
                double* dst = attn_concat.data() + hd * dh;
                for (size_t t = 0; t < ops.size(); ++t) {
                    double alpha = logits[t] / total;
                    edge_vec(mm, ops[t]);
                    const double* vh = &vo[static_cast<size_t>(ops[t]) * d] + hd * dh;
                    for (int j = 0; j < dh; ++j) dst[j] += alpha * (vh[j] + e[j]);
                }
                double alpha_self = logits[ops.size()] / total;
                const double* vh = vm.data() + hd * dh;
                for (int j = 0; j < dh; ++j) dst[j] += alpha_self * vh[j];
            }
            std::vector<double> merged(d);
            linear_row(attn_concat.data(), d, lp.wo, lp.bo, merged.data());
            std::copy_n(hm, d, &h_next[static_cast<size_t>(mm) * d]);
            finish_block(&h_next[static_cast<size_t>(mm) * d], merged.data(), d, lp, config);
        }
        h_mach.swap(h_next);
    }

    int k = static_cast<int>(f.feasible.size());
    std::vector<double> logits(k);
    int hidden = config.head_hidden;
    std::vector<double> in(static_cast<size_t>(3) * d), m1(hidden), m2(hidden), out1(1);
    for (int i = 0; i < k; ++i) {
        const Action& a = f.feasible[i];
        std::copy_n(&cache.h[L][static_cast<size_t>(a.op) * d], d, in.begin());
        std::copy_n(&h_mach[static_cast<size_t>(a.machine) * d], d, in.begin() + d);
        double x = f.edge(a.machine, a.op);
        for (int j = 0; j < d; ++j) {
            in[static_cast<size_t>(2) * d + j] =
                params.edge_head_w.data()[j] * x + params.edge_head_b.data()[j];
        }
        linear_row(in.data(), 3 * d, params.head_w[0], params.head_b[0], m1.data());
        activate_row(m1.data(), hidden, config);
        linear_row(m1.data(), hidden, params.head_w[1], params.head_b[1], m2.data());
        activate_row(m2.data(), hidden, config);
        linear_row(m2.data(), hidden, params.head_w[2], params.head_b[2], out1.data());
        logits[i] = out1[0];
    }
    double mx = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double v : logits) total += std::exp(v - mx);
    double lse = mx + std::log(total);

    PolicyOutput out;
    out.actions = f.feasible;
    out.probs.resize(k);
    std::vector<double> lps(k);
    for (int i = 0; i < k; ++i) {
        lps[i] = logits[i] - lse;
        out.probs[i] = std::exp(lps[i]);
        if (!std::isfinite(out.probs[i])) {
            throw TrainingError("policy: non-finite action probability");
        }
    }
    out.log_probs = Tensor::from(std::move(lps), {k});
    return out;
}

// ---- checkpoints ---------------------------------------------------------------

namespace {

nlohmann::json config_to_json(const PolicyConfig& c) {
    return nlohmann::json{{"layers", c.layers},
                          {"heads", c.heads},
                          {"dim", c.dim},
                          {"ffn_dim", c.ffn_dim},
                          {"head_hidden", c.head_hidden},
                          {"rope_base", c.rope_base},
                          {"ffn_activation", c.ffn_activation},
                          {"critic_head", c.critic_head}};
}

PolicyConfig config_from_json(const nlohmann::json& j) {
    PolicyConfig c;
    c.layers = j.at("layers").get<int>();
    c.heads = j.at("heads").get<int>();
    c.dim = j.at("dim").get<int>();
    c.ffn_dim = j.at("ffn_dim").get<int>();
    c.head_hidden = j.at("head_hidden").get<int>();
    c.rope_base = j.at("rope_base").get<double>();
    c.ffn_activation = j.at("ffn_activation").get<std::string>();
    c.critic_head = j.at("critic_head").get<bool>();
    return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const PolicyParameters& params,
                     const PolicyConfig& config, const nn::Adam::State* optimizer_state,
                     const std::string& note) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["kind"] = "flexsched_policy";
    j["config"] = config_to_json(config);
    j["note"] = note;
    nlohmann::json p = nlohmann::json::object();
    for (const auto& [name, t] : params.named()) {
        p[name] = {{"shape", t.shape()}, {"data", t.data()}};
    }
    j["params"] = std::move(p);
    if (optimizer_state) {
        j["optimizer"] = {{"step_count", optimizer_state->step_count},
                          {"m", optimizer_state->m},
                          {"v", optimizer_state->v}};
    }
    std::ofstream out(path);
    if (!out) throw ConfigError("checkpoint: cannot open " + path + " for writing");
    out << j.dump() << "\n";
    if (!out) throw ConfigError("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("checkpoint: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("checkpoint: " + path + ": " + e.what());
    }
    try {
        if (j.at("format_version").get<int>() != 1 ||
            j.at("kind").get<std::string>() != "flexsched_policy") {
            throw ParseError("checkpoint: unsupported format or version in " + path);
        }
        Checkpoint ckpt;
        ckpt.config = config_from_json(j.at("config"));
        ckpt.config.validate();
        ckpt.note = j.value("note", std::string());
        Rng dummy(0);
        ckpt.params = PolicyParameters::init(ckpt.config, dummy);
        for (auto& [name, t] : ckpt.params.named()) {
            if (!j.at("params").contains(name)) {
                throw ParseError("checkpoint: missing parameter " + name);
            }
            const auto& pj = j.at("params").at(name);
            std::vector<int> shape = pj.at("shape").get<std::vector<int>>();
            std::vector<double> data = pj.at("data").get<std::vector<double>>();
            if (shape != t.shape() || data.size() != t.data().size()) {
                throw ParseError("checkpoint: shape mismatch for " + name);
            }
            const_cast<Tensor&>(t).data() = std::move(data);
        }
        if (j.contains("optimizer")) {
            nn::Adam::State s;
            s.step_count = j.at("optimizer").at("step_count").get<int64_t>();
            s.m = j.at("optimizer").at("m").get<std::vector<std::vector<double>>>();
            s.v = j.at("optimizer").at("v").get<std::vector<std::vector<double>>>();
            ckpt.optimizer_state = std::move(s);
        }
        return ckpt;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("checkpoint: " + path + ": " + e.what());
    }
}

}  // namespace flexsched
