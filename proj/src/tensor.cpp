#include "flexsched/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace flexsched::nn {

namespace {

thread_local bool g_grad_enabled = true;
std::atomic<uint64_t> g_serial{1};

int64_t shape_size(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
        if (d < 0) throw InvariantError("tensor: negative dimension");
        n *= d;
    }
    return n;
}

std::string shape_str(const std::vector<int>& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
}

void require(bool cond, const std::string& msg) {
    if (!cond) throw InvariantError("tensor: " + msg);
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : saved_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = saved_; }

Tensor make_op(std::vector<int> shape, std::vector<double> value, std::vector<Tensor> parents,
               std::function<void(Tensor::Node&)> backward) {
    auto node = std::make_shared<Tensor::Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->serial = g_serial.fetch_add(1);
    bool track = g_grad_enabled;
    if (track) {
        bool any = false;
        for (const Tensor& p : parents) any = any || p.requires_grad();
        track = any;
    }
    if (track) {
        node->requires_grad = true;
        node->parents = std::move(parents);
        node->backward_fn = std::move(backward);
    }
    return Tensor(std::move(node));
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    auto node = std::make_shared<Node>();
    node->value.assign(static_cast<size_t>(shape_size(shape)), 0.0);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    node->serial = g_serial.fetch_add(1);
    return Tensor(std::move(node));
}

Tensor Tensor::from(std::vector<double> data, std::vector<int> shape, bool requires_grad) {
    require(static_cast<int64_t>(data.size()) == shape_size(shape),
            "from: data length does not match shape " + shape_str(shape));
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(data);
    node->requires_grad = requires_grad;
    node->serial = g_serial.fetch_add(1);
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v) { return from({v}, {1}); }

const std::vector<int>& Tensor::shape() const {
    require(defined(), "use of undefined tensor");
    return node_->shape;
}

int64_t Tensor::size() const { return static_cast<int64_t>(data().size()); }

int Tensor::rows() const {
    require(shape().size() == 2, "rows: tensor is not rank-2");
    return node_->shape[0];
}

int Tensor::cols() const {
    require(shape().size() == 2, "cols: tensor is not rank-2");
    return node_->shape[1];
}

std::vector<double>& Tensor::data() {
    require(defined(), "use of undefined tensor");
    return node_->value;
}

const std::vector<double>& Tensor::data() const {
    require(defined(), "use of undefined tensor");
    return node_->value;
}

double Tensor::item() const {
    require(size() == 1, "item: tensor has more than one element");
    return data()[0];
}

bool Tensor::requires_grad() const { return defined() && node_->requires_grad; }

const std::vector<double>& Tensor::grad() const {
    require(defined(), "use of undefined tensor");
    if (node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
    return node_->grad;
}

void Tensor::zero_grad() const {
    require(defined(), "use of undefined tensor");
    node_->grad.assign(node_->value.size(), 0.0);
}

void Tensor::add_to_grad(std::span<const double> g) const {
    require(defined(), "use of undefined tensor");
    if (node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
    require(g.size() == node_->grad.size(), "gradient size mismatch");
    for (size_t i = 0; i < g.size(); ++i) node_->grad[i] += g[i];
}

namespace {

std::vector<double>& grad_buf(Tensor::Node& n) {
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
    return n.grad;
}

void accumulate(const Tensor& parent, std::span<const double> g) {
    if (!parent.requires_grad()) return;
    parent.add_to_grad(g);
}

}  // namespace

// ---- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), "add: shape mismatch " + shape_str(a.shape()) + " vs " +
                                        shape_str(b.shape()));
    std::vector<double> out(a.data());
    for (size_t i = 0; i < out.size(); ++i) out[i] += b.data()[i];
    return make_op(a.shape(), std::move(out), {a, b}, [](Tensor::Node& n) {
        accumulate(n.parents[0], n.grad);
        accumulate(n.parents[1], n.grad);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, neg(b)); }

Tensor mul(const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), "mul: shape mismatch");
    std::vector<double> out(a.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    return make_op(a.shape(), std::move(out), {a, b}, [](Tensor::Node& n) {
        const auto& av = n.parents[0].data();
        const auto& bv = n.parents[1].data();
        std::vector<double> ga(n.grad.size()), gb(n.grad.size());
        for (size_t i = 0; i < n.grad.size(); ++i) {
            ga[i] = n.grad[i] * bv[i];
            gb[i] = n.grad[i] * av[i];
        }
        accumulate(n.parents[0], ga);
        accumulate(n.parents[1], gb);
    });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor scale(const Tensor& a, double s) {
    std::vector<double> out(a.data());
    for (double& v : out) v *= s;
    return make_op(a.shape(), std::move(out), {a}, [s](Tensor::Node& n) {
        std::vector<double> g(n.grad);
        for (double& v : g) v *= s;
        accumulate(n.parents[0], g);
    });
}

Tensor add_const(const Tensor& a, double s) {
    std::vector<double> out(a.data());
    for (double& v : out) v += s;
    return make_op(a.shape(), std::move(out), {a},
                   [](Tensor::Node& n) { accumulate(n.parents[0], n.grad); });
}

Tensor add_rowvec(const Tensor& x, const Tensor& b) {
    require(x.shape().size() == 2 && b.shape().size() == 1 && b.shape()[0] == x.cols(),
            "add_rowvec: expected [r,c] + [c]");
    int r = x.rows(), c = x.cols();
    std::vector<double> out(x.data());
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) out[static_cast<size_t>(i) * c + j] += b.data()[j];
    }
    return make_op(x.shape(), std::move(out), {x, b}, [r, c](Tensor::Node& n) {
        accumulate(n.parents[0], n.grad);
        std::vector<double> gb(c, 0.0);
        for (int i = 0; i < r; ++i) {
            for (int j = 0; j < c; ++j) gb[j] += n.grad[static_cast<size_t>(i) * c + j];
        }
        accumulate(n.parents[1], gb);
    });
}

// ---- shape ops --------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.shape().size() == 2 && b.shape().size() == 2 && a.cols() == b.rows(),
            "matmul: incompatible shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    int r = a.rows(), k = a.cols(), c = b.cols();
    std::vector<double> out(static_cast<size_t>(r) * c, 0.0);
    for (int i = 0; i < r; ++i) {
        for (int p = 0; p < k; ++p) {
            double av = a.data()[static_cast<size_t>(i) * k + p];
            if (av == 0.0) continue;
            const double* brow = &b.data()[static_cast<size_t>(p) * c];
            double* orow = &out[static_cast<size_t>(i) * c];
            for (int j = 0; j < c; ++j) orow[j] += av * brow[j];
        }
    }
    return make_op({r, c}, std::move(out), {a, b}, [r, k, c](Tensor::Node& n) {
        const auto& av = n.parents[0].data();
        const auto& bv = n.parents[1].data();
        std::vector<double> ga(static_cast<size_t>(r) * k, 0.0);
        std::vector<double> gb(static_cast<size_t>(k) * c, 0.0);
        for (int i = 0; i < r; ++i) {
            for (int j = 0; j < c; ++j) {
                double g = n.grad[static_cast<size_t>(i) * c + j];
                if (g == 0.0) continue;
                for (int p = 0; p < k; ++p) {
                    ga[static_cast<size_t>(i) * k + p] += g * bv[static_cast<size_t>(p) * c + j];
                    gb[static_cast<size_t>(p) * c + j] += g * av[static_cast<size_t>(i) * k + p];
                }
            }
        }
        accumulate(n.parents[0], ga);
        accumulate(n.parents[1], gb);
    });
}

Tensor transpose(const Tensor& a) {
    require(a.shape().size() == 2, "transpose: rank-2 only");
    int r = a.rows(), c = a.cols();
    std::vector<double> out(static_cast<size_t>(r) * c);
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) out[static_cast<size_t>(j) * r + i] = a.data()[static_cast<size_t>(i) * c + j];
    }
    return make_op({c, r}, std::move(out), {a}, [r, c](Tensor::Node& n) {
        std::vector<double> g(static_cast<size_t>(r) * c);
        for (int i = 0; i < r; ++i) {
            for (int j = 0; j < c; ++j) g[static_cast<size_t>(i) * c + j] = n.grad[static_cast<size_t>(j) * r + i];
        }
        accumulate(n.parents[0], g);
    });
}

Tensor reshape(const Tensor& a, std::vector<int> shape) {
    require(shape_size(shape) == a.size(), "reshape: element count mismatch");
    return make_op(std::move(shape), a.data(), {a},
                   [](Tensor::Node& n) { accumulate(n.parents[0], n.grad); });
}

Tensor concat_cols(std::span<const Tensor> parts) {
    require(!parts.empty(), "concat_cols: empty list");
    int r = parts[0].rows();
    int total = 0;
    for (const Tensor& p : parts) {
        require(p.shape().size() == 2 && p.rows() == r, "concat_cols: row mismatch");
        total += p.cols();
    }
    std::vector<double> out(static_cast<size_t>(r) * total);
    std::vector<int> offsets;
    int off = 0;
    for (const Tensor& p : parts) {
        offsets.push_back(off);
        int c = p.cols();
        for (int i = 0; i < r; ++i) {
            std::copy_n(&p.data()[static_cast<size_t>(i) * c], c,
                        &out[static_cast<size_t>(i) * total + off]);
        }
        off += c;
    }
    std::vector<Tensor> parents(parts.begin(), parts.end());
    return make_op({r, total}, std::move(out), std::move(parents),
                   [r, total, offsets](Tensor::Node& n) {
                       for (size_t pi = 0; pi < n.parents.size(); ++pi) {
                           const Tensor& p = n.parents[pi];
                           int c = p.cols();
                           std::vector<double> g(static_cast<size_t>(r) * c);
                           for (int i = 0; i < r; ++i) {
                               std::copy_n(&n.grad[static_cast<size_t>(i) * total + offsets[pi]], c,
                                           &g[static_cast<size_t>(i) * c]);
                           }
                           accumulate(p, g);
                       }
                   });
}

Tensor slice_cols(const Tensor& a, int lo, int len) {
    require(a.shape().size() == 2 && lo >= 0 && len > 0 && lo + len <= a.cols(),
            "slice_cols: range out of bounds");
    int r = a.rows(), c = a.cols();
    std::vector<double> out(static_cast<size_t>(r) * len);
    for (int i = 0; i < r; ++i) {
        std::copy_n(&a.data()[static_cast<size_t>(i) * c + lo], len,
                    &out[static_cast<size_t>(i) * len]);
    }
    return make_op({r, len}, std::move(out), {a}, [r, c, lo, len](Tensor::Node& n) {
        std::vector<double> g(static_cast<size_t>(r) * c, 0.0);
        for (int i = 0; i < r; ++i) {
            std::copy_n(&n.grad[static_cast<size_t>(i) * len], len,
                        &g[static_cast<size_t>(i) * c + lo]);
        }
        accumulate(n.parents[0], g);
    });
}

Tensor gather_rows(const Tensor& a, std::vector<int> idx) {
    require(a.shape().size() == 2, "gather_rows: rank-2 only");
    int r = a.rows(), c = a.cols();
    for (int i : idx) require(i >= 0 && i < r, "gather_rows: index out of range");
    std::vector<double> out(idx.size() * static_cast<size_t>(c));
    for (size_t i = 0; i < idx.size(); ++i) {
        std::copy_n(&a.data()[static_cast<size_t>(idx[i]) * c], c, &out[i * c]);
    }
    return make_op({static_cast<int>(idx.size()), c}, std::move(out), {a},
                   [r, c, idx](Tensor::Node& n) {
                       std::vector<double> g(static_cast<size_t>(r) * c, 0.0);
                       for (size_t i = 0; i < idx.size(); ++i) {
                           for (int j = 0; j < c; ++j) {
                               g[static_cast<size_t>(idx[i]) * c + j] += n.grad[i * c + j];
                           }
                       }
                       accumulate(n.parents[0], g);
                   });
}

Tensor mean_rows(const Tensor& a) {
    require(a.shape().size() == 2 && a.rows() > 0, "mean_rows: rank-2 with rows > 0");
    int r = a.rows(), c = a.cols();
    std::vector<double> out(c, 0.0);
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < c; ++j) out[j] += a.data()[static_cast<size_t>(i) * c + j];
    }
    for (double& v : out) v /= r;
    return make_op({1, c}, std::move(out), {a}, [r, c](Tensor::Node& n) {
        std::vector<double> g(static_cast<size_t>(r) * c);
        for (int i = 0; i < r; ++i) {
            for (int j = 0; j < c; ++j) g[static_cast<size_t>(i) * c + j] = n.grad[j] / r;
        }
        accumulate(n.parents[0], g);
    });
}

// ---- reductions and nonlinearities -------------------------------------------

Tensor sum(const Tensor& a) {
    double total = 0.0;
    for (double v : a.data()) total += v;
    return make_op({1}, {total}, {a}, [](Tensor::Node& n) {
        std::vector<double> g(n.parents[0].size(), n.grad[0]);
        accumulate(n.parents[0], g);
    });
}

Tensor mean(const Tensor& a) {
    require(a.size() > 0, "mean: empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor exp(const Tensor& a) {
    std::vector<double> out(a.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.data()[i]);
    return make_op(a.shape(), std::move(out), {a}, [](Tensor::Node& n) {
        std::vector<double> g(n.grad.size());
        for (size_t i = 0; i < g.size(); ++i) g[i] = n.grad[i] * n.value[i];
        accumulate(n.parents[0], g);
    });
}

Tensor log(const Tensor& a) {
    std::vector<double> out(a.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::log(a.data()[i]);
    return make_op(a.shape(), std::move(out), {a}, [](Tensor::Node& n) {
        const auto& av = n.parents[0].data();
        std::vector<double> g(n.grad.size());
        for (size_t i = 0; i < g.size(); ++i) g[i] = n.grad[i] / av[i];
        accumulate(n.parents[0], g);
    });
}

Tensor relu(const Tensor& a) {
    std::vector<double> out(a.data());
    for (double& v : out) v = v > 0.0 ? v : 0.0;
    return make_op(a.shape(), std::move(out), {a}, [](Tensor::Node& n) {
        const auto& av = n.parents[0].data();
        std::vector<double> g(n.grad.size());
        for (size_t i = 0; i < g.size(); ++i) g[i] = av[i] > 0.0 ? n.grad[i] : 0.0;
        accumulate(n.parents[0], g);
    });
}

Tensor tanh_act(const Tensor& a) {
    std::vector<double> out(a.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.data()[i]);
    return make_op(a.shape(), std::move(out), {a}, [](Tensor::Node& n) {
        std::vector<double> g(n.grad.size());
        for (size_t i = 0; i < g.size(); ++i) g[i] = n.grad[i] * (1.0 - n.value[i] * n.value[i]);
        accumulate(n.parents[0], g);
    });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    require(lo <= hi, "clamp: lo > hi");
    std::vector<double> out(a.data());
    for (double& v : out) v = std::min(std::max(v, lo), hi);
    return make_op(a.shape(), std::move(out), {a}, [lo, hi](Tensor::Node& n) {
        const auto& av = n.parents[0].data();
        std::vector<double> g(n.grad.size());
        for (size_t i = 0; i < g.size(); ++i) {
            g[i] = (av[i] > lo && av[i] < hi) ? n.grad[i] : 0.0;
        }
        accumulate(n.parents[0], g);
    });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), "maximum: shape mismatch");
    std::vector<double> out(a.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::max(a.data()[i], b.data()[i]);
    return make_op(a.shape(), std::move(out), {a, b}, [](Tensor::Node& n) {
        const auto& av = n.parents[0].data();
        const auto& bv = n.parents[1].data();
        std::vector<double> ga(n.grad.size(), 0.0), gb(n.grad.size(), 0.0);
        for (size_t i = 0; i < n.grad.size(); ++i) {
            // Ties route to the first argument (subgradient choice).
            if (av[i] >= bv[i]) ga[i] = n.grad[i];
            else gb[i] = n.grad[i];
        }
        accumulate(n.parents[0], ga);
        accumulate(n.parents[1], gb);
    });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
    return neg(maximum(neg(a), neg(b)));
}

Tensor pick(const Tensor& a, int index) {
    require(index >= 0 && index < a.size(), "pick: index out of range");
    return make_op({1}, {a.data()[index]}, {a}, [index](Tensor::Node& n) {
        std::vector<double> g(n.parents[0].size(), 0.0);
        g[index] = n.grad[0];
        accumulate(n.parents[0], g);
    });
}

// ---- structured ops -----------------------------------------------------------

Tensor softmax_masked(const Tensor& a, const std::vector<uint8_t>& mask) {
    int r, c;
    if (a.shape().size() == 2) {
        r = a.rows();
        c = a.cols();
    } else {
        r = 1;
        c = static_cast<int>(a.size());
    }
    require(mask.size() == a.data().size(), "softmax_masked: mask size mismatch");
    std::vector<double> out(a.size(), 0.0);
    for (int i = 0; i < r; ++i) {
        const double* row = &a.data()[static_cast<size_t>(i) * c];
        const uint8_t* mrow = &mask[static_cast<size_t>(i) * c];
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < c; ++j) {
            if (mrow[j]) mx = std::max(mx, row[j]);
        }
        if (!std::isfinite(mx)) continue;  // fully masked row stays zero
        double total = 0.0;
        for (int j = 0; j < c; ++j) {
            if (mrow[j]) total += std::exp(row[j] - mx);
        }
        for (int j = 0; j < c; ++j) {
            if (mrow[j]) out[static_cast<size_t>(i) * c + j] = std::exp(row[j] - mx) / total;
        }
    }
    return make_op(a.shape(), std::move(out), {a}, [r, c](Tensor::Node& n) {
        std::vector<double> g(n.grad.size(), 0.0);
        for (int i = 0; i < r; ++i) {
            const double* p = &n.value[static_cast<size_t>(i) * c];
            const double* go = &n.grad[static_cast<size_t>(i) * c];
            double dot = 0.0;
            for (int j = 0; j < c; ++j) dot += p[j] * go[j];
            for (int j = 0; j < c; ++j) {
                g[static_cast<size_t>(i) * c + j] = p[j] * (go[j] - dot);
            }
        }
        accumulate(n.parents[0], g);
    });
}

Tensor log_softmax(const Tensor& a) {
    require(a.shape().size() == 1 && a.size() > 0, "log_softmax: non-empty rank-1 only");
    double mx = *std::max_element(a.data().begin(), a.data().end());
    double total = 0.0;
    for (double v : a.data()) total += std::exp(v - mx);
    double lse = mx + std::log(total);
    std::vector<double> out(a.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - lse;
    return make_op(a.shape(), std::move(out), {a}, [](Tensor::Node& n) {
        double gsum = 0.0;
        for (double g : n.grad) gsum += g;
        std::vector<double> g(n.grad.size());
        for (size_t i = 0; i < g.size(); ++i) g[i] = n.grad[i] - std::exp(n.value[i]) * gsum;
        accumulate(n.parents[0], g);
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    require(x.shape().size() == 2, "layer_norm: rank-2 input");
    int r = x.rows(), c = x.cols();
    require(gain.shape().size() == 1 && gain.shape()[0] == c, "layer_norm: gain shape");
    require(bias.shape().size() == 1 && bias.shape()[0] == c, "layer_norm: bias shape");

    std::vector<double> out(static_cast<size_t>(r) * c);
    std::vector<double> xhat(static_cast<size_t>(r) * c);
    std::vector<double> inv_std(r);
    for (int i = 0; i < r; ++i) {
        const double* row = &x.data()[static_cast<size_t>(i) * c];
        double mu = 0.0;
        for (int j = 0; j < c; ++j) mu += row[j];
        mu /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= c;
        double inv = 1.0 / std::sqrt(var + eps);
        inv_std[i] = inv;
        for (int j = 0; j < c; ++j) {
            double xh = (row[j] - mu) * inv;
            xhat[static_cast<size_t>(i) * c + j] = xh;
            out[static_cast<size_t>(i) * c + j] = xh * gain.data()[j] + bias.data()[j];
        }
    }
    return make_op(x.shape(), std::move(out), {x, gain, bias},
                   [r, c, xhat, inv_std](Tensor::Node& n) {
                       const auto& gv = n.parents[1].data();
                       std::vector<double> gx(static_cast<size_t>(r) * c);
                       std::vector<double> ggain(c, 0.0), gbias(c, 0.0);
                       for (int i = 0; i < r; ++i) {
                           const double* go = &n.grad[static_cast<size_t>(i) * c];
                           const double* xh = &xhat[static_cast<size_t>(i) * c];
                           double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                           for (int j = 0; j < c; ++j) {
                               double dxhat = go[j] * gv[j];
                               mean_dxhat += dxhat;
                               mean_dxhat_xhat += dxhat * xh[j];
                               ggain[j] += go[j] * xh[j];
                               gbias[j] += go[j];
                           }
                           mean_dxhat /= c;
                           mean_dxhat_xhat /= c;
                           for (int j = 0; j < c; ++j) {
                               double dxhat = go[j] * gv[j];
                               gx[static_cast<size_t>(i) * c + j] =
                                   inv_std[i] * (dxhat - mean_dxhat - xh[j] * mean_dxhat_xhat);
                           }
                       }
                       accumulate(n.parents[0], gx);
                       accumulate(n.parents[1], ggain);
                       accumulate(n.parents[2], gbias);
                   });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    return add_rowvec(matmul(x, w), b);
}

Tensor rope(const Tensor& x, const std::vector<int>& positions, double base) {
    require(x.shape().size() == 2, "rope: rank-2 input");
    int r = x.rows(), c = x.cols();
    require(c % 2 == 0, "rope: head dimension must be even");
    require(static_cast<int>(positions.size()) == r, "rope: positions length mismatch");

    int half = c / 2;
    std::vector<double> cs(static_cast<size_t>(r) * half), sn(static_cast<size_t>(r) * half);
    for (int i = 0; i < r; ++i) {
        for (int k = 0; k < half; ++k) {
            double theta = positions[i] * std::pow(base, -2.0 * k / c);
            cs[static_cast<size_t>(i) * half + k] = std::cos(theta);
            sn[static_cast<size_t>(i) * half + k] = std::sin(theta);
        }
    }
    std::vector<double> out(static_cast<size_t>(r) * c);
    for (int i = 0; i < r; ++i) {
        for (int k = 0; k < half; ++k) {
            double x0 = x.data()[static_cast<size_t>(i) * c + 2 * k];
            double x1 = x.data()[static_cast<size_t>(i) * c + 2 * k + 1];
            double co = cs[static_cast<size_t>(i) * half + k];
            double si = sn[static_cast<size_t>(i) * half + k];
            out[static_cast<size_t>(i) * c + 2 * k] = x0 * co - x1 * si;
            out[static_cast<size_t>(i) * c + 2 * k + 1] = x0 * si + x1 * co;
        }
    }
    return make_op(x.shape(), std::move(out), {x}, [r, c, cs, sn](Tensor::Node& n) {
        int half = c / 2;
        std::vector<double> g(static_cast<size_t>(r) * c);
        for (int i = 0; i < r; ++i) {
            for (int k = 0; k < half; ++k) {
                double g0 = n.grad[static_cast<size_t>(i) * c + 2 * k];
                double g1 = n.grad[static_cast<size_t>(i) * c + 2 * k + 1];
                double co = cs[static_cast<size_t>(i) * half + k];
                double si = sn[static_cast<size_t>(i) * half + k];
                // Inverse rotation (transpose of an orthogonal map).
                g[static_cast<size_t>(i) * c + 2 * k] = g0 * co + g1 * si;
                g[static_cast<size_t>(i) * c + 2 * k + 1] = -g0 * si + g1 * co;
            }
        }
        accumulate(n.parents[0], g);
    });
}

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) {
        throw InvariantError("backward: loss must be a defined scalar");
    }
    if (!loss.requires_grad()) {
        throw InvariantError("backward: loss is not connected to any parameter");
    }
    // Collect the reachable subgraph, then replay it in reverse creation
    // order; creation order is topological by construction.
    std::vector<Tensor::Node*> order;
    std::unordered_set<Tensor::Node*> seen;
    std::vector<Tensor::Node*> stack{loss.node()};
    seen.insert(loss.node());
    while (!stack.empty()) {
        Tensor::Node* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (const Tensor& p : n->parents) {
            if (p.requires_grad() && seen.insert(p.node()).second) stack.push_back(p.node());
        }
    }
    std::sort(order.begin(), order.end(),
              [](const Tensor::Node* a, const Tensor::Node* b) { return a->serial > b->serial; });
    grad_buf(*loss.node())[0] += 1.0;
    for (Tensor::Node* n : order) {
        if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
}

GradCheckReport finite_diff_check(const std::function<Tensor()>& fn,
                                  std::span<const std::pair<std::string, Tensor>> params,
                                  double step) {
    for (const auto& [name, p] : params) p.zero_grad();
    Tensor loss = fn();
    backward(loss);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const auto& [name, p] : params) analytic.push_back(p.grad());

    GradCheckReport report;
    NoGradGuard no_grad;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor p = params[pi].second;
        for (int64_t i = 0; i < p.size(); ++i) {
            double saved = p.data()[i];
            p.data()[i] = saved + step;
            double up = fn().item();
            p.data()[i] = saved - step;
            double down = fn().item();
            p.data()[i] = saved;
            double fd = (up - down) / (2.0 * step);
            double ad = analytic[pi][static_cast<size_t>(i)];
            double rel = std::abs(ad - fd) / std::max({1e-6, std::abs(ad), std::abs(fd)});
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst = params[pi].first + "[" + std::to_string(i) + "]";
            }
        }
    }
    return report;
}

}  // namespace flexsched::nn
