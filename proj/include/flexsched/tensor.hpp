#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "flexsched/errors.hpp"

namespace flexsched::nn {

// Dense f64 tensor (rank 1 or 2) with reverse-mode autodiff. A Tensor is a
// cheap handle onto a graph node; ops executed while gradients are enabled
// record their parents and a backward rule, forming an implicit tape in
// creation order (which is already topological). `backward` walks that tape
// once in reverse.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor from(std::vector<double> data, std::vector<int> shape,
                       bool requires_grad = false);
    static Tensor scalar(double v);

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const;
    int64_t size() const;
    int rows() const;  // rank-2 only
    int cols() const;

    std::vector<double>& data();
    const std::vector<double>& data() const;
    double item() const;  // single-element tensors

    bool requires_grad() const;
    const std::vector<double>& grad() const;
    void zero_grad() const;
    void add_to_grad(std::span<const double> g) const;

    struct Node;
    Node* node() const { return node_.get(); }

private:
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
    std::shared_ptr<Node> node_;

    friend Tensor make_op(std::vector<int> shape, std::vector<double> value,
                          std::vector<Tensor> parents,
                          std::function<void(Tensor::Node&)> backward);
};

struct Tensor::Node {
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;  // sized lazily on first accumulation
    bool requires_grad = false;
    uint64_t serial = 0;
    std::vector<Tensor> parents;
    std::function<void(Node&)> backward_fn;
};

// Gradient recording is on by default; disable it around rollouts so
// inference takes the exact same arithmetic path without building a graph.
bool grad_enabled();
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool saved_;
};

// ---- primitives -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double s);
Tensor add_const(const Tensor& a, double s);
// x [r,c] + row vector b [c], broadcast over rows.
Tensor add_rowvec(const Tensor& x, const Tensor& b);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, std::vector<int> shape);  // same element count
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& a, int lo, int len);
Tensor gather_rows(const Tensor& a, std::vector<int> idx);
Tensor mean_rows(const Tensor& a);  // [r,c] -> [1,c]

Tensor sum(const Tensor& a);   // -> scalar
Tensor mean(const Tensor& a);  // -> scalar
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor tanh_act(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor pick(const Tensor& a, int index);  // -> scalar

// Row-wise softmax over unmasked entries (mask 1 = keep). Masked entries are
// exactly 0 in the output; a fully masked row yields an all-zero row, which
// signals "no feasible key" and is the caller's job to guard.
Tensor softmax_masked(const Tensor& a, const std::vector<uint8_t>& mask);
// Numerically stable log-softmax over a rank-1 vector.
Tensor log_softmax(const Tensor& a);
// Row-wise layer normalization with affine gain/bias (both [c]).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
// x [r,in] * w [in,out] + b [out].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
// Rotary transform of per-row vectors: channel pair k of row i is rotated by
// positions[i] * base^(-2k/cols). Positions are intra-job operation indices.
Tensor rope(const Tensor& x, const std::vector<int>& positions, double base);

// Backpropagates from a scalar loss; every reachable node is visited once.
void backward(const Tensor& loss);

// ---- gradient checking ----------------------------------------------------

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst;  // "param_name[i]" of the worst element
    bool ok(double tol) const { return max_rel_err <= tol; }
};

// Central finite differences vs tape gradients for a scalar-valued function
// of the given parameters. `fn` must rebuild the graph on every call.
GradCheckReport finite_diff_check(const std::function<Tensor()>& fn,
                                  std::span<const std::pair<std::string, Tensor>> params,
                                  double step = 1e-5);

}  // namespace flexsched::nn
