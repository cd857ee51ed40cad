#include "flexsched/optim.hpp"

#include <cmath>

namespace flexsched::nn {

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Tensor& p : params_) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
    }
}

void Adam::step() {
    ++step_count_;
    double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
    double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        Tensor& p = params_[pi];
        const std::vector<double>& g = p.grad();
        for (size_t i = 0; i < g.size(); ++i) {
            if (!std::isfinite(g[i])) {
                throw TrainingError("adam: non-finite gradient encountered");
            }
            m_[pi][i] = config_.beta1 * m_[pi][i] + (1.0 - config_.beta1) * g[i];
            v_[pi][i] = config_.beta2 * v_[pi][i] + (1.0 - config_.beta2) * g[i] * g[i];
            double m_hat = m_[pi][i] / bc1;
            double v_hat = v_[pi][i] / bc2;
            p.data()[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
        }
    }
}

void Adam::zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
}

Adam::State Adam::export_state() const {
    return State{step_count_, m_, v_};
}

void Adam::import_state(const State& state) {
    if (state.m.size() != params_.size() || state.v.size() != params_.size()) {
        throw ConfigError("adam: optimizer state does not match parameter list");
    }
    for (size_t i = 0; i < params_.size(); ++i) {
        if (state.m[i].size() != static_cast<size_t>(params_[i].size()) ||
            state.v[i].size() != static_cast<size_t>(params_[i].size())) {
            throw ConfigError("adam: optimizer state shape mismatch");
        }
    }
    m_ = state.m;
    v_ = state.v;
    step_count_ = state.step_count;
}

}  // namespace flexsched::nn
