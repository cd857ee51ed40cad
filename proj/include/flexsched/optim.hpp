#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flexsched/tensor.hpp"

namespace flexsched::nn {

struct AdamConfig {
    double lr = 5e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam over a fixed parameter list. Gradients must be finite;
// NaN/Inf is surfaced as a TrainingError rather than clipped away.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamConfig config);

    void step();
    void zero_grad();

    int64_t step_count() const { return step_count_; }
    const AdamConfig& config() const { return config_; }
    const std::vector<Tensor>& params() const { return params_; }

    // Moment state for checkpoint resume; layout matches the parameter list.
    struct State {
        int64_t step_count = 0;
        std::vector<std::vector<double>> m;
        std::vector<std::vector<double>> v;
    };
    State export_state() const;
    void import_state(const State& state);

private:
    std::vector<Tensor> params_;
    AdamConfig config_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    int64_t step_count_ = 0;
};

}  // namespace flexsched::nn
