#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "flexsched/environment.hpp"
#include "flexsched/optim.hpp"
#include "flexsched/policy.hpp"

namespace flexsched {

// One full schedule construction under the behavior policy. Feature
// snapshots make every step replayable without the environment.
struct Trajectory {
    std::shared_ptr<const Instance> instance;
    std::vector<StateFeatures> features;
    std::vector<int> action_index;  // into features[t].feasible
    std::vector<Action> actions;
    std::vector<double> log_probs;  // under the collecting parameters
    std::vector<double> rewards;
    std::vector<double> values;     // critic estimates; zeros without a critic
    int64_t makespan = 0;
    double initial_metric = 0.0;    // reward-mode estimate at s0

    int length() const { return static_cast<int>(actions.size()); }
};

struct TrainConfig {
    std::string algo = "reinforce";  // or "ppo"
    int epochs = 60;
    int instances_per_epoch = 128;
    int batch_size = 32;
    double lr = 5e-5;

    double gamma = 0.99;  // REINFORCE discount
    std::string advantage_mode = "per_timestep";  // "batch" | "none"

    // PPO (Adam shares lr above).
    double ppo_gamma = 1.0;
    double gae_lambda = 0.98;
    double clip_eps = 0.2;
    double value_coef = 0.5;
    double entropy_coef = 0.01;
    int ppo_epochs = 4;
    int minibatch = 512;

    RewardMode reward_mode = RewardMode::kLowerBound;
    GeneratorConfig generator;
    double time_scale = 0.0;  // 0 = per-instance max duration
    uint64_t seed = 1;
    int validation_size = 50;
    uint64_t validation_seed = 9999;
    bool grad_clip = false;  // off by default
    double grad_clip_norm = 1.0;
    int threads = 1;

    PolicyConfig policy;

    std::string checkpoint_path;  // best-by-validation; empty = do not save
    std::string report_path;      // per-epoch CSV; empty = do not write

    void validate() const;
};

// Key/value config file (one `key = value` per line, '#' comments).
TrainConfig train_config_from_string(const std::string& text);
TrainConfig train_config_from_file(const std::string& path);
std::string train_config_to_string(const TrainConfig& config);

struct EpochStats {
    int epoch = 0;
    double loss = 0.0;
    double train_mean_makespan = 0.0;
    double validation_mean_makespan = 0.0;
    double seconds = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    double best_validation = 0.0;
    int best_epoch = -1;
};

std::string train_report_csv(const TrainReport& report);

// One episode per instance; actions sampled from the policy's categorical
// output, rewards from the active mode. Per-instance RNG streams are derived
// from `seed`, so results do not depend on the thread count.
std::vector<Trajectory> collect_rollouts(std::span<const std::shared_ptr<const Instance>> instances,
                                         const PolicyParameters& params, const PolicyConfig& config,
                                         RewardMode mode, double time_scale, uint64_t seed,
                                         int threads = 1);

// Per-trajectory discounted returns G_t.
std::vector<double> discounted_returns(const Trajectory& traj, double gamma);

// Advantages for a batch: per-timestep mean-centering ("per_timestep"),
// whole-batch mean ("batch"), or raw returns ("none").
std::vector<std::vector<double>> centered_advantages(std::span<const Trajectory> trajectories,
                                                     double gamma,
                                                     const std::string& advantage_mode);

// Discounted returns, advantages centered per the mode, one Adam step on
// L = -sum_t A_t log pi(a_t) averaged over the batch. Returns the loss.
double reinforce_update(std::span<const Trajectory> trajectories, const PolicyParameters& params,
                        const PolicyConfig& config, nn::Adam& opt, double gamma,
                        const std::string& advantage_mode, bool grad_clip = false,
                        double clip_norm = 1.0);

struct GaeResult {
    std::vector<double> advantages;
    std::vector<double> returns;
};

// Standard GAE recursion; `values` must carry the bootstrap value (0 at
// terminal states) as its final entry, so values.size() == rewards.size()+1.
GaeResult gae(std::span<const double> rewards, std::span<const double> values, double gamma,
              double lambda);

struct PpoLosses {
    double policy = 0.0;
    double value = 0.0;
    double entropy = 0.0;
    double total = 0.0;
};

// One buffered step with its GAE statistics under the behavior policy.
struct PpoTransition {
    const Trajectory* traj = nullptr;
    int t = 0;
    double advantage = 0.0;
    double ret = 0.0;
    double old_log_prob = 0.0;
    double old_value = 0.0;
};

std::vector<PpoTransition> ppo_transitions(std::span<const Trajectory> buffer, double gamma,
                                           double lambda);

struct PpoLossParts {
    nn::Tensor policy;
    nn::Tensor value;
    nn::Tensor entropy_bonus;  // -mean entropy
    nn::Tensor total;
};

// Clipped-surrogate minibatch loss of Algorithm-style PPO: policy term with
// ratio clipping, value term with clipping around the old value, entropy
// bonus. Differentiable w.r.t. the parameters.
PpoLossParts ppo_minibatch_loss(std::span<const PpoTransition> minibatch,
                                const PolicyParameters& params, const TrainConfig& config);

// K epochs of clipped-surrogate updates over shuffled minibatches of the
// buffered transitions. Returns losses averaged over all minibatches.
PpoLosses ppo_update(std::span<const Trajectory> buffer, const PolicyParameters& params,
                     nn::Adam& opt, const TrainConfig& config, uint64_t shuffle_seed);

struct TrainHandle {
    PolicyParameters params;
    TrainReport report;
};

// Full training loop with greedy validation after every epoch; the best
// validation checkpoint is kept. `resume_from` restarts from a saved
// checkpoint (parameters + optimizer moments).
TrainHandle train(const TrainConfig& config, const std::string& resume_from = "");

}  // namespace flexsched
