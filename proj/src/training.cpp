#include "flexsched/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include "flexsched/evaluation.hpp"
#include "flexsched/parallel.hpp"

namespace flexsched {

using nn::Tensor;

void TrainConfig::validate() const {
    if (algo != "reinforce" && algo != "ppo") {
        throw ConfigError("train config: algo must be reinforce or ppo");
    }
    if (epochs < 1 || instances_per_epoch < 1 || batch_size < 1) {
        throw ConfigError("train config: epochs/instances/batch must be positive");
    }
    if (batch_size > instances_per_epoch) {
        throw ConfigError("train config: batch size exceeds instances per epoch");
    }
    if (lr <= 0.0) throw ConfigError("train config: lr must be positive");
    if (advantage_mode != "per_timestep" && advantage_mode != "batch" &&
        advantage_mode != "none") {
        throw ConfigError("train config: unknown advantage mode " + advantage_mode);
    }
    if (ppo_epochs < 1 || minibatch < 1) {
        throw ConfigError("train config: ppo epochs/minibatch must be positive");
    }
    if (algo == "ppo" && !policy.critic_head) {
        throw ConfigError("train config: ppo requires policy.critic_head");
    }
    if (threads < 1) throw ConfigError("train config: threads must be positive");
    policy.validate();
}

std::vector<Trajectory> collect_rollouts(std::span<const std::shared_ptr<const Instance>> instances,
                                         const PolicyParameters& params, const PolicyConfig& config,
                                         RewardMode mode, double time_scale, uint64_t seed,
                                         int threads) {
    std::vector<Trajectory> out(instances.size());
    run_sharded(static_cast<int>(instances.size()), threads, [&](int i) {
        nn::NoGradGuard no_grad;
        Rng rng = Rng::stream(seed, static_cast<uint64_t>(i));
        Trajectory traj;
        traj.instance = instances[static_cast<size_t>(i)];
        SchedulingState state(*traj.instance);
        traj.initial_metric = state.metric(mode);
        while (!state.terminal()) {
            StateFeatures f = state.extract_features(time_scale);
            PolicyOutput pol = policy_forward(f, params, config);
            size_t pick = rng.categorical(pol.probs);
            traj.log_probs.push_back(pol.log_probs.data()[pick]);
            traj.values.push_back(pol.value.defined() ? pol.value.item() : 0.0);
            traj.action_index.push_back(static_cast<int>(pick));
            traj.actions.push_back(pol.actions[pick]);
            traj.rewards.push_back(state.apply(pol.actions[pick], mode));
            traj.features.push_back(std::move(f));
        }
        traj.makespan = state.makespan();
        out[static_cast<size_t>(i)] = std::move(traj);
    });
    return out;
}

std::vector<double> discounted_returns(const Trajectory& traj, double gamma) {
    std::vector<double> g(traj.rewards.size(), 0.0);
    double acc = 0.0;
    for (int t = traj.length() - 1; t >= 0; --t) {
        acc = traj.rewards[static_cast<size_t>(t)] + gamma * acc;
        g[static_cast<size_t>(t)] = acc;
    }
    return g;
}

std::vector<std::vector<double>> centered_advantages(std::span<const Trajectory> trajectories,
                                                     double gamma,
                                                     const std::string& advantage_mode) {
    std::vector<std::vector<double>> returns;
    returns.reserve(trajectories.size());
    size_t max_len = 0;
    for (const Trajectory& traj : trajectories) {
        returns.push_back(discounted_returns(traj, gamma));
        max_len = std::max(max_len, returns.back().size());
    }
    if (advantage_mode == "none") return returns;

    std::vector<double> timestep_mean(max_len, 0.0);
    double batch_mean = 0.0;
    size_t batch_count = 0;
    for (size_t t = 0; t < max_len; ++t) {
        double total = 0.0;
        int alive = 0;
        for (const auto& g : returns) {
            if (t < g.size()) {
                total += g[t];
                ++alive;
            }
        }
        timestep_mean[t] = total / alive;
        batch_mean += total;
        batch_count += static_cast<size_t>(alive);
    }
    batch_mean /= static_cast<double>(batch_count);
    for (auto& g : returns) {
        for (size_t t = 0; t < g.size(); ++t) {
            g[t] -= advantage_mode == "per_timestep" ? timestep_mean[t] : batch_mean;
        }
    }
    return returns;
}

namespace {

void clip_gradients(const std::vector<Tensor>& params, double max_norm) {
    double total = 0.0;
    for (const Tensor& p : params) {
        for (double g : p.grad()) total += g * g;
    }
    total = std::sqrt(total);
    if (total <= max_norm) return;
    double factor = max_norm / total;
    for (const Tensor& p : params) {
        std::vector<double> scaled = p.grad();
        for (double& g : scaled) g *= factor;
        p.zero_grad();
        p.add_to_grad(scaled);
    }
}

// Replays one step on the tape. The stored log-prob must match the
// recomputation exactly; a mismatch means the trajectories are stale
// (collected under different parameters).
Tensor replay_log_prob(const Trajectory& traj, int t, const PolicyParameters& params,
                       const PolicyConfig& config, Tensor* value_out = nullptr,
                       Tensor* entropy_out = nullptr) {
    PolicyOutput pol = policy_forward(traj.features[static_cast<size_t>(t)], params, config);
    Tensor lp = nn::pick(pol.log_probs, traj.action_index[static_cast<size_t>(t)]);
    if (std::abs(lp.item() - traj.log_probs[static_cast<size_t>(t)]) > 1e-9) {
        throw TrainingError("on-policy violation: stored log-prob does not match the "
                            "current parameters");
    }
    if (value_out) *value_out = pol.value;
    if (entropy_out) {
        *entropy_out = nn::neg(nn::sum(nn::mul(nn::exp(pol.log_probs), pol.log_probs)));
    }
    return lp;
}

}  // namespace

double reinforce_update(std::span<const Trajectory> trajectories, const PolicyParameters& params,
                        const PolicyConfig& config, nn::Adam& opt, double gamma,
                        const std::string& advantage_mode, bool grad_clip, double clip_norm) {
    if (trajectories.empty()) throw ConfigError("reinforce_update: empty batch");

    std::vector<std::vector<double>> advantages =
        centered_advantages(trajectories, gamma, advantage_mode);

    // Gradients are accumulated trajectory by trajectory so only one episode
    // graph is alive at a time.
    opt.zero_grad();
    double loss_value = 0.0;
    double inv_batch = 1.0 / static_cast<double>(trajectories.size());
    for (size_t i = 0; i < trajectories.size(); ++i) {
        const Trajectory& traj = trajectories[i];
        Tensor traj_loss = Tensor::scalar(0.0);
        for (int t = 0; t < traj.length(); ++t) {
            double advantage = advantages[i][static_cast<size_t>(t)];
            if (advantage == 0.0) continue;  // zero-gradient term
            Tensor lp = replay_log_prob(traj, t, params, config);
            traj_loss = nn::add(traj_loss, nn::scale(lp, -advantage));
        }
        traj_loss = nn::scale(traj_loss, inv_batch);
        loss_value += traj_loss.item();
        if (traj_loss.requires_grad()) nn::backward(traj_loss);
    }
    if (grad_clip) clip_gradients(opt.params(), clip_norm);
    opt.step();
    return loss_value;
}

GaeResult gae(std::span<const double> rewards, std::span<const double> values, double gamma,
              double lambda) {
    if (values.size() != rewards.size() + 1) {
        throw InvariantError("gae: values must include the terminal bootstrap");
    }
    GaeResult out;
    out.advantages.assign(rewards.size(), 0.0);
    out.returns.assign(rewards.size(), 0.0);
    double acc = 0.0;
    for (int t = static_cast<int>(rewards.size()) - 1; t >= 0; --t) {
        double delta = rewards[static_cast<size_t>(t)] + gamma * values[static_cast<size_t>(t) + 1] -
                       values[static_cast<size_t>(t)];
        acc = delta + gamma * lambda * acc;
        out.advantages[static_cast<size_t>(t)] = acc;
        out.returns[static_cast<size_t>(t)] = acc + values[static_cast<size_t>(t)];
    }
    return out;
}

std::vector<PpoTransition> ppo_transitions(std::span<const Trajectory> buffer, double gamma,
                                           double lambda) {
    std::vector<PpoTransition> transitions;
    for (const Trajectory& traj : buffer) {
        std::vector<double> values(traj.values);
        values.push_back(0.0);  // terminal bootstrap
        GaeResult g = gae(traj.rewards, values, gamma, lambda);
        for (int t = 0; t < traj.length(); ++t) {
            transitions.push_back({&traj, t, g.advantages[static_cast<size_t>(t)],
                                   g.returns[static_cast<size_t>(t)],
                                   traj.log_probs[static_cast<size_t>(t)],
                                   traj.values[static_cast<size_t>(t)]});
        }
    }
    return transitions;
}

namespace {

// Loss contributions of one buffered transition (Algorithm-style PPO).
PpoLossParts ppo_transition_loss(const PpoTransition& tr, const PolicyParameters& params,
                                 const TrainConfig& config) {
    // Later PPO epochs intentionally reuse the data, so the stored log-prob
    // enters only through the ratio.
    PolicyOutput pol =
        policy_forward(tr.traj->features[static_cast<size_t>(tr.t)], params, config.policy);
    Tensor lp = nn::pick(pol.log_probs, tr.traj->action_index[static_cast<size_t>(tr.t)]);
    Tensor ratio = nn::exp(nn::add_const(lp, -tr.old_log_prob));
    if (!std::isfinite(ratio.item())) {
        throw TrainingError("ppo: non-finite probability ratio");
    }
    PpoLossParts parts;
    Tensor unclipped = nn::scale(ratio, tr.advantage);
    Tensor clipped = nn::scale(
        nn::clamp(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps), tr.advantage);
    parts.policy = nn::neg(nn::minimum(unclipped, clipped));

    Tensor v = pol.value;
    Tensor err = nn::add_const(v, -tr.ret);
    Tensor v_clipped = nn::add_const(
        nn::clamp(nn::add_const(v, -tr.old_value), -config.clip_eps, config.clip_eps),
        tr.old_value - tr.ret);
    parts.value = nn::maximum(nn::mul(err, err), nn::mul(v_clipped, v_clipped));

    parts.entropy_bonus = nn::sum(nn::mul(nn::exp(pol.log_probs), pol.log_probs));
    parts.total = nn::add(parts.policy,
                          nn::add(nn::scale(parts.value, config.value_coef),
                                  nn::scale(parts.entropy_bonus, config.entropy_coef)));
    return parts;
}

}  // namespace

PpoLossParts ppo_minibatch_loss(std::span<const PpoTransition> minibatch,
                                const PolicyParameters& params, const TrainConfig& config) {
    if (minibatch.empty()) throw ConfigError("ppo loss: empty minibatch");
    double scale = 1.0 / static_cast<double>(minibatch.size());
    PpoLossParts sum;
    sum.policy = Tensor::scalar(0.0);
    sum.value = Tensor::scalar(0.0);
    sum.entropy_bonus = Tensor::scalar(0.0);
    for (const PpoTransition& tr : minibatch) {
        PpoLossParts parts = ppo_transition_loss(tr, params, config);
        sum.policy = nn::add(sum.policy, parts.policy);
        sum.value = nn::add(sum.value, parts.value);
        sum.entropy_bonus = nn::add(sum.entropy_bonus, parts.entropy_bonus);
    }
    sum.policy = nn::scale(sum.policy, scale);
    sum.value = nn::scale(sum.value, scale);
    sum.entropy_bonus = nn::scale(sum.entropy_bonus, scale);
    sum.total = nn::add(sum.policy,
                        nn::add(nn::scale(sum.value, config.value_coef),
                                nn::scale(sum.entropy_bonus, config.entropy_coef)));
    return sum;
}

PpoLosses ppo_update(std::span<const Trajectory> buffer, const PolicyParameters& params,
                     nn::Adam& opt, const TrainConfig& config, uint64_t shuffle_seed) {
    if (buffer.empty()) throw ConfigError("ppo_update: empty buffer");
    std::vector<PpoTransition> transitions =
        ppo_transitions(buffer, config.ppo_gamma, config.gae_lambda);

    Rng rng(shuffle_seed);
    PpoLosses mean_losses;
    int minibatches = 0;
    for (int k = 0; k < config.ppo_epochs; ++k) {
        rng.shuffle(transitions);
        for (size_t start = 0; start < transitions.size();
             start += static_cast<size_t>(config.minibatch)) {
            size_t end =
                std::min(transitions.size(), start + static_cast<size_t>(config.minibatch));
            double scale = 1.0 / static_cast<double>(end - start);
            opt.zero_grad();
            PpoLosses batch_losses;
            // Streamed backward: one transition graph alive at a time.
            for (size_t idx = start; idx < end; ++idx) {
                PpoLossParts parts = ppo_transition_loss(transitions[idx], params, config);
                Tensor contribution = nn::scale(parts.total, scale);
                nn::backward(contribution);
                batch_losses.policy += scale * parts.policy.item();
                batch_losses.value += scale * parts.value.item();
                batch_losses.entropy += scale * parts.entropy_bonus.item();
                batch_losses.total += contribution.item();
            }
            if (config.grad_clip) clip_gradients(opt.params(), config.grad_clip_norm);
            opt.step();

            mean_losses.policy += batch_losses.policy;
            mean_losses.value += batch_losses.value;
            mean_losses.entropy += batch_losses.entropy;
            mean_losses.total += batch_losses.total;
            ++minibatches;
        }
    }
    mean_losses.policy /= minibatches;
    mean_losses.value /= minibatches;
    mean_losses.entropy /= minibatches;
    mean_losses.total /= minibatches;
    return mean_losses;
}

namespace {

std::shared_ptr<const Instance> make_training_instance(const GeneratorConfig& base,
                                                       uint64_t seed) {
    GeneratorConfig c = base;
    c.rng_seed = seed;
    return std::make_shared<const Instance>(generate_instance(c));
}

double validation_mean(const std::vector<std::shared_ptr<const Instance>>& instances,
                       const PolicyParameters& params, const PolicyConfig& config,
                       double time_scale, int threads) {
    std::vector<double> makespans(instances.size(), 0.0);
    run_sharded(static_cast<int>(instances.size()), threads, [&](int i) {
        makespans[static_cast<size_t>(i)] = static_cast<double>(
            decode_greedy(*instances[static_cast<size_t>(i)], params, config, time_scale).makespan);
    });
    double total = 0.0;
    for (double v : makespans) total += v;
    return total / static_cast<double>(instances.size());
}

}  // namespace

TrainHandle train(const TrainConfig& config, const std::string& resume_from) {
    config.validate();

    Rng init_rng = Rng::stream(config.seed, 0xfee1);
    PolicyParameters params = PolicyParameters::init(config.policy, init_rng);
    nn::AdamConfig adam_cfg;
    adam_cfg.lr = config.lr;
    nn::Adam opt(params.all(), adam_cfg);
    if (!resume_from.empty()) {
        Checkpoint ckpt = load_checkpoint(resume_from);
        if (!(ckpt.config == config.policy)) {
            throw ConfigError("resume: checkpoint policy config does not match");
        }
        params = ckpt.params;
        opt = nn::Adam(params.all(), adam_cfg);
        if (ckpt.optimizer_state) opt.import_state(*ckpt.optimizer_state);
    }

    std::vector<std::shared_ptr<const Instance>> validation;
    for (int i = 0; i < config.validation_size; ++i) {
        validation.push_back(
            make_training_instance(config.generator, derive_seed(config.validation_seed, i)));
    }

    TrainHandle handle;
    handle.params = params;
    handle.report.best_validation = std::numeric_limits<double>::infinity();

    int batches_per_epoch = config.instances_per_epoch / config.batch_size;
    uint64_t episode_counter = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        auto started = std::chrono::steady_clock::now();
        double loss_sum = 0.0;
        double makespan_sum = 0.0;
        int64_t makespan_count = 0;
        for (int b = 0; b < batches_per_epoch; ++b) {
            std::vector<std::shared_ptr<const Instance>> batch;
            for (int i = 0; i < config.batch_size; ++i) {
                batch.push_back(make_training_instance(
                    config.generator,
                    derive_seed(config.seed, (1ULL << 32) + episode_counter + static_cast<uint64_t>(i))));
            }
            std::vector<Trajectory> trajectories =
                collect_rollouts(batch, params, config.policy, config.reward_mode,
                                 config.time_scale,
                                 derive_seed(config.seed, (2ULL << 32) + episode_counter),
                                 config.threads);
            episode_counter += static_cast<uint64_t>(config.batch_size);
            for (const Trajectory& t : trajectories) {
                makespan_sum += static_cast<double>(t.makespan);
                ++makespan_count;
            }
            if (config.algo == "reinforce") {
                loss_sum += reinforce_update(trajectories, params, config.policy, opt,
                                             config.gamma, config.advantage_mode, config.grad_clip,
                                             config.grad_clip_norm);
            } else {
                PpoLosses losses = ppo_update(trajectories, params, opt, config,
                                              derive_seed(config.seed, (3ULL << 32) + episode_counter));
                loss_sum += losses.total;
            }
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.loss = loss_sum / batches_per_epoch;
        stats.train_mean_makespan = makespan_sum / static_cast<double>(makespan_count);
        stats.validation_mean_makespan =
            validation_mean(validation, params, config.policy, config.time_scale, config.threads);
        stats.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        handle.report.epochs.push_back(stats);

        if (stats.validation_mean_makespan < handle.report.best_validation) {
            handle.report.best_validation = stats.validation_mean_makespan;
            handle.report.best_epoch = epoch;
            handle.params = params.clone();
            if (!config.checkpoint_path.empty()) {
                nn::Adam::State opt_state = opt.export_state();
                save_checkpoint(config.checkpoint_path, params, config.policy, &opt_state,
                                "best at epoch " + std::to_string(epoch));
            }
        }
    }

    if (!config.report_path.empty()) {
        std::ofstream out(config.report_path);
        if (!out) throw ConfigError("train: cannot write report " + config.report_path);
        out << train_report_csv(handle.report);
    }
    return handle;
}

std::string train_report_csv(const TrainReport& report) {
    std::ostringstream out;
    out << "epoch,loss,train_mean_makespan,validation_mean_makespan,seconds\n";
    out.setf(std::ios::fmtflags(0), std::ios::floatfield);
    out.precision(17);
    for (const EpochStats& e : report.epochs) {
        out << e.epoch << ',' << e.loss << ',' << e.train_mean_makespan << ','
            << e.validation_mean_makespan << ',' << e.seconds << '\n';
    }
    return out.str();
}

// ---- config file ------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    size_t e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

}  // namespace

TrainConfig train_config_from_string(const std::string& text) {
    TrainConfig c;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ParseError("train config line " + std::to_string(line_no) +
                             ": expected key = value");
        }
        std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        try {
            if (key == "algo") c.algo = value;
            else if (key == "epochs") c.epochs = std::stoi(value);
            else if (key == "instances_per_epoch") c.instances_per_epoch = std::stoi(value);
            else if (key == "batch_size") c.batch_size = std::stoi(value);
            else if (key == "lr") c.lr = std::stod(value);
            else if (key == "gamma") c.gamma = std::stod(value);
            else if (key == "advantage_mode") c.advantage_mode = value;
            else if (key == "ppo_gamma") c.ppo_gamma = std::stod(value);
            else if (key == "gae_lambda") c.gae_lambda = std::stod(value);
            else if (key == "clip_eps") c.clip_eps = std::stod(value);
            else if (key == "value_coef") c.value_coef = std::stod(value);
            else if (key == "entropy_coef") c.entropy_coef = std::stod(value);
            else if (key == "ppo_epochs") c.ppo_epochs = std::stoi(value);
            else if (key == "minibatch") c.minibatch = std::stoi(value);
            else if (key == "reward_mode") c.reward_mode = reward_mode_from_string(value);
            else if (key == "variant") c.generator.variant = variant_from_string(value);
            else if (key == "jobs") c.generator.num_jobs = std::stoi(value);
            else if (key == "machines") c.generator.num_machines = std::stoi(value);
            else if (key == "stages") c.generator.stages = std::stoi(value);
            else if (key == "machines_per_stage") c.generator.machines_per_stage = std::stoi(value);
            else if (key == "time_scale") c.time_scale = std::stod(value);
            else if (key == "seed") c.seed = std::stoull(value);
            else if (key == "validation_size") c.validation_size = std::stoi(value);
            else if (key == "validation_seed") c.validation_seed = std::stoull(value);
            else if (key == "grad_clip") c.grad_clip = value == "true" || value == "1";
            else if (key == "grad_clip_norm") c.grad_clip_norm = std::stod(value);
            else if (key == "threads") c.threads = std::stoi(value);
            else if (key == "layers") c.policy.layers = std::stoi(value);
            else if (key == "heads") c.policy.heads = std::stoi(value);
            else if (key == "dim") c.policy.dim = std::stoi(value);
            else if (key == "ffn_dim") c.policy.ffn_dim = std::stoi(value);
            else if (key == "head_hidden") c.policy.head_hidden = std::stoi(value);
            else if (key == "rope_base") c.policy.rope_base = std::stod(value);
            else if (key == "ffn_activation") c.policy.ffn_activation = value;
            else if (key == "use_kv_cache") c.policy.use_kv_cache = value == "true" || value == "1";
            else if (key == "critic_head") c.policy.critic_head = value == "true" || value == "1";
            else if (key == "checkpoint_path") c.checkpoint_path = value;
            else if (key == "report_path") c.report_path = value;
            else throw ParseError("train config line " + std::to_string(line_no) +
                                  ": unknown key " + key);
        } catch (const std::invalid_argument&) {
            throw ParseError("train config line " + std::to_string(line_no) + ": bad value for " +
                             key);
        } catch (const std::out_of_range&) {
            throw ParseError("train config line " + std::to_string(line_no) + ": bad value for " +
                             key);
        }
    }
    return c;
}

TrainConfig train_config_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("train config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return train_config_from_string(buf.str());
}

std::string train_config_to_string(const TrainConfig& c) {
    std::ostringstream out;
    out.precision(17);
    out << "algo = " << c.algo << '\n'
        << "epochs = " << c.epochs << '\n'
        << "instances_per_epoch = " << c.instances_per_epoch << '\n'
        << "batch_size = " << c.batch_size << '\n'
        << "lr = " << c.lr << '\n'
        << "gamma = " << c.gamma << '\n'
        << "advantage_mode = " << c.advantage_mode << '\n'
        << "ppo_gamma = " << c.ppo_gamma << '\n'
        << "gae_lambda = " << c.gae_lambda << '\n'
        << "clip_eps = " << c.clip_eps << '\n'
        << "value_coef = " << c.value_coef << '\n'
        << "entropy_coef = " << c.entropy_coef << '\n'
        << "ppo_epochs = " << c.ppo_epochs << '\n'
        << "minibatch = " << c.minibatch << '\n'
        << "reward_mode = " << to_string(c.reward_mode) << '\n'
        << "variant = " << to_string(c.generator.variant) << '\n'
        << "jobs = " << c.generator.num_jobs << '\n'
        << "machines = " << c.generator.num_machines << '\n'
        << "stages = " << c.generator.stages << '\n'
        << "machines_per_stage = " << c.generator.machines_per_stage << '\n'
        << "time_scale = " << c.time_scale << '\n'
        << "seed = " << c.seed << '\n'
        << "validation_size = " << c.validation_size << '\n'
        << "validation_seed = " << c.validation_seed << '\n'
        << "grad_clip = " << (c.grad_clip ? "true" : "false") << '\n'
        << "grad_clip_norm = " << c.grad_clip_norm << '\n'
        << "threads = " << c.threads << '\n'
        << "layers = " << c.policy.layers << '\n'
        << "heads = " << c.policy.heads << '\n'
        << "dim = " << c.policy.dim << '\n'
        << "ffn_dim = " << c.policy.ffn_dim << '\n'
        << "head_hidden = " << c.policy.head_hidden << '\n'
        << "rope_base = " << c.policy.rope_base << '\n'
        << "ffn_activation = " << c.policy.ffn_activation << '\n'
        << "use_kv_cache = " << (c.policy.use_kv_cache ? "true" : "false") << '\n'
        << "critic_head = " << (c.policy.critic_head ? "true" : "false") << '\n'
        << "checkpoint_path = " << c.checkpoint_path << '\n'
        << "report_path = " << c.report_path << '\n';
    return out.str();
}

}  // namespace flexsched
