// Acceptance suite: one checkable criterion per number, each printing a
// single [PASS]/[FAIL] line. Run `acceptance --all` or `--criterion N`.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "flexsched/evaluation.hpp"
#include "flexsched/oracle.hpp"
#include "flexsched/parallel.hpp"
#include "flexsched/training.hpp"

using namespace flexsched;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

// ---- shared helpers ---------------------------------------------------------

Instance random_tiny(Rng& rng, int max_ops, int max_machines = 3, int max_duration = 9) {
    int machines = static_cast<int>(rng.uniform_int(1, max_machines));
    Instance inst;
    inst.num_machines = machines;
    int budget = max_ops;
    int jobs = static_cast<int>(rng.uniform_int(1, 3));
    for (int i = 0; i < jobs && budget > 0; ++i) {
        int ops = static_cast<int>(rng.uniform_int(1, std::min<int64_t>(3, budget)));
        budget -= ops;
        Job job;
        for (int j = 0; j < ops; ++j) {
            OperationSpec op;
            int alts = static_cast<int>(rng.uniform_int(1, machines));
            std::vector<int> pool;
            for (int m = 0; m < machines; ++m) pool.push_back(m);
            for (int a = 0; a < alts; ++a) {
                int pick = static_cast<int>(rng.uniform_int(0, static_cast<int64_t>(pool.size()) - 1));
                op.alternatives.push_back({pool[pick], rng.uniform_int(1, max_duration)});
                pool.erase(pool.begin() + pick);
            }
            std::sort(op.alternatives.begin(), op.alternatives.end(),
                      [](const Alternative& x, const Alternative& y) { return x.machine < y.machine; });
            job.operations.push_back(std::move(op));
        }
        inst.jobs.push_back(std::move(job));
    }
    inst.num_jobs = static_cast<int>(inst.jobs.size());
    inst.finalize();
    return inst;
}

// Number of complete schedules = interleavings x machine assignments.
double schedule_tree_size(const Instance& inst) {
    double interleavings = 1.0;
    int placed = 0;
    for (const Job& job : inst.jobs) {
        for (size_t j = 0; j < job.operations.size(); ++j) {
            ++placed;
            interleavings *= placed;
        }
        for (size_t j = 1; j <= job.operations.size(); ++j) interleavings /= static_cast<double>(j);
    }
    double assignments = 1.0;
    for (const Job& job : inst.jobs) {
        for (const OperationSpec& op : job.operations) {
            assignments *= static_cast<double>(op.alternatives.size());
        }
    }
    return interleavings * assignments;
}

PolicyConfig desk_policy(int dim, int heads, int layers, bool critic) {
    PolicyConfig c;
    c.layers = layers;
    c.heads = heads;
    c.dim = dim;
    c.ffn_dim = 4 * dim;
    c.head_hidden = 64;
    c.critic_head = critic;
    return c;
}

PolicyConfig check_policy(bool critic = false) {
    PolicyConfig c;
    c.layers = 1;
    c.heads = 2;
    c.dim = 8;
    c.ffn_dim = 16;
    c.head_hidden = 8;
    c.ffn_activation = "tanh";  // keeps finite differences off ReLU kinks
    c.critic_head = critic;
    return c;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

// ---- criterion 1: transition oracle equivalence ------------------------------

Outcome criterion_1() {
    auto started = std::chrono::steady_clock::now();
    Rng rng(20260810);
    int instances_checked = 0;
    int64_t sequences = 0;
    while (instances_checked < 500) {
        Instance inst = random_tiny(rng, 9);
        if (schedule_tree_size(inst) > 60000) continue;  // keep the sweep under budget
        bool all_equal = true;
        enumerate_schedules(inst, [&](std::span<const Action> actions, int64_t oracle_makespan) {
            SchedulingState s(inst);
            for (const Action& a : actions) s.apply(a);
            ++sequences;
            if (s.makespan() != oracle_makespan) all_equal = false;
        });
        if (!all_equal) {
            return {false, "sequence makespan mismatch on instance " +
                               std::to_string(instances_checked)};
        }
        ++instances_checked;
    }
    double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    std::ostringstream detail;
    detail << instances_checked << " instances, " << sequences << " schedules, "
           << seconds << "s";
    if (seconds >= 120.0) return {false, detail.str() + " (over the 2 min budget)"};
    return {true, detail.str()};
}

// ---- criterion 2: reward telescoping -----------------------------------------

Outcome criterion_2() {
    Rng rng(7070);
    for (int rollout = 0; rollout < 1000; ++rollout) {
        Instance inst;
        if (rollout % 3 == 0) {
            inst = random_tiny(rng, 9);
        } else {
            GeneratorConfig g;
            g.variant = rollout % 3 == 1 ? GeneratorConfig::Variant::kSd1
                                         : GeneratorConfig::Variant::kSd2;
            g.num_jobs = static_cast<int>(rng.uniform_int(2, 5));
            g.num_machines = static_cast<int>(rng.uniform_int(2, 4));
            g.rng_seed = rng.next_u64();
            inst = generate_sd(g);
        }
        SchedulingState s(inst);
        int64_t lb0 = s.lower_bound();
        double total = 0.0;
        Rng rollout_rng(rng.next_u64());
        while (!s.terminal()) {
            auto actions = s.feasible_actions();
            total += s.apply(actions[static_cast<size_t>(rollout_rng.uniform_int(
                                 0, static_cast<int64_t>(actions.size()) - 1))],
                             RewardMode::kLowerBound);
        }
        if (total != static_cast<double>(lb0 - s.makespan())) {
            return {false, "telescoping broke on rollout " + std::to_string(rollout)};
        }
    }
    return {true, "1000 rollouts, exact identity"};
}

// ---- criterion 3: state-hash Markov property -----------------------------------

Outcome criterion_3() {
    Rng rng(515);
    PolicyConfig cfg = desk_policy(16, 2, 1, false);
    Rng prng(99);
    PolicyParameters params = PolicyParameters::init(cfg, prng);

    int pairs_checked = 0;
    for (int trial = 0; trial < 400 && pairs_checked < 100; ++trial) {
        Instance inst = random_tiny(rng, 6, 2);
        std::map<uint64_t, std::vector<std::vector<Action>>> groups;
        std::vector<Action> prefix;
        std::function<void(SchedulingState&, int)> explore = [&](SchedulingState& s, int depth) {
            if (depth > 0) groups[s.canonical_hash()].push_back(prefix);
            if (s.terminal() || depth >= 4) return;
            for (const Action& a : s.feasible_actions()) {
                SchedulingState next = s;
                next.apply(a);
                prefix.push_back(a);
                explore(next, depth + 1);
                prefix.pop_back();
            }
        };
        SchedulingState root(inst);
        explore(root, 0);

        for (auto& [hash, prefixes] : groups) {
            if (prefixes.size() < 2 || pairs_checked >= 100) continue;
            std::vector<std::vector<Action>> completions;
            std::vector<int64_t> makespans;
            for (size_t i = 0; i < 2; ++i) {
                SchedulingState s(inst);
                for (const Action& a : prefixes[i]) s.apply(a);
                std::vector<Action> completion;
                while (!s.terminal()) {
                    PolicyOutput out = policy_forward(s.extract_features(), params, cfg);
                    int best = 0;
                    for (int k = 1; k < static_cast<int>(out.probs.size()); ++k) {
                        if (out.probs[static_cast<size_t>(k)] > out.probs[static_cast<size_t>(best)]) {
                            best = k;
                        }
                    }
                    completion.push_back(out.actions[static_cast<size_t>(best)]);
                    s.apply(completion.back());
                }
                completions.push_back(std::move(completion));
                makespans.push_back(s.makespan());
            }
            if (completions[0] != completions[1] || makespans[0] != makespans[1]) {
                return {false, "diverging greedy completions for an equal-hash pair"};
            }
            ++pairs_checked;
        }
    }
    if (pairs_checked < 100) {
        return {false, "only " + std::to_string(pairs_checked) + " equal-hash pairs constructed"};
    }
    return {true, "100/100 equal-hash pairs completed identically"};
}

// ---- criterion 4: gradient suite ----------------------------------------------

Outcome criterion_4() {
    nn::NoGradGuard* no = nullptr;
    (void)no;
    Rng rng(833);
    double worst_primitive = 0.0;
    std::string worst_name;

    auto check = [&](const char* name, const std::function<nn::Tensor()>& fn,
                     const std::vector<std::pair<std::string, nn::Tensor>>& params) {
        nn::GradCheckReport r = nn::finite_diff_check(fn, params, 1e-5);
        if (r.max_rel_err > worst_primitive) {
            worst_primitive = r.max_rel_err;
            worst_name = std::string(name) + "/" + r.worst;
        }
    };
    auto rand_tensor = [&](std::vector<int> shape) {
        int64_t n = 1;
        for (int d : shape) n *= d;
        std::vector<double> data(static_cast<size_t>(n));
        for (double& v : data) v = rng.uniform_real() * 2.0 - 1.0;
        return nn::Tensor::from(std::move(data), std::move(shape), true);
    };
    // Coefficients must be identical across repeated evaluations of the same
    // probe, so they are derived from the tensor size, not the shared stream.
    auto weighted = [](const nn::Tensor& x) {
        Rng wrng(0xC0FFEEULL ^ static_cast<uint64_t>(x.size()));
        std::vector<double> c(static_cast<size_t>(x.size()));
        for (double& v : c) v = wrng.uniform_real() + 0.5;
        return nn::sum(nn::mul(x, nn::Tensor::from(std::move(c), x.shape(), false)));
    };

    for (int config = 0; config < 20; ++config) {
        int r = static_cast<int>(rng.uniform_int(2, 5));
        int c = 2 * static_cast<int>(rng.uniform_int(1, 4));
        nn::Tensor x = rand_tensor({r, c});
        nn::Tensor y = rand_tensor({r, c});
        std::vector<std::pair<std::string, nn::Tensor>> xy = {{"x", x}, {"y", y}};
        check("add", [&] { return weighted(nn::add(x, y)); }, xy);
        check("mul", [&] { return weighted(nn::mul(x, y)); }, xy);
        check("matmul", [&] { return weighted(nn::matmul(x, nn::transpose(y))); }, xy);
        check("exp", [&] { return weighted(nn::exp(x)); }, {{"x", x}});
        check("tanh", [&] { return weighted(nn::tanh_act(x)); }, {{"x", x}});
        check("relu", [&] { return weighted(nn::relu(nn::add_const(x, 3.0))); }, {{"x", x}});
        // Piecewise-linear ops are probed away from their kinks.
        nn::Tensor y_apart = rand_tensor({r, c});
        for (int64_t i = 0; i < y_apart.size(); ++i) {
            double xv = x.data()[static_cast<size_t>(i)];
            double& yv = y_apart.data()[static_cast<size_t>(i)];
            double delta = yv - xv;
            if (std::abs(delta) < 0.05) yv = xv + (delta >= 0.0 ? 0.1 : -0.1);
        }
        std::vector<std::pair<std::string, nn::Tensor>> xy_apart = {{"x", x}, {"y", y_apart}};
        check("maximum", [&] { return weighted(nn::maximum(x, y_apart)); }, xy_apart);
        check("minimum", [&] { return weighted(nn::minimum(x, y_apart)); }, xy_apart);
        nn::Tensor z = rand_tensor({r, c});
        for (int64_t i = 0; i < z.size(); ++i) {
            double& v = z.data()[static_cast<size_t>(i)];
            if (std::abs(std::abs(10.0 * v) - 3.0) < 0.05) v += v >= 0.0 ? 0.02 : -0.02;
        }
        check("clamp", [&] { return weighted(nn::clamp(nn::scale(z, 10.0), -3.0, 3.0)); },
              {{"z", z}});
        nn::Tensor pos = rand_tensor({r, c});
        for (double& v : pos.data()) v = std::abs(v) + 0.5;
        check("log", [&] { return weighted(nn::log(pos)); }, {{"pos", pos}});
        check("sum", [&] { return nn::sum(nn::mul(x, x)); }, {{"x", x}});
        check("mean", [&] { return nn::mean(nn::mul(x, y)); }, xy);
        std::vector<uint8_t> mask(static_cast<size_t>(r) * c, 1);
        mask[static_cast<size_t>(rng.uniform_int(0, r * c - 1))] = 0;
        check("softmax_masked", [&] { return weighted(nn::softmax_masked(x, mask)); },
              {{"x", x}});
        nn::Tensor gain = rand_tensor({c});
        nn::Tensor bias = rand_tensor({c});
        check("layer_norm", [&] { return weighted(nn::layer_norm(x, gain, bias)); },
              {{"x", x}, {"gain", gain}, {"bias", bias}});
        std::vector<int> positions(static_cast<size_t>(r));
        for (int& p : positions) p = static_cast<int>(rng.uniform_int(0, 6));
        check("rope", [&] { return weighted(nn::rope(x, positions, 1000.0)); }, {{"x", x}});
        nn::Tensor w = rand_tensor({c, 3});
        nn::Tensor b = rand_tensor({3});
        check("linear", [&] { return weighted(nn::linear(x, w, b)); },
              {{"x", x}, {"w", w}, {"b", b}});
        nn::Tensor v = rand_tensor({c});
        check("log_softmax", [&] { return weighted(nn::log_softmax(v)); }, {{"v", v}});
        check("pick", [&] { return nn::pick(nn::mul(v, v), c / 2); }, {{"v", v}});
        std::vector<int> idx = {r - 1, 0};
        check("gather_rows", [&] { return weighted(nn::gather_rows(x, idx)); }, {{"x", x}});
        check("mean_rows", [&] { return weighted(nn::mean_rows(x)); }, {{"x", x}});
        check("slice_cols", [&] { return weighted(nn::slice_cols(x, 1, c - 1)); }, {{"x", x}});
        std::vector<nn::Tensor> parts = {x, y};
        check("concat_cols", [&] { return weighted(nn::concat_cols(parts)); }, xy);
        check("reshape", [&] { return weighted(nn::reshape(x, {c, r})); }, {{"x", x}});
    }
    if (worst_primitive > 1e-4) {
        return {false, "primitive " + worst_name + " rel err " + std::to_string(worst_primitive)};
    }

    // End-to-end objectives on 20 random configurations each.
    double worst_e2e = 0.0;
    std::string worst_e2e_name;
    for (int config = 0; config < 20; ++config) {
        PolicyConfig cfg = check_policy(true);
        Rng prng(rng.next_u64());
        PolicyParameters params = PolicyParameters::init(cfg, prng);
        // Small durations keep the objective O(10): at the pinned step 1e-5 a
        // large loss would drown tiny per-parameter gradients in cancellation
        // noise.
        auto inst = std::make_shared<const Instance>(random_tiny(rng, 4, 2, 3));
        std::vector<std::shared_ptr<const Instance>> batch = {inst};
        auto trajs = collect_rollouts(batch, params, cfg, RewardMode::kLowerBound, 0.0,
                                      rng.next_u64());
        const Trajectory& traj = trajs[0];
        auto returns = discounted_returns(traj, 0.99);

        auto reinforce_loss = [&]() {
            nn::Tensor loss = nn::Tensor::scalar(0.0);
            for (int t = 0; t < traj.length(); ++t) {
                PolicyOutput out = policy_forward(traj.features[static_cast<size_t>(t)], params, cfg);
                loss = nn::add(loss, nn::scale(nn::pick(out.log_probs,
                                                        traj.action_index[static_cast<size_t>(t)]),
                                               -returns[static_cast<size_t>(t)]));
            }
            return loss;
        };
        auto named = params.named();
        nn::GradCheckReport r1 = nn::finite_diff_check(reinforce_loss, named, 1e-5);
        if (r1.max_rel_err > worst_e2e) {
            worst_e2e = r1.max_rel_err;
            worst_e2e_name = "reinforce/" + r1.worst;
        }

        // PPO objective evaluated slightly off the behavior parameters so the
        // ratios are non-trivial but stay inside the clip range.
        TrainConfig tc;
        tc.algo = "ppo";
        tc.policy = cfg;
        auto transitions = ppo_transitions(trajs, tc.ppo_gamma, tc.gae_lambda);
        for (auto& t : params.all()) {
            for (double& v : t.data()) v += (rng.uniform_real() - 0.5) * 2e-3;
        }
        auto ppo_loss = [&]() {
            return ppo_minibatch_loss(transitions, params, tc).total;
        };
        nn::GradCheckReport r2 = nn::finite_diff_check(ppo_loss, named, 1e-5);
        if (r2.max_rel_err > worst_e2e) {
            worst_e2e = r2.max_rel_err;
            worst_e2e_name = "ppo/" + r2.worst;
        }
    }
    if (worst_e2e > 1e-3) {
        return {false, "objective " + worst_e2e_name + " rel err " + std::to_string(worst_e2e)};
    }
    std::ostringstream detail;
    detail << "primitives worst " << worst_primitive << " (" << worst_name
           << "), objectives worst " << worst_e2e << " (" << worst_e2e_name << ")";
    return {true, detail.str()};
}

// ---- criterion 5: attention invariants ----------------------------------------

Outcome criterion_5() {
    Rng rng(606);

    // RoPE relative-shift invariance.
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> qd(8), kd(8);
        for (double& v : qd) v = rng.uniform_real() * 2.0 - 1.0;
        for (double& v : kd) v = rng.uniform_real() * 2.0 - 1.0;
        nn::Tensor q = nn::Tensor::from(qd, {1, 8});
        nn::Tensor k = nn::Tensor::from(kd, {1, 8});
        int a = static_cast<int>(rng.uniform_int(0, 12));
        int b = static_cast<int>(rng.uniform_int(0, 12));
        int c = static_cast<int>(rng.uniform_int(0, 12));
        auto dot = [](const nn::Tensor& u, const nn::Tensor& v) {
            double s = 0.0;
            for (int j = 0; j < 8; ++j) s += u.data()[static_cast<size_t>(j)] * v.data()[static_cast<size_t>(j)];
            return s;
        };
        double base = dot(nn::rope(q, {a}, 10000.0), nn::rope(k, {b}, 10000.0));
        double shifted = dot(nn::rope(q, {a + c}, 10000.0), nn::rope(k, {b + c}, 10000.0));
        if (std::abs(base - shifted) > 1e-9) {
            return {false, "rope shift invariance violated: " + std::to_string(base - shifted)};
        }
    }

    // Masked softmax rows: sums within 1e-12, exact zeros on masked entries.
    for (int trial = 0; trial < 50; ++trial) {
        int r = static_cast<int>(rng.uniform_int(1, 6));
        int c = static_cast<int>(rng.uniform_int(1, 8));
        std::vector<double> data(static_cast<size_t>(r) * c);
        for (double& v : data) v = rng.uniform_real() * 8.0 - 4.0;
        std::vector<uint8_t> mask(static_cast<size_t>(r) * c);
        for (auto& m : mask) m = rng.uniform_real() < 0.6 ? 1 : 0;
        nn::Tensor p = nn::softmax_masked(nn::Tensor::from(data, {r, c}), mask);
        for (int i = 0; i < r; ++i) {
            double row = 0.0;
            bool any = false;
            for (int j = 0; j < c; ++j) {
                double v = p.data()[static_cast<size_t>(i) * c + j];
                if (mask[static_cast<size_t>(i) * c + j]) {
                    any = true;
                    row += v;
                } else if (v != 0.0) {
                    return {false, "masked entry not exactly zero"};
                }
            }
            if (any && std::abs(row - 1.0) > 1e-12) {
                return {false, "softmax row sum off by " + std::to_string(row - 1.0)};
            }
        }
    }

    // Permutation equivariances and M2O absence on random instances.
    PolicyConfig cfg = desk_policy(16, 2, 2, false);
    Rng prng(31);
    PolicyParameters params = PolicyParameters::init(cfg, prng);
    for (int trial = 0; trial < 20; ++trial) {
        GeneratorConfig g;
        g.variant = GeneratorConfig::Variant::kSd1;
        g.num_jobs = static_cast<int>(rng.uniform_int(2, 4));
        g.num_machines = static_cast<int>(rng.uniform_int(2, 4));
        g.rng_seed = rng.next_u64();
        Instance inst = generate_sd(g);

        // Machine permutation.
        std::vector<int> sigma(static_cast<size_t>(inst.num_machines));
        for (int m = 0; m < inst.num_machines; ++m) sigma[static_cast<size_t>(m)] = m;
        rng.shuffle(sigma);
        Instance permuted = inst;
        for (auto& job : permuted.jobs) {
            for (auto& op : job.operations) {
                for (auto& alt : op.alternatives) alt.machine = sigma[static_cast<size_t>(alt.machine)];
                std::sort(op.alternatives.begin(), op.alternatives.end(),
                          [](const Alternative& x, const Alternative& y) {
                              return x.machine < y.machine;
                          });
            }
        }
        permuted.finalize();
        PolicyOutput base = policy_forward(SchedulingState(inst).extract_features(), params, cfg);
        PolicyOutput perm =
            policy_forward(SchedulingState(permuted).extract_features(), params, cfg);
        for (size_t i = 0; i < base.actions.size(); ++i) {
            Action want{base.actions[i].op, sigma[static_cast<size_t>(base.actions[i].machine)]};
            bool matched = false;
            for (size_t j = 0; j < perm.actions.size(); ++j) {
                if (perm.actions[j] == want) {
                    if (std::abs(base.probs[i] - perm.probs[j]) > 1e-9) {
                        return {false, "machine permutation changed a score by " +
                                           std::to_string(base.probs[i] - perm.probs[j])};
                    }
                    matched = true;
                }
            }
            if (!matched) return {false, "machine permutation lost an action"};
        }

        // Job permutation.
        std::vector<int> job_perm(static_cast<size_t>(inst.num_jobs));
        for (int j = 0; j < inst.num_jobs; ++j) job_perm[static_cast<size_t>(j)] = j;
        rng.shuffle(job_perm);
        Instance shuffled = inst;
        for (int j = 0; j < inst.num_jobs; ++j) {
            shuffled.jobs[static_cast<size_t>(job_perm[static_cast<size_t>(j)])] =
                inst.jobs[static_cast<size_t>(j)];
        }
        shuffled.finalize();
        PolicyOutput shuf =
            policy_forward(SchedulingState(shuffled).extract_features(), params, cfg);
        for (size_t i = 0; i < base.actions.size(); ++i) {
            int job = inst.op_job[base.actions[i].op];
            int idx = inst.op_index[base.actions[i].op];
            Action want{shuffled.flat_id(job_perm[static_cast<size_t>(job)], idx),
                        base.actions[i].machine};
            bool matched = false;
            for (size_t j = 0; j < shuf.actions.size(); ++j) {
                if (shuf.actions[j] == want) {
                    if (std::abs(base.probs[i] - shuf.probs[j]) > 1e-9) {
                        return {false, "job permutation changed a score"};
                    }
                    matched = true;
                }
            }
            if (!matched) return {false, "job permutation lost an action"};
        }

        // M2O absence: op embeddings blind to machine-side inputs.
        StateFeatures f = SchedulingState(inst).extract_features();
        ForwardTrace t1, t2;
        policy_forward(f, params, cfg, &t1);
        StateFeatures poked = f;
        for (double& v : poked.mach_feat) v += 2.5;
        for (double& v : poked.edge_scaled) v *= 1.75;
        policy_forward(poked, params, cfg, &t2);
        if (max_abs_diff(t1.op_embed.data(), t2.op_embed.data()) != 0.0) {
            return {false, "machine-side inputs leaked into op embeddings"};
        }
    }
    return {true, "rope/softmax/equivariance/M2O all within tolerance"};
}

// ---- criterion 6: KV-cache equivalence ----------------------------------------

Outcome criterion_6() {
    Rng rng(909);
    PolicyConfig cfg = desk_policy(32, 4, 2, false);
    Rng prng(55);
    PolicyParameters params = PolicyParameters::init(cfg, prng);
    double worst = 0.0;
    for (int episode = 0; episode < 50; ++episode) {
        GeneratorConfig g;
        g.variant = episode % 2 ? GeneratorConfig::Variant::kSd1 : GeneratorConfig::Variant::kSd2;
        g.num_jobs = static_cast<int>(rng.uniform_int(2, 4));
        g.num_machines = static_cast<int>(rng.uniform_int(2, 4));
        g.rng_seed = rng.next_u64();
        Instance inst = generate_sd(g);
        SchedulingState s(inst);
        KvCache cache;
        Rng pick(rng.next_u64());
        while (!s.terminal()) {
            StateFeatures f = s.extract_features();
            PolicyOutput cold = policy_forward(f, params, cfg);
            PolicyOutput warm = policy_forward_cached(f, params, cfg, cache);
            worst = std::max(worst, max_abs_diff(cold.probs, warm.probs));
            if (worst > 1e-6) {
                return {false, "probability mismatch " + std::to_string(worst)};
            }
            s.apply(cold.actions[pick.categorical(cold.probs)]);
        }
    }
    std::ostringstream detail;
    detail << "50 episodes, max |p_cached - p_cold| = " << worst;
    return {true, detail.str()};
}

// ---- criterion 7: PDR regression ----------------------------------------------

Outcome criterion_7() {
    // SPT exactness (always checked).
    Rng rng(112);
    for (int trial = 0; trial < 100; ++trial) {
        Instance inst = random_tiny(rng, 9);
        SchedulingState s(inst);
        Rng sel(0);
        while (!s.terminal()) {
            Action a = pdr_select(s, Rule::kSpt, sel);
            int64_t chosen = inst.op(a.op).duration_on(a.machine);
            for (const Action& other : s.feasible_actions()) {
                if (chosen > inst.op(other.op).duration_on(other.machine)) {
                    return {false, "SPT picked a non-minimal pair"};
                }
            }
            s.apply(a);
        }
    }

    std::string dir = "../../data/benchmarks/brandimarte";
    std::string refs_path = "../../data/refs/brandimarte.csv";
    if (!std::filesystem::exists(dir)) {
        dir = "data/benchmarks/brandimarte";
        refs_path = "data/refs/brandimarte.csv";
    }
    if (!std::filesystem::exists(dir) || std::filesystem::is_empty(dir)) {
        return {false,
                "SPT exactness ok, but the Brandimarte files are not present under "
                "data/benchmarks/brandimarte (no network in this environment; run "
                "scripts/fetch_benchmarks.py where network is available)"};
    }
    auto refs = load_reference_table(refs_path);
    InstanceSolver mwkr = [](const Instance& inst) {
        Rng r(1);
        PdrResult p = pdr_rollout(inst, Rule::kMwkr, r);
        DecodeResult out;
        out.makespan = p.makespan;
        out.schedule = p.schedule;
        out.actions = p.actions;
        return out;
    };
    BenchTable table = benchmark_suite(dir, mwkr, refs);
    if (table.rows.size() != 10 || table.rows_with_ref != 10) {
        return {false, "expected 10 Brandimarte instances with references, found " +
                           std::to_string(table.rows_with_ref)};
    }
    std::ostringstream detail;
    detail << "MWKR instance-wise mean gap " << table.mean_gap << "% (target 28.91 +/- 5)";
    if (std::abs(table.mean_gap - 28.91) > 5.0) return {false, detail.str()};
    return {true, detail.str()};
}

// ---- criterion 8: desk-scale learning check ------------------------------------

struct DeskRun {
    double best_validation = 0.0;
    double heldout_mean = 0.0;
};

DeskRun desk_train(const std::string& algo, uint64_t seed, const std::string& ckpt_path) {
    TrainConfig tc;
    tc.algo = algo;
    tc.epochs = 60;
    tc.instances_per_epoch = 128;
    tc.batch_size = 32;
    tc.lr = 5e-5;
    tc.gamma = 0.99;
    tc.generator.variant = GeneratorConfig::Variant::kSd1;
    tc.generator.num_jobs = 6;
    tc.generator.num_machines = 3;
    tc.validation_size = 50;
    tc.validation_seed = 246810;  // shared by both algorithms
    tc.seed = seed;
    tc.policy = desk_policy(32, 4, 1, algo == "ppo");
    tc.checkpoint_path = ckpt_path;
    TrainHandle handle = train(tc);

    DeskRun run;
    run.best_validation = handle.report.best_validation;
    double total = 0.0;
    for (int i = 0; i < 100; ++i) {
        GeneratorConfig g = tc.generator;
        g.rng_seed = derive_seed(1357911, static_cast<uint64_t>(i));
        Instance inst = generate_instance(g);
        total += static_cast<double>(decode_greedy(inst, handle.params, tc.policy).makespan);
    }
    run.heldout_mean = total / 100.0;
    return run;
}

Outcome criterion_8() {
    // Baselines on the held-out evaluation set.
    double random_mean = 0.0;
    std::map<Rule, double> pdr_means;
    for (int i = 0; i < 100; ++i) {
        GeneratorConfig g;
        g.variant = GeneratorConfig::Variant::kSd1;
        g.num_jobs = 6;
        g.num_machines = 3;
        g.rng_seed = derive_seed(1357911, static_cast<uint64_t>(i));
        Instance inst = generate_instance(g);
        Rng rr = Rng::stream(8642, static_cast<uint64_t>(i));
        random_mean += static_cast<double>(pdr_rollout(inst, Rule::kRandom, rr).makespan);
        for (Rule rule : {Rule::kFifo, Rule::kSpt, Rule::kMopnr, Rule::kMwkr}) {
            Rng pr(1);
            pdr_means[rule] += static_cast<double>(pdr_rollout(inst, rule, pr).makespan);
        }
    }
    random_mean /= 100.0;
    double best_pdr = std::numeric_limits<double>::infinity();
    for (auto& [rule, total] : pdr_means) best_pdr = std::min(best_pdr, total / 100.0);

    std::ostringstream detail;
    detail.precision(4);
    detail << "random " << random_mean << ", best PDR " << best_pdr << ";";

    int reinforce_ok = 0;
    int ppo_ok = 0;
    std::map<uint64_t, double> reinforce_val;
    for (uint64_t seed : {1, 2, 3}) {
        DeskRun run = desk_train("reinforce", seed,
                                 "acceptance_desk_reinforce_s" + std::to_string(seed) + ".json");
        reinforce_val[seed] = run.best_validation;
        bool ok_random = run.heldout_mean <= 0.95 * random_mean;
        bool ok_pdr = run.heldout_mean <= 1.05 * best_pdr;
        if (ok_random && ok_pdr) ++reinforce_ok;
        detail << " R" << seed << "=" << run.heldout_mean << (ok_random && ok_pdr ? "*" : "!");
    }
    for (uint64_t seed : {1, 2, 3}) {
        DeskRun run =
            desk_train("ppo", seed, "acceptance_desk_ppo_s" + std::to_string(seed) + ".json");
        if (run.best_validation <= reinforce_val[seed]) ++ppo_ok;
        detail << " P" << seed << "=" << run.best_validation << "/" << reinforce_val[seed];
    }
    detail << " (reinforce " << reinforce_ok << "/3, ppo " << ppo_ok << "/3)";
    if (reinforce_ok < 2) return {false, "reinforce bar missed: " + detail.str()};
    if (ppo_ok < 2) return {false, "ppo bar missed: " + detail.str()};
    return {true, detail.str()};
}

// ---- criterion 9: decoder contract ----------------------------------------------

Outcome criterion_9() {
    Rng rng(7117);
    PolicyConfig cfg = desk_policy(16, 2, 1, false);
    Rng prng(12);
    PolicyParameters params = PolicyParameters::init(cfg, prng);

    int validated = 0;
    for (int trial = 0; trial < 40; ++trial) {
        GeneratorConfig g;
        g.variant = trial % 2 ? GeneratorConfig::Variant::kSd1 : GeneratorConfig::Variant::kSd2;
        g.num_jobs = static_cast<int>(rng.uniform_int(2, 5));
        g.num_machines = static_cast<int>(rng.uniform_int(2, 4));
        g.rng_seed = rng.next_u64();
        Instance inst = generate_sd(g);
        DecodeResult greedy = decode_greedy(inst, params, cfg);
        validate_schedule(inst, greedy.schedule, greedy.makespan);
        DecodeResult sampled = decode_sampling(inst, params, cfg, 10, rng.next_u64());
        validate_schedule(inst, sampled.schedule, sampled.makespan);
        for (Rule rule : {Rule::kFifo, Rule::kSpt, Rule::kMopnr, Rule::kMwkr, Rule::kRandom}) {
            Rng rr(3);
            PdrResult p = pdr_rollout(inst, rule, rr);
            validate_schedule(inst, p.schedule, p.makespan);
        }
        validated += 7;
    }

    // Soft metric (reported, not gated): mean best-of-100 vs mean greedy for
    // the trained desk-scale model, when criterion 8 left a checkpoint behind.
    std::ostringstream detail;
    detail << validated << " schedules validated";
    std::string ckpt = "acceptance_desk_reinforce_s1.json";
    if (std::filesystem::exists(ckpt)) {
        Checkpoint c = load_checkpoint(ckpt);
        double greedy_mean = 0.0;
        double best100_mean = 0.0;
        for (int i = 0; i < 50; ++i) {
            GeneratorConfig g;
            g.variant = GeneratorConfig::Variant::kSd1;
            g.num_jobs = 6;
            g.num_machines = 3;
            g.rng_seed = derive_seed(99221, static_cast<uint64_t>(i));
            Instance inst = generate_instance(g);
            DecodeResult gr = decode_greedy(inst, c.params, c.config);
            validate_schedule(inst, gr.schedule, gr.makespan);
            DecodeResult sm =
                decode_sampling(inst, c.params, c.config, 100, derive_seed(4321, i));
            validate_schedule(inst, sm.schedule, sm.makespan);
            greedy_mean += static_cast<double>(gr.makespan) / 50.0;
            best100_mean += static_cast<double>(sm.makespan) / 50.0;
        }
        detail << "; soft metric: mean best-of-100 " << best100_mean << " vs mean greedy "
               << greedy_mean << (best100_mean <= greedy_mean ? " (holds)" : " (violated)");
    } else {
        detail << "; soft metric skipped (no desk-scale checkpoint; run criterion 8 first)";
    }
    return {true, detail.str()};
}

// ---- criterion 10: parser fidelity ----------------------------------------------

Outcome criterion_10() {
    std::string base = "../../data";
    if (!std::filesystem::exists(base + "/refs")) base = "data";
    struct SetSpec {
        std::string dir;
        std::string refs;
        bool fjs;
    };
    std::vector<SetSpec> sets = {
        {base + "/benchmarks/brandimarte", base + "/refs/brandimarte.csv", true},
        {base + "/benchmarks/hurink_edata", "", true},
        {base + "/benchmarks/hurink_rdata", "", true},
        {base + "/benchmarks/hurink_vdata", "", true},
        {base + "/benchmarks/taillard", base + "/refs/taillard.csv", false},
    };
    int files_checked = 0;
    std::ostringstream detail;
    bool any_missing = false;
    for (const SetSpec& set : sets) {
        if (!std::filesystem::exists(set.dir) || std::filesystem::is_empty(set.dir)) {
            any_missing = true;
            detail << set.dir << " missing; ";
            continue;
        }
        std::map<std::string, int64_t> refs;
        if (!set.refs.empty() && std::filesystem::exists(set.refs)) {
            refs = load_reference_table(set.refs);
        }
        for (const auto& entry : std::filesystem::directory_iterator(set.dir)) {
            if (!entry.is_regular_file()) continue;
            Instance inst = load_instance_file(entry.path().string());
            if (set.fjs) {
                Instance back = parse_fjs(write_fjs(inst), inst.name);
                if (!(back == inst)) {
                    return {false, "fjs round-trip changed " + entry.path().string()};
                }
                if (write_fjs(back) != write_fjs(inst)) {
                    return {false, "fjs re-serialization differs for " + entry.path().string()};
                }
            }
            auto it = refs.find(inst.name);
            if (it != refs.end() && lower_bound_static(inst).global > it->second) {
                return {false, inst.name + ": static lower bound exceeds the published UB"};
            }
            ++files_checked;
        }
    }
    if (any_missing) {
        return {false, detail.str() +
                           "published benchmark sets unavailable in this sandbox (no network); "
                           "fetch them with scripts/fetch_benchmarks.py and rerun"};
    }
    return {true, std::to_string(files_checked) + " benchmark files round-tripped, LB <= UB"};
}

}  // namespace

int main(int argc, char** argv) {
    static const struct {
        const char* name;
        Outcome (*run)();
    } kCriteria[] = {
        {"transition oracle equivalence", criterion_1},
        {"reward telescoping", criterion_2},
        {"state-hash Markov property", criterion_3},
        {"gradient suite", criterion_4},
        {"attention invariants", criterion_5},
        {"kv-cache equivalence", criterion_6},
        {"PDR regression", criterion_7},
        {"desk-scale learning check", criterion_8},
        {"decoder contract", criterion_9},
        {"parser fidelity", criterion_10},
    };

    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
            only = std::atoi(argv[i + 1]);
            ++i;
        } else if (std::strcmp(argv[i], "--all") == 0) {
            only = 0;
        } else {
            std::cerr << "usage: acceptance [--all | --criterion N]\n";
            return 4;
        }
    }

    bool all_pass = true;
    for (int n = 1; n <= 10; ++n) {
        if (only != 0 && n != only) continue;
        Outcome outcome;
        try {
            outcome = kCriteria[n - 1].run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (outcome.pass ? "[PASS]" : "[FAIL]") << " criterion " << n << " ("
                  << kCriteria[n - 1].name << "): " << outcome.detail << "\n";
        all_pass = all_pass && outcome.pass;
    }
    return all_pass ? 0 : 1;
}
