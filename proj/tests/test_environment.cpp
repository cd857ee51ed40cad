#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <functional>
#include <limits>
#include <map>

#include "flexsched/environment.hpp"
#include "flexsched/oracle.hpp"
#include "flexsched/rules.hpp"
#include "test_util.hpp"

using namespace flexsched;

namespace {

// Full random rollout; returns the reward sum under `mode`.
double random_rollout(SchedulingState& state, Rng& rng, RewardMode mode) {
    double total = 0.0;
    while (!state.terminal()) {
        auto actions = state.feasible_actions();
        Action a = actions[static_cast<size_t>(
            rng.uniform_int(0, static_cast<int64_t>(actions.size()) - 1))];
        total += state.apply(a, mode);
    }
    return total;
}

// Constraint check that does not rely on any SchedulingState bookkeeping.
void check_schedule_constraints(const Instance& inst, const std::vector<ScheduleRow>& rows) {
    std::map<int, std::vector<std::pair<int64_t, int64_t>>> by_machine;
    std::map<std::pair<int, int>, const ScheduleRow*> by_op;
    for (const auto& r : rows) {
        by_machine[r.machine].push_back({r.start, r.finish});
        by_op[{r.job, r.idx}] = &r;
        int64_t d = inst.jobs[r.job].operations[r.idx].duration_on(r.machine);
        REQUIRE(d >= 1);
        CHECK(r.finish == r.start + d);
    }
    for (auto& [m, intervals] : by_machine) {
        std::sort(intervals.begin(), intervals.end());
        for (size_t i = 1; i < intervals.size(); ++i) {
            CHECK(intervals[i].first >= intervals[i - 1].second);
        }
    }
    for (const auto& [key, row] : by_op) {
        if (key.second > 0) {
            auto it = by_op.find({key.first, key.second - 1});
            REQUIRE(it != by_op.end());
            CHECK(row->start >= it->second->finish);
        }
    }
}

}  // namespace

TEST_CASE("reset exposes first ops of each job on their eligible machines") {
    Instance inst = testutil::make_instance(
        2, {{{{0, 3}, {1, 5}}, {{0, 4}}}, {{{1, 6}}}});
    SchedulingState s(inst);
    auto actions = s.feasible_actions();
    REQUIRE(actions.size() == 3);
    CHECK(actions[0] == Action{0, 0});
    CHECK(actions[1] == Action{0, 1});
    CHECK(actions[2] == Action{2, 1});
    for (int64_t v : s.mach_avail) CHECK(v == 0);
    CHECK(s.lower_bound() == lower_bound_static(inst).global);
}

TEST_CASE("finish time follows max(pred, machine) + duration") {
    // job0: op0 on M0 (d=5) then op1 on M1 (d=4); job1: op0 on M1 (d=3).
    Instance inst = testutil::make_instance(2, {{{{0, 5}}, {{1, 4}}}, {{{1, 3}}}});
    SchedulingState s(inst);
    s.apply({0, 0});
    s.apply({2, 1});
    CHECK(s.mach_avail[1] == 3);
    s.apply({1, 1});  // pred_finish=5, mach_avail=3 -> FT = 5 + 4 = 9
    CHECK(s.sched[1].start == 5);
    CHECK(s.sched[1].finish == 9);
    CHECK(s.makespan() == 9);
}

TEST_CASE("single-machine chain accumulates finish times") {
    Instance inst = testutil::make_instance(1, {{{{0, 3}}, {{0, 4}}}});
    SchedulingState s(inst);
    s.apply({0, 0});
    CHECK(s.sched[0].finish == 3);
    s.apply({1, 0});
    CHECK(s.sched[1].finish == 7);
    CHECK(s.makespan() == 7);
    CHECK(s.lower_bound() == 7);  // terminal lb equals makespan
}

TEST_CASE("lower-bound reward telescopes on the shared-machine pair") {
    Instance inst = testutil::make_instance(1, {{{{0, 5}}}, {{{0, 5}}}});
    SchedulingState s(inst);
    CHECK(s.lower_bound() == 5);
    double r1 = s.apply({0, 0}, RewardMode::kLowerBound);
    CHECK(r1 == doctest::Approx(0.0));
    double r2 = s.apply({1, 0}, RewardMode::kLowerBound);
    CHECK(s.sched[1].finish == 10);
    CHECK(r2 == doctest::Approx(-5.0));
}

TEST_CASE("feasible action sets shrink as jobs are scheduled") {
    Instance inst = testutil::make_instance(2, {{{{0, 2}, {1, 2}}}, {{{0, 1}, {1, 7}}}});
    SchedulingState s(inst);
    CHECK(s.feasible_actions().size() == 4);
    s.apply({0, 0});
    CHECK(s.feasible_actions().size() == 2);
    s.apply({1, 1});
    CHECK(s.feasible_actions().empty());
    CHECK(s.terminal());
}

TEST_CASE("ops with unscheduled predecessors never appear feasible") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        Instance inst = testutil::random_tiny_instance(rng, 8);
        SchedulingState s(inst);
        while (!s.terminal()) {
            for (const Action& a : s.feasible_actions()) {
                int idx = inst.op_index[a.op];
                CHECK_FALSE(s.sched[a.op].done);
                if (idx > 0) CHECK(s.sched[a.op - 1].done);
            }
            auto actions = s.feasible_actions();
            s.apply(actions[static_cast<size_t>(
                rng.uniform_int(0, static_cast<int64_t>(actions.size()) - 1))]);
        }
    }
}

TEST_CASE("infeasible actions and early makespan queries are rejected") {
    Instance inst = testutil::make_instance(2, {{{{0, 3}}, {{1, 4}}}});
    SchedulingState s(inst);
    CHECK_THROWS_AS(s.apply({1, 1}), InvariantError);   // predecessor unscheduled
    CHECK_THROWS_AS(s.apply({0, 1}), InvariantError);   // ineligible machine
    CHECK_THROWS_AS(s.makespan(), InvariantError);      // non-terminal
}

TEST_CASE("feasibility matches a naive constraint checker") {
    Rng rng(17);
    for (int trial = 0; trial < 40; ++trial) {
        Instance inst = testutil::random_tiny_instance(rng, 8);
        SchedulingState s(inst);
        while (!s.terminal()) {
            auto feasible = s.feasible_actions();
            // Naive: every (op, machine) combination checked from scratch.
            std::vector<Action> naive;
            for (int op = 0; op < inst.total_operations(); ++op) {
                if (s.sched[op].done) continue;
                int idx = inst.op_index[op];
                if (idx > 0 && !s.sched[op - 1].done) continue;
                for (const auto& alt : inst.op(op).alternatives) {
                    naive.push_back({op, alt.machine});
                }
            }
            CHECK(feasible == naive);
            for (const Action& a : feasible) CHECK(s.is_feasible(a));
            s.apply(feasible[static_cast<size_t>(
                rng.uniform_int(0, static_cast<int64_t>(feasible.size()) - 1))]);
        }
    }
}

TEST_CASE("reward telescoping holds for all three modes") {
    Rng rng(31);
    for (int trial = 0; trial < 60; ++trial) {
        Instance inst = testutil::random_tiny_instance(rng, 9);
        for (RewardMode mode : {RewardMode::kLowerBound, RewardMode::kDeltaMakespan,
                                RewardMode::kEstimatedMean}) {
            SchedulingState s(inst);
            double initial = s.metric(mode);
            Rng rollout_rng(rng.next_u64());
            double total = random_rollout(s, rollout_rng, mode);
            // Terminal estimate equals the makespan in every mode.
            CHECK(total == doctest::Approx(initial - static_cast<double>(s.makespan())));
        }
    }
}

TEST_CASE("lower bound is monotone and transitions replay exactly") {
    Rng rng(77);
    for (int trial = 0; trial < 40; ++trial) {
        Instance inst = testutil::random_tiny_instance(rng, 9);
        SchedulingState s(inst);
        std::vector<Action> actions;
        int64_t last_lb = s.lower_bound();
        Rng rollout_rng(rng.next_u64());
        while (!s.terminal()) {
            auto feasible = s.feasible_actions();
            Action a = feasible[static_cast<size_t>(
                rollout_rng.uniform_int(0, static_cast<int64_t>(feasible.size()) - 1))];
            s.apply(a);
            actions.push_back(a);
            CHECK(s.lower_bound() >= last_lb);
            last_lb = s.lower_bound();
        }
        CHECK(last_lb == s.makespan());
        check_schedule_constraints(inst, s.extract_schedule());

        // Replay reproduces every time exactly.
        SchedulingState replayed(inst);
        for (const Action& a : actions) replayed.apply(a);
        CHECK(replayed.extract_schedule().size() == s.extract_schedule().size());
        auto lhs = s.extract_schedule();
        auto rhs = replayed.extract_schedule();
        for (size_t i = 0; i < lhs.size(); ++i) {
            CHECK(lhs[i].start == rhs[i].start);
            CHECK(lhs[i].finish == rhs[i].finish);
            CHECK(lhs[i].machine == rhs[i].machine);
        }
        // Independent evaluation of the same sequence agrees.
        CHECK(evaluate_action_sequence(inst, actions) == s.makespan());
    }
}

TEST_CASE("features are relative with an exact zero minimum") {
    Instance inst = testutil::make_instance(2, {{{{0, 3}, {1, 5}}, {{0, 4}}}, {{{1, 6}}}});
    SchedulingState s(inst);
    StateFeatures f0 = s.extract_features();
    for (int a = 0; a < f0.num_ops; ++a) {
        if (inst.op_index[a] == 0) CHECK(f0.op_feat[a * 2] == 0.0);
    }
    for (double v : f0.mach_feat) CHECK(v == 0.0);

    Rng rng(3);
    for (int step = 0; !s.terminal(); ++step) {
        StateFeatures f = s.extract_features();
        double min_rel = std::numeric_limits<double>::infinity();
        for (int a = 0; a < f.num_ops; ++a) {
            if (!f.scheduled[a]) min_rel = std::min(min_rel, f.op_feat[a * 2]);
        }
        for (double v : f.mach_feat) min_rel = std::min(min_rel, v);
        CHECK(min_rel == 0.0);
        auto actions = s.feasible_actions();
        s.apply(actions[static_cast<size_t>(
            rng.uniform_int(0, static_cast<int64_t>(actions.size()) - 1))]);
    }
}

TEST_CASE("shifting every absolute time leaves features unchanged") {
    Instance inst = testutil::make_instance(2, {{{{0, 3}, {1, 5}}, {{0, 4}}}, {{{1, 6}}}});
    SchedulingState s(inst);
    s.apply({0, 1});
    StateFeatures base = s.extract_features();

    SchedulingState shifted = s;
    for (auto& v : shifted.op_avail) v += 1000;
    for (auto& v : shifted.mach_avail) v += 1000;
    StateFeatures f = shifted.extract_features();
    CHECK(f.op_feat == base.op_feat);
    CHECK(f.mach_feat == base.mach_feat);
    CHECK(f.edge_scaled == base.edge_scaled);
}

TEST_CASE("features carry exactly the four scalar kinds and live topology") {
    Instance inst = testutil::make_instance(2, {{{{0, 3}, {1, 5}}, {{0, 4}}}, {{{1, 6}}}});
    SchedulingState s(inst);
    StateFeatures f = s.extract_features();
    int n = inst.total_operations();
    CHECK(static_cast<int>(f.op_feat.size()) == 2 * n);           // avail + min duration
    CHECK(static_cast<int>(f.mach_feat.size()) == inst.num_machines);  // avail
    CHECK(static_cast<int>(f.edge_scaled.size()) == inst.num_machines * n);  // duration
    // Min duration is the static minimum (eligibility never shrinks while
    // an op is unscheduled).
    for (int a = 0; a < n; ++a) {
        if (!f.scheduled[a]) {
            CHECK(f.op_feat[a * 2 + 1] ==
                  doctest::Approx(static_cast<double>(inst.op(a).min_duration()) / f.time_scale));
        }
    }
    // Hop mask: op 0 attends itself and its successor op 1, nothing else.
    CHECK(f.o2o(0, 0) == 1);
    CHECK(f.o2o(0, 1) == 1);
    CHECK(f.o2o(0, 2) == 0);
    CHECK(f.o2o(1, 0) == 0);
    CHECK(f.o2o(2, 2) == 1);

    s.apply({0, 0});
    StateFeatures g = s.extract_features();
    // Scheduled ops carry no topology entries.
    for (int b = 0; b < n; ++b) CHECK(g.o2o(0, b) == 0);
    for (int m = 0; m < inst.num_machines; ++m) CHECK(g.o2m(m, 0) == 0);
    CHECK(g.o2o(1, 1) == 1);
    CHECK(g.scheduled[0] == 1);
    CHECK_THROWS_AS([&] {
        SchedulingState t(inst);
        t.apply({0, 0});
        t.apply({1, 0});
        t.apply({2, 1});
        return t.extract_features();
    }(), InvariantError);
}

TEST_CASE("canonical hash matches the remaining subproblem") {
    // Two independent jobs scheduled in opposite order reach the same state.
    Instance inst = testutil::make_instance(2, {{{{0, 3}}}, {{{1, 6}}}});
    SchedulingState a(inst);
    a.apply({0, 0});
    a.apply({1, 1});
    SchedulingState b(inst);
    b.apply({1, 1});
    b.apply({0, 0});
    CHECK(a.canonical_hash() == b.canonical_hash());
    CHECK(a.canonical_hash() == a.canonical_hash());

    // Differing machine availability must differ.
    Instance two = testutil::make_instance(2, {{{{0, 3}, {1, 4}}}});
    SchedulingState c(two);
    SchedulingState d(two);
    c.apply({0, 0});
    d.apply({0, 1});
    CHECK(c.canonical_hash() != d.canonical_hash());
}

TEST_CASE("equal hashes imply equal greedy completions (Markov property)") {
    Rng rng(404);
    int pairs_checked = 0;
    for (int trial = 0; trial < 80 && pairs_checked < 60; ++trial) {
        Instance inst = testutil::random_tiny_instance(rng, 6);
        // Group reachable states at each depth by hash via exhaustive search.
        std::map<uint64_t, std::vector<std::vector<Action>>> groups;
        std::vector<Action> prefix;
        std::function<void(SchedulingState&, int)> explore = [&](SchedulingState& s, int depth) {
            if (depth > 0) groups[s.canonical_hash()].push_back(prefix);
            if (s.terminal() || depth >= 3) return;
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

        Rng dummy(0);
        for (auto& [hash, prefixes] : groups) {
            if (prefixes.size() < 2) continue;
            // Complete each trajectory with the same deterministic policy.
            std::vector<int64_t> makespans;
            std::vector<std::vector<Action>> completions;
            for (size_t i = 0; i < std::min<size_t>(prefixes.size(), 3); ++i) {
                SchedulingState s(inst);
                for (const Action& a : prefixes[i]) s.apply(a);
                std::vector<Action> completion;
                while (!s.terminal()) {
                    Action a = pdr_select(s, Rule::kSpt, dummy);
                    completion.push_back(a);
                    s.apply(a);
                }
                makespans.push_back(s.makespan());
                completions.push_back(completion);
            }
            for (size_t i = 1; i < makespans.size(); ++i) {
                CHECK(makespans[i] == makespans[0]);
                CHECK(completions[i] == completions[0]);
            }
            ++pairs_checked;
        }
    }
    CHECK(pairs_checked >= 20);
}

TEST_CASE("brute force handles the reference toys") {
    CHECK(brute_force_optimal(testutil::make_instance(1, {{{{0, 3}}, {{0, 4}}}})) == 7);
    CHECK(brute_force_optimal(testutil::make_instance(1, {{{{0, 5}}}, {{{0, 5}}}})) == 10);
    Instance big = testutil::make_instance(1, {{{{0, 1}}, {{0, 1}}, {{0, 1}}, {{0, 1}},
                                                {{0, 1}}, {{0, 1}}, {{0, 1}}, {{0, 1}},
                                                {{0, 1}}, {{0, 1}}}});
    CHECK_THROWS_AS(brute_force_optimal(big), ConfigError);
}

TEST_CASE("every enumerated sequence agrees between env and oracle") {
    Rng rng(55);
    for (int trial = 0; trial < 25; ++trial) {
        Instance inst = testutil::random_tiny_instance(rng, 6);
        enumerate_schedules(inst, [&](std::span<const Action> actions, int64_t oracle_makespan) {
            SchedulingState s(inst);
            for (const Action& a : actions) s.apply(a);
            CHECK(s.makespan() == oracle_makespan);
        });
    }
}

TEST_CASE("oracle optimum never exceeds any dispatching rule") {
    Rng rng(66);
    for (int trial = 0; trial < 30; ++trial) {
        Instance inst = testutil::random_tiny_instance(rng, 8);
        int64_t optimal = brute_force_optimal(inst);
        for (Rule rule : {Rule::kFifo, Rule::kSpt, Rule::kMopnr, Rule::kMwkr}) {
            Rng rule_rng(1);
            CHECK(optimal <= pdr_rollout(inst, rule, rule_rng).makespan);
        }
    }
}
