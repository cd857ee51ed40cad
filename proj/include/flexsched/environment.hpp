#pragma once

#include <cstdint>
#include <vector>

#include "flexsched/instance.hpp"

namespace flexsched {

// One scheduling decision: assign operation `op` (flat id) to `machine`.
struct Action {
    int op = -1;
    int machine = -1;

    friend bool operator==(const Action&, const Action&) = default;
};

enum class RewardMode { kLowerBound, kDeltaMakespan, kEstimatedMean };

RewardMode reward_mode_from_string(const std::string& s);
std::string to_string(RewardMode mode);

struct ScheduledOp {
    bool done = false;
    int machine = -1;
    int64_t start = 0;
    int64_t finish = 0;
};

// Network-facing snapshot of a state: the four scalar feature kinds
// (operation/machine relative available time, minimum duration, duration on
// edges) plus the graph masks. All time-like values are divided by
// `time_scale`. Scheduled operations are zeroed and masked out everywhere.
struct StateFeatures {
    int num_ops = 0;
    int num_machines = 0;
    double time_scale = 1.0;
    uintptr_t instance_tag = 0;  // identity of the originating instance

    std::vector<double> op_feat;     // num_ops x 2: (relative avail, min duration)
    std::vector<double> mach_feat;   // num_machines: relative avail
    std::vector<int> positions;      // intra-job index per op (RoPE positions)
    std::vector<uint8_t> scheduled;  // per op

    // Row-major masks; 1 = attendable.
    std::vector<uint8_t> o2o_mask;  // num_ops x num_ops: self + unscheduled same-job successors
    std::vector<uint8_t> o2m_mask;  // num_machines x num_ops: eligibility of unscheduled ops
    std::vector<double> edge_scaled;  // num_machines x num_ops: duration / time_scale

    std::vector<Action> feasible;  // canonical order: job asc, machine asc

    uint8_t o2o(int a, int b) const { return o2o_mask[static_cast<size_t>(a) * num_ops + b]; }
    uint8_t o2m(int mach, int op) const { return o2m_mask[static_cast<size_t>(mach) * num_ops + op]; }
    double edge(int mach, int op) const { return edge_scaled[static_cast<size_t>(mach) * num_ops + op]; }

    // Dense view of `feasible` (num_machines x num_ops, 1 = selectable now).
    std::vector<uint8_t> feasible_action_mask() const {
        std::vector<uint8_t> mask(static_cast<size_t>(num_machines) * num_ops, 0);
        for (const Action& a : feasible) {
            mask[static_cast<size_t>(a.machine) * num_ops + a.op] = 1;
        }
        return mask;
    }
};

// CSV-facing row of a (possibly partial) schedule.
struct ScheduleRow {
    int op = 0;
    int job = 0;
    int idx = 0;
    int machine = 0;
    int64_t start = 0;
    int64_t finish = 0;
};

// The minimal Markov state. All times are exact integers; the transition is
// a pure function of (state, action). A state is owned by one rollout at a
// time; the referenced instance must outlive it.
class SchedulingState {
public:
    explicit SchedulingState(const Instance& inst);

    const Instance& instance() const { return *inst_; }
    int step_count() const { return t_; }
    bool terminal() const { return t_ == inst_->total_operations(); }

    // All (op, machine) pairs whose operation is unscheduled with its job
    // predecessor scheduled. Empty exactly at terminal states.
    std::vector<Action> feasible_actions() const;
    bool is_feasible(const Action& a) const;

    // Applies the action in place and returns the reward under `mode`.
    // Throws InvariantError for infeasible actions.
    double apply(const Action& a, RewardMode mode = RewardMode::kLowerBound);

    // Max finish time over all operations; terminal states only.
    int64_t makespan() const;

    // Current value of the estimator the reward mode differences.
    double metric(RewardMode mode) const;
    int64_t lower_bound() const;  // metric(kLowerBound) as an exact integer

    // Digest of the remaining subproblem: machine available times, per-job
    // frontier (next index + finish of the last scheduled operation), and the
    // remaining operations with their eligible machines and durations. Equal
    // digests imply identical remaining subproblems.
    uint64_t canonical_hash() const;

    // Feature snapshot; time_scale <= 0 selects the instance's max duration.
    StateFeatures extract_features(double time_scale = 0.0) const;

    std::vector<ScheduleRow> extract_schedule() const;

    // State data (public for tests and tooling; treat as read-only).
    std::vector<ScheduledOp> sched;    // per flat op
    std::vector<int64_t> op_avail;     // unscheduled: earliest start (LB-propagated); scheduled: actual start
    std::vector<int64_t> mach_avail;   // per machine
    std::vector<int64_t> lb_finish;    // per op: actual finish if scheduled, LB finish otherwise

private:
    void refresh_bounds();

    const Instance* inst_;
    int t_ = 0;
};

inline SchedulingState reset(const Instance& inst) { return SchedulingState(inst); }

}  // namespace flexsched
