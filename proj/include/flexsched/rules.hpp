#pragma once

#include "flexsched/environment.hpp"
#include "flexsched/rng.hpp"

namespace flexsched {

enum class Rule { kFifo, kSpt, kMopnr, kMwkr, kRandom };

Rule rule_from_string(const std::string& s);
std::string to_string(Rule rule);

// One dispatching decision. FIFO picks the ready operation with the smallest
// available time; SPT the feasible pair with the shortest duration; MOPNR the
// job with the most remaining operations; MWKR the job with the largest
// remaining work (sum of mean durations over eligible machines, ready
// operation included). MOPNR/MWKR break ties by the earliest machine
// available time; residual ties fall back to job then machine index, so every
// rule is deterministic. kRandom samples uniformly from the feasible set.
Action pdr_select(const SchedulingState& state, Rule rule, Rng& rng);

struct PdrResult {
    int64_t makespan = 0;
    std::vector<ScheduleRow> schedule;
    std::vector<Action> actions;
};

PdrResult pdr_rollout(const Instance& inst, Rule rule, Rng& rng);

}  // namespace flexsched
