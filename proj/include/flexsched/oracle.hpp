#pragma once

#include <functional>
#include <span>

#include "flexsched/environment.hpp"

namespace flexsched {

// Makespan of one complete action sequence, computed from scratch with its
// own start/finish recursion. Deliberately independent of SchedulingState so
// the two can be cross-checked. Throws InvariantError on infeasible or
// incomplete sequences.
int64_t evaluate_action_sequence(const Instance& inst, std::span<const Action> actions);

// Visits every feasible complete schedule (all operation interleavings x all
// machine assignments) with its makespan. Guarded to tiny instances; the
// callback receives the action sequence in construction order.
using ScheduleVisitor = std::function<void(std::span<const Action>, int64_t makespan)>;
void enumerate_schedules(const Instance& inst, const ScheduleVisitor& visit, int max_ops = 9);

// Exhaustive optimal makespan for instances with at most `max_ops` total
// operations. Throws ConfigError when the instance is too large.
int64_t brute_force_optimal(const Instance& inst, int max_ops = 9);

}  // namespace flexsched
