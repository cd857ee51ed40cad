#include "flexsched/rules.hpp"

#include <algorithm>
#include <tuple>

namespace flexsched {

Rule rule_from_string(const std::string& s) {
    if (s == "fifo") return Rule::kFifo;
    if (s == "spt") return Rule::kSpt;
    if (s == "mopnr") return Rule::kMopnr;
    if (s == "mwkr") return Rule::kMwkr;
    if (s == "random") return Rule::kRandom;
    throw ConfigError("unknown dispatching rule: " + s);
}

std::string to_string(Rule rule) {
    switch (rule) {
        case Rule::kFifo: return "fifo";
        case Rule::kSpt: return "spt";
        case Rule::kMopnr: return "mopnr";
        case Rule::kMwkr: return "mwkr";
        case Rule::kRandom: return "random";
    }
    throw ConfigError("invalid rule enum");
}

namespace {

int remaining_ops(const SchedulingState& state, int job) {
    const Instance& inst = state.instance();
    int count = 0;
    for (size_t j = 0; j < inst.jobs[job].operations.size(); ++j) {
        if (!state.sched[inst.flat_id(job, static_cast<int>(j))].done) ++count;
    }
    return count;
}

double remaining_work(const SchedulingState& state, int job) {
    const Instance& inst = state.instance();
    double total = 0.0;
    for (size_t j = 0; j < inst.jobs[job].operations.size(); ++j) {
        if (!state.sched[inst.flat_id(job, static_cast<int>(j))].done) {
            total += inst.jobs[job].operations[static_cast<int>(j)].mean_duration();
        }
    }
    return total;
}

}  // namespace

Action pdr_select(const SchedulingState& state, Rule rule, Rng& rng) {
    std::vector<Action> feasible = state.feasible_actions();
    if (feasible.empty()) throw InvariantError("pdr_select: terminal state");
    const Instance& inst = state.instance();

    if (rule == Rule::kRandom) {
        return feasible[static_cast<size_t>(
            rng.uniform_int(0, static_cast<int64_t>(feasible.size()) - 1))];
    }

    // Lexicographic key per candidate pair; smaller wins.
    using Key = std::tuple<double, int64_t, int64_t, int64_t>;
    Action best_action = feasible.front();
    Key best_key{0, 0, 0, 0};
    bool have_best = false;
    for (const Action& a : feasible) {
        int job = inst.op_job[a.op];
        Key key;
        switch (rule) {
            case Rule::kFifo:
                key = {static_cast<double>(state.op_avail[a.op]), job,
                       state.mach_avail[a.machine], a.machine};
                break;
            case Rule::kSpt:
                key = {static_cast<double>(inst.op(a.op).duration_on(a.machine)), job,
                       inst.op_index[a.op], a.machine};
                break;
            case Rule::kMopnr:
                key = {static_cast<double>(-remaining_ops(state, job)),
                       state.mach_avail[a.machine], job, a.machine};
                break;
            case Rule::kMwkr:
                key = {-remaining_work(state, job), state.mach_avail[a.machine], job, a.machine};
                break;
            case Rule::kRandom: break;  // handled above
        }
        if (!have_best || key < best_key) {
            best_key = key;
            best_action = a;
            have_best = true;
        }
    }
    return best_action;
}

PdrResult pdr_rollout(const Instance& inst, Rule rule, Rng& rng) {
    SchedulingState state(inst);
    PdrResult result;
    while (!state.terminal()) {
        Action a = pdr_select(state, rule, rng);
        state.apply(a);
        result.actions.push_back(a);
    }
    result.makespan = state.makespan();
    result.schedule = state.extract_schedule();
    return result;
}

}  // namespace flexsched
