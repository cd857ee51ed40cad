#include "flexsched/oracle.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace flexsched {

int64_t evaluate_action_sequence(const Instance& inst, std::span<const Action> actions) {
    int n = inst.total_operations();
    if (static_cast<int>(actions.size()) != n) {
        throw InvariantError("oracle: sequence length does not match operation count");
    }
    std::vector<int> next_op(inst.num_jobs, 0);
    std::vector<int64_t> job_finish(inst.num_jobs, 0);
    std::vector<int64_t> machine_free(inst.num_machines, 0);
    int64_t makespan = 0;
    for (const Action& a : actions) {
        if (a.op < 0 || a.op >= n) throw InvariantError("oracle: bad op id");
        int job = inst.op_job[a.op];
        if (inst.op_index[a.op] != next_op[job]) {
            throw InvariantError("oracle: precedence violated in sequence");
        }
        int64_t duration = inst.op(a.op).duration_on(a.machine);
        if (duration < 0) throw InvariantError("oracle: ineligible machine in sequence");
        int64_t start = std::max(job_finish[job], machine_free[a.machine]);
        int64_t finish = start + duration;
        job_finish[job] = finish;
        machine_free[a.machine] = finish;
        next_op[job] += 1;
        makespan = std::max(makespan, finish);
    }
    return makespan;
}

namespace {

struct Enumerator {
    const Instance& inst;
    const ScheduleVisitor& visit;
    std::vector<int> next_op;
    std::vector<int64_t> job_finish;
    std::vector<int64_t> machine_free;
    std::vector<Action> actions;
    int remaining;

    Enumerator(const Instance& i, const ScheduleVisitor& v)
        : inst(i),
          visit(v),
          next_op(i.num_jobs, 0),
          job_finish(i.num_jobs, 0),
          machine_free(i.num_machines, 0),
          remaining(i.total_operations()) {}

    void run(int64_t makespan_so_far) {
        if (remaining == 0) {
            visit(actions, makespan_so_far);
            return;
        }
        for (int job = 0; job < inst.num_jobs; ++job) {
            int idx = next_op[job];
            if (idx >= static_cast<int>(inst.jobs[job].operations.size())) continue;
            int flat = inst.flat_id(job, idx);
            for (const auto& alt : inst.jobs[job].operations[idx].alternatives) {
                int64_t start = std::max(job_finish[job], machine_free[alt.machine]);
                int64_t finish = start + alt.duration;

                int64_t saved_job = job_finish[job];
                int64_t saved_mach = machine_free[alt.machine];
                job_finish[job] = finish;
                machine_free[alt.machine] = finish;
                next_op[job] = idx + 1;
                actions.push_back({flat, alt.machine});
                --remaining;

                run(std::max(makespan_so_far, finish));

                ++remaining;
                actions.pop_back();
                next_op[job] = idx;
                job_finish[job] = saved_job;
                machine_free[alt.machine] = saved_mach;
            }
        }
    }
};

}  // namespace

void enumerate_schedules(const Instance& inst, const ScheduleVisitor& visit, int max_ops) {
    if (inst.total_operations() > max_ops) {
        throw ConfigError("brute force: instance has " + std::to_string(inst.total_operations()) +
                          " operations, limit is " + std::to_string(max_ops));
    }
    Enumerator e(inst, visit);
    e.run(0);
}

int64_t brute_force_optimal(const Instance& inst, int max_ops) {
    int64_t best = std::numeric_limits<int64_t>::max();
    enumerate_schedules(
        inst, [&](std::span<const Action>, int64_t makespan) { best = std::min(best, makespan); },
        max_ops);
    return best;
}

}  // namespace flexsched
