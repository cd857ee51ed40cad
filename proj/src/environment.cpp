#include "flexsched/environment.hpp"

#include <algorithm>
#include <cstring>
#include <limits>

namespace flexsched {

RewardMode reward_mode_from_string(const std::string& s) {
    if (s == "lower_bound") return RewardMode::kLowerBound;
    if (s == "delta_makespan") return RewardMode::kDeltaMakespan;
    if (s == "estimated_mean") return RewardMode::kEstimatedMean;
    throw ConfigError("unknown reward mode: " + s);
}

std::string to_string(RewardMode mode) {
    switch (mode) {
        case RewardMode::kLowerBound: return "lower_bound";
        case RewardMode::kDeltaMakespan: return "delta_makespan";
        case RewardMode::kEstimatedMean: return "estimated_mean";
    }
    throw ConfigError("invalid reward mode enum");
}

SchedulingState::SchedulingState(const Instance& inst) : inst_(&inst) {
    int n = inst.total_operations();
    sched.assign(n, ScheduledOp{});
    op_avail.assign(n, 0);
    mach_avail.assign(inst.num_machines, 0);
    lb_finish.assign(n, 0);
    refresh_bounds();
}

void SchedulingState::refresh_bounds() {
    for (int i = 0; i < inst_->num_jobs; ++i) {
        const Job& job = inst_->jobs[i];
        for (size_t j = 0; j < job.operations.size(); ++j) {
            int flat = inst_->flat_id(i, static_cast<int>(j));
            if (sched[flat].done) {
                op_avail[flat] = sched[flat].start;
                lb_finish[flat] = sched[flat].finish;
                continue;
            }
            int64_t avail = 0;
            if (j > 0) {
                int prev = flat - 1;
                avail = sched[prev].done ? sched[prev].finish : lb_finish[prev];
            }
            op_avail[flat] = avail;
            lb_finish[flat] = avail + job.operations[j].min_duration();
        }
    }
}

std::vector<Action> SchedulingState::feasible_actions() const {
    std::vector<Action> actions;
    for (int i = 0; i < inst_->num_jobs; ++i) {
        const Job& job = inst_->jobs[i];
        for (size_t j = 0; j < job.operations.size(); ++j) {
            int flat = inst_->flat_id(i, static_cast<int>(j));
            if (sched[flat].done) continue;
            for (const auto& alt : job.operations[j].alternatives) {
                actions.push_back({flat, alt.machine});
            }
            break;  // only the frontier operation of each job is ready
        }
    }
    return actions;
}

bool SchedulingState::is_feasible(const Action& a) const {
    if (a.op < 0 || a.op >= inst_->total_operations()) return false;
    if (sched[a.op].done) return false;
    int idx = inst_->op_index[a.op];
    if (idx > 0 && !sched[a.op - 1].done) return false;
    return inst_->op(a.op).duration_on(a.machine) >= 0;
}

double SchedulingState::apply(const Action& a, RewardMode mode) {
    if (!is_feasible(a)) {
        throw InvariantError("step: infeasible action (op " + std::to_string(a.op) +
                             ", machine " + std::to_string(a.machine) + ")");
    }
    double before = metric(mode);

    int idx = inst_->op_index[a.op];
    int64_t pred_finish = idx > 0 ? sched[a.op - 1].finish : 0;
    int64_t duration = inst_->op(a.op).duration_on(a.machine);
    int64_t start = std::max(pred_finish, mach_avail[a.machine]);

    sched[a.op] = {true, a.machine, start, start + duration};
    mach_avail[a.machine] = start + duration;
    ++t_;
    refresh_bounds();

    return -(metric(mode) - before);
}

int64_t SchedulingState::makespan() const {
    if (!terminal()) throw InvariantError("makespan: state is not terminal");
    int64_t best = 0;
    for (const auto& s : sched) best = std::max(best, s.finish);
    return best;
}

int64_t SchedulingState::lower_bound() const {
    int64_t best = 0;
    for (int64_t v : lb_finish) best = std::max(best, v);
    return best;
}

double SchedulingState::metric(RewardMode mode) const {
    switch (mode) {
        case RewardMode::kLowerBound:
            return static_cast<double>(lower_bound());
        case RewardMode::kDeltaMakespan: {
            int64_t best = 0;
            for (const auto& s : sched) {
                if (s.done) best = std::max(best, s.finish);
            }
            return static_cast<double>(best);
        }
        case RewardMode::kEstimatedMean: {
            // Same recursion as the lower bound with the mean duration over
            // eligible machines in place of the minimum.
            double best = 0.0;
            for (int i = 0; i < inst_->num_jobs; ++i) {
                const Job& job = inst_->jobs[i];
                double prev = 0.0;
                for (size_t j = 0; j < job.operations.size(); ++j) {
                    int flat = inst_->flat_id(i, static_cast<int>(j));
                    if (sched[flat].done) {
                        prev = static_cast<double>(sched[flat].finish);
                    } else {
                        prev += job.operations[j].mean_duration();
                    }
                    best = std::max(best, prev);
                }
            }
            return best;
        }
    }
    throw ConfigError("invalid reward mode enum");
}

namespace {

class Fnv1a {
public:
    void feed(uint64_t v) {
        for (int k = 0; k < 8; ++k) {
            hash_ ^= (v >> (8 * k)) & 0xffu;
            hash_ *= 0x100000001b3ULL;
        }
    }
    uint64_t digest() const { return hash_; }

private:
    uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace

uint64_t SchedulingState::canonical_hash() const {
    Fnv1a h;
    h.feed(0x46534831u);  // tag
    h.feed(static_cast<uint64_t>(inst_->num_machines));
    for (int64_t v : mach_avail) h.feed(static_cast<uint64_t>(v));
    for (int i = 0; i < inst_->num_jobs; ++i) {
        const Job& job = inst_->jobs[i];
        size_t frontier = 0;
        int64_t last_finish = 0;
        while (frontier < job.operations.size() &&
               sched[inst_->flat_id(i, static_cast<int>(frontier))].done) {
            last_finish = sched[inst_->flat_id(i, static_cast<int>(frontier))].finish;
            ++frontier;
        }
        h.feed(static_cast<uint64_t>(frontier));
        h.feed(static_cast<uint64_t>(last_finish));
        // Remaining O2M connections with durations; the chain itself is the
        // remaining O2O structure.
        for (size_t j = frontier; j < job.operations.size(); ++j) {
            const auto& alts = job.operations[j].alternatives;
            h.feed(static_cast<uint64_t>(alts.size()));
            for (const auto& alt : alts) {
                h.feed(static_cast<uint64_t>(alt.machine));
                h.feed(static_cast<uint64_t>(alt.duration));
            }
        }
    }
    return h.digest();
}

StateFeatures SchedulingState::extract_features(double time_scale) const {
    if (terminal()) throw InvariantError("extract_features: state is terminal");
    const Instance& inst = *inst_;
    int n = inst.total_operations();
    int m = inst.num_machines;

    StateFeatures f;
    f.num_ops = n;
    f.num_machines = m;
    f.time_scale = time_scale > 0.0 ? time_scale : static_cast<double>(inst.max_duration());
    f.instance_tag = reinterpret_cast<uintptr_t>(inst_);
    f.op_feat.assign(static_cast<size_t>(n) * 2, 0.0);
    f.mach_feat.assign(m, 0.0);
    f.positions.assign(inst.op_index.begin(), inst.op_index.end());
    f.scheduled.assign(n, 0);
    f.o2o_mask.assign(static_cast<size_t>(n) * n, 0);
    f.o2m_mask.assign(static_cast<size_t>(m) * n, 0);
    f.edge_scaled.assign(static_cast<size_t>(m) * n, 0.0);

    int64_t global_min = std::numeric_limits<int64_t>::max();
    for (int64_t v : mach_avail) global_min = std::min(global_min, v);
    for (int a = 0; a < n; ++a) {
        if (!sched[a].done) global_min = std::min(global_min, op_avail[a]);
    }

    for (int a = 0; a < n; ++a) {
        if (sched[a].done) {
            f.scheduled[a] = 1;
            continue;
        }
        f.op_feat[static_cast<size_t>(a) * 2] =
            static_cast<double>(op_avail[a] - global_min) / f.time_scale;
        f.op_feat[static_cast<size_t>(a) * 2 + 1] =
            static_cast<double>(inst.op(a).min_duration()) / f.time_scale;
        // Self plus unscheduled successors within the job (hop edges).
        f.o2o_mask[static_cast<size_t>(a) * n + a] = 1;
        int job = inst.op_job[a];
        int job_end = inst.op_offset[job] + static_cast<int>(inst.jobs[job].operations.size());
        for (int b = a + 1; b < job_end; ++b) {
            if (!sched[b].done) f.o2o_mask[static_cast<size_t>(a) * n + b] = 1;
        }
        for (const auto& alt : inst.op(a).alternatives) {
            f.o2m_mask[static_cast<size_t>(alt.machine) * n + a] = 1;
            f.edge_scaled[static_cast<size_t>(alt.machine) * n + a] =
                static_cast<double>(alt.duration) / f.time_scale;
        }
    }
    for (int k = 0; k < m; ++k) {
        f.mach_feat[k] = static_cast<double>(mach_avail[k] - global_min) / f.time_scale;
    }
    f.feasible = feasible_actions();
    return f;
}

std::vector<ScheduleRow> SchedulingState::extract_schedule() const {
    std::vector<ScheduleRow> rows;
    for (int a = 0; a < inst_->total_operations(); ++a) {
        if (!sched[a].done) continue;
        rows.push_back({a, inst_->op_job[a], inst_->op_index[a], sched[a].machine,
                        sched[a].start, sched[a].finish});
    }
    return rows;
}

}  // namespace flexsched
