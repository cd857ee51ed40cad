#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "flexsched/policy.hpp"
#include "flexsched/rules.hpp"

namespace flexsched {

struct DecodeResult {
    int64_t makespan = 0;
    std::vector<ScheduleRow> schedule;
    std::vector<Action> actions;
    double seconds = 0.0;
};

// Argmax rollout; deterministic given the parameters. Uses the KV cache when
// the config enables it.
DecodeResult decode_greedy(const Instance& inst, const PolicyParameters& params,
                           const PolicyConfig& config, double time_scale = 0.0);

// k independent stochastic rollouts (exact categorical sampling, no
// temperature); returns the best. Sample i draws from stream(seed, i), so the
// first k results form a prefix of any larger run.
DecodeResult decode_sampling(const Instance& inst, const PolicyParameters& params,
                             const PolicyConfig& config, int k, uint64_t seed,
                             double time_scale = 0.0,
                             std::vector<int64_t>* all_makespans = nullptr);

// 100 * (makespan - reference) / reference; reference must be positive.
double gap_percent(int64_t makespan, int64_t reference);

// Independent checker for complete schedules: machine exclusivity, job
// precedence, duration consistency, and a from-scratch makespan recompute.
// Throws InvariantError with a description of the first violation.
void validate_schedule(const Instance& inst, const std::vector<ScheduleRow>& rows,
                       int64_t reported_makespan);

std::string schedule_to_csv(const std::vector<ScheduleRow>& rows);
std::vector<ScheduleRow> schedule_from_csv(const std::string& text);

// Gantt chart as JSON (per-machine bar lists) and as a standalone SVG.
std::string gantt_json(const std::vector<ScheduleRow>& rows, int num_machines);
std::vector<ScheduleRow> gantt_from_json(const std::string& text);
std::string gantt_svg(const std::vector<ScheduleRow>& rows, int num_machines);

// Reference upper bounds: CSV lines "name,value".
std::map<std::string, int64_t> load_reference_table(const std::string& path);

struct BenchRow {
    std::string name;
    int64_t makespan = 0;
    bool has_ref = false;
    int64_t ref = 0;
    double gap = 0.0;
    double seconds = 0.0;
};

struct BenchTable {
    std::vector<BenchRow> rows;
    double mean_gap = 0.0;  // instance-wise average over rows with references
    int rows_with_ref = 0;
};

using InstanceSolver = std::function<DecodeResult(const Instance&)>;

// Parses every recognized instance file in `dir` (sorted by name), solves it,
// validates the schedule, and computes gaps against the reference table.
// Instances may be solved in parallel; rows stay ordered by name.
BenchTable benchmark_suite(const std::string& dir, const InstanceSolver& solver,
                           const std::map<std::string, int64_t>& refs, int threads = 1);
std::string bench_csv(const BenchTable& table);

// Loads one instance file, dispatching on its extension (.fjs, .jssp /
// .taillard, .dmu, .json).
Instance load_instance_file(const std::string& path);

}  // namespace flexsched
