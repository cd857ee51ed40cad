#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flexsched/errors.hpp"
#include "flexsched/rng.hpp"

namespace flexsched {

// One (machine, duration) choice for an operation.
struct Alternative {
    int machine = 0;
    int64_t duration = 0;

    friend bool operator==(const Alternative&, const Alternative&) = default;
};

// An operation with its eligible machines. Machines are distinct and kept in
// ascending order; durations are integer time units >= 1.
struct OperationSpec {
    std::vector<Alternative> alternatives;

    int64_t min_duration() const;
    double mean_duration() const;
    // Duration on `machine`, or -1 when the machine is not eligible.
    int64_t duration_on(int machine) const;

    friend bool operator==(const OperationSpec&, const OperationSpec&) = default;
};

// Ordered chain of operations; position within the chain is the intra-job
// index and defines the precedence constraint.
struct Job {
    std::vector<OperationSpec> operations;

    friend bool operator==(const Job&, const Job&) = default;
};

// Immutable problem definition. `finalize()` builds the flat operation index
// and checks all structural invariants; every factory calls it before
// handing an instance out. Safe to share read-only across threads.
struct Instance {
    int num_jobs = 0;
    int num_machines = 0;
    std::vector<Job> jobs;
    std::string name;

    // Flat operation ids, assigned job-major: op (i, j) -> op_offset[i] + j.
    std::vector<int> op_offset;
    std::vector<int> op_job;    // flat id -> job index
    std::vector<int> op_index;  // flat id -> intra-job index

    void finalize();

    int total_operations() const { return static_cast<int>(op_job.size()); }
    int flat_id(int job, int idx) const { return op_offset[job] + idx; }
    const OperationSpec& op(int flat) const {
        return jobs[op_job[flat]].operations[op_index[flat]];
    }
    int64_t max_duration() const;

    // Structural equality; `name` is metadata and excluded.
    friend bool operator==(const Instance& a, const Instance& b) {
        return a.num_jobs == b.num_jobs && a.num_machines == b.num_machines &&
               a.jobs == b.jobs;
    }
};

struct GeneratorConfig {
    enum class Variant { kSd1, kSd2, kJssp, kFfsp };

    Variant variant = Variant::kSd1;
    int num_jobs = 0;
    int num_machines = 0;
    int stages = 3;              // FFSP only
    int machines_per_stage = 0;  // FFSP only; stages * machines_per_stage == num_machines
    uint64_t rng_seed = 0;
};

GeneratorConfig::Variant variant_from_string(const std::string& s);
std::string to_string(GeneratorConfig::Variant v);

// Dispatches on config.variant.
Instance generate_instance(const GeneratorConfig& config);

// SD1: durations U[1,20], ops per job U[round(0.8m), round(1.2m)].
// SD2: durations U[1,99], ops per job U[1, m].
// Both: eligible-machine count per op U[1, m], machines without replacement.
Instance generate_sd(const GeneratorConfig& config);

// Each job visits every machine exactly once in a random order; one
// alternative per operation; durations U[1,99].
Instance generate_jssp(const GeneratorConfig& config);

// `stages` operations per job; operation j eligible on exactly the machines
// of station j; durations U[2,9] drawn per eligible machine.
Instance generate_ffsp(const GeneratorConfig& config);

// Standard .fjs text format (Brandimarte/Hurink convention). Machines are
// 1-indexed in the file and 0-indexed in memory.
Instance parse_fjs(const std::string& text, const std::string& name = "");
std::string write_fjs(const Instance& inst);

// JSSP matrix formats: header "jobs machines", a jobs x machines duration
// matrix, then a jobs x machines machine matrix (1-indexed).
Instance parse_taillard_jssp(const std::string& text, const std::string& name = "");
Instance parse_dmu(const std::string& text, const std::string& name = "");

// Canonical versioned JSON form of an instance.
std::string instance_to_json(const Instance& inst);
Instance instance_from_json(const std::string& text);

struct StaticLowerBound {
    int64_t global = 0;
    std::vector<int64_t> per_op;  // flat op id -> lower-bound finish time
};

// LB(i,j) = LB(i,j-1) + min_m D(i,j,m); the global bound is the max entry.
// Machine contention is ignored, so this never exceeds any feasible makespan.
StaticLowerBound lower_bound_static(const Instance& inst);

}  // namespace flexsched
