#include "flexsched/instance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace flexsched {

int64_t OperationSpec::min_duration() const {
    int64_t best = std::numeric_limits<int64_t>::max();
    for (const auto& alt : alternatives) best = std::min(best, alt.duration);
    return best;
}

double OperationSpec::mean_duration() const {
    double total = 0.0;
    for (const auto& alt : alternatives) total += static_cast<double>(alt.duration);
    return total / static_cast<double>(alternatives.size());
}

int64_t OperationSpec::duration_on(int machine) const {
    for (const auto& alt : alternatives) {
        if (alt.machine == machine) return alt.duration;
    }
    return -1;
}

void Instance::finalize() {
    if (num_jobs != static_cast<int>(jobs.size())) {
        throw InvariantError("instance: num_jobs does not match job list");
    }
    if (num_machines <= 0) throw InvariantError("instance: num_machines must be positive");

    op_offset.assign(jobs.size(), 0);
    op_job.clear();
    op_index.clear();
    for (size_t i = 0; i < jobs.size(); ++i) {
        const Job& job = jobs[i];
        if (job.operations.empty()) throw InvariantError("instance: empty job");
        op_offset[i] = static_cast<int>(op_job.size());
        for (size_t j = 0; j < job.operations.size(); ++j) {
            const OperationSpec& op = job.operations[j];
            if (op.alternatives.empty()) {
                throw InvariantError("instance: operation with no eligible machine");
            }
            std::vector<int> seen;
            for (const auto& alt : op.alternatives) {
                if (alt.machine < 0 || alt.machine >= num_machines) {
                    throw InvariantError("instance: machine index out of range");
                }
                if (alt.duration < 1) throw InvariantError("instance: duration below 1");
                seen.push_back(alt.machine);
            }
            std::sort(seen.begin(), seen.end());
            if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
                throw InvariantError("instance: duplicate machine in eligibility list");
            }
            op_job.push_back(static_cast<int>(i));
            op_index.push_back(static_cast<int>(j));
        }
    }
    if (op_job.empty()) throw InvariantError("instance: no operations");
}

int64_t Instance::max_duration() const {
    int64_t best = 1;
    for (const auto& job : jobs) {
        for (const auto& op : job.operations) {
            for (const auto& alt : op.alternatives) best = std::max(best, alt.duration);
        }
    }
    return best;
}

GeneratorConfig::Variant variant_from_string(const std::string& s) {
    if (s == "sd1") return GeneratorConfig::Variant::kSd1;
    if (s == "sd2") return GeneratorConfig::Variant::kSd2;
    if (s == "jssp") return GeneratorConfig::Variant::kJssp;
    if (s == "ffsp") return GeneratorConfig::Variant::kFfsp;
    throw ConfigError("unknown generator variant: " + s);
}

std::string to_string(GeneratorConfig::Variant v) {
    switch (v) {
        case GeneratorConfig::Variant::kSd1: return "sd1";
        case GeneratorConfig::Variant::kSd2: return "sd2";
        case GeneratorConfig::Variant::kJssp: return "jssp";
        case GeneratorConfig::Variant::kFfsp: return "ffsp";
    }
    throw ConfigError("invalid variant enum");
}

namespace {

void check_dims(const GeneratorConfig& c) {
    if (c.num_jobs <= 0 || c.num_machines <= 0) {
        throw ConfigError("generator: num_jobs and num_machines must be positive");
    }
}

// k distinct machines from [0, m), ascending.
std::vector<int> pick_machines(int m, int k, Rng& rng) {
    std::vector<int> pool(m);
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < k; ++i) {
        int j = static_cast<int>(rng.uniform_int(i, m - 1));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace

Instance generate_instance(const GeneratorConfig& config) {
    switch (config.variant) {
        case GeneratorConfig::Variant::kSd1:
        case GeneratorConfig::Variant::kSd2: return generate_sd(config);
        case GeneratorConfig::Variant::kJssp: return generate_jssp(config);
        case GeneratorConfig::Variant::kFfsp: return generate_ffsp(config);
    }
    throw ConfigError("invalid variant enum");
}

Instance generate_sd(const GeneratorConfig& config) {
    check_dims(config);
    bool sd1 = config.variant == GeneratorConfig::Variant::kSd1;
    if (!sd1 && config.variant != GeneratorConfig::Variant::kSd2) {
        throw ConfigError("generate_sd requires variant sd1 or sd2");
    }
    int m = config.num_machines;
    int64_t ops_lo = sd1 ? std::max<int64_t>(1, static_cast<int64_t>(std::llround(0.8 * m))) : 1;
    int64_t ops_hi = sd1 ? std::max<int64_t>(ops_lo, static_cast<int64_t>(std::llround(1.2 * m))) : m;
    int64_t dur_lo = 1;
    int64_t dur_hi = sd1 ? 20 : 99;

    Rng rng(config.rng_seed);
    Instance inst;
    inst.num_jobs = config.num_jobs;
    inst.num_machines = m;
    inst.name = to_string(config.variant);
    inst.jobs.resize(config.num_jobs);
    for (auto& job : inst.jobs) {
        int num_ops = static_cast<int>(rng.uniform_int(ops_lo, ops_hi));
        job.operations.resize(num_ops);
        for (auto& op : job.operations) {
            int k = static_cast<int>(rng.uniform_int(1, m));
            for (int machine : pick_machines(m, k, rng)) {
                op.alternatives.push_back({machine, rng.uniform_int(dur_lo, dur_hi)});
            }
        }
    }
    inst.finalize();
    return inst;
}

Instance generate_jssp(const GeneratorConfig& config) {
    check_dims(config);
    Rng rng(config.rng_seed);
    Instance inst;
    inst.num_jobs = config.num_jobs;
    inst.num_machines = config.num_machines;
    inst.name = "jssp";
    inst.jobs.resize(config.num_jobs);
    for (auto& job : inst.jobs) {
        std::vector<int> route(config.num_machines);
        std::iota(route.begin(), route.end(), 0);
        rng.shuffle(route);
        job.operations.resize(config.num_machines);
        for (int j = 0; j < config.num_machines; ++j) {
            job.operations[j].alternatives.push_back({route[j], rng.uniform_int(1, 99)});
        }
    }
    inst.finalize();
    return inst;
}

Instance generate_ffsp(const GeneratorConfig& config) {
    check_dims(config);
    if (config.stages <= 0 || config.machines_per_stage <= 0 ||
        config.stages * config.machines_per_stage != config.num_machines) {
        throw ConfigError("generate_ffsp: stages * machines_per_stage must equal num_machines");
    }
    Rng rng(config.rng_seed);
    Instance inst;
    inst.num_jobs = config.num_jobs;
    inst.num_machines = config.num_machines;
    inst.name = "ffsp";
    inst.jobs.resize(config.num_jobs);
    for (auto& job : inst.jobs) {
        job.operations.resize(config.stages);
        for (int s = 0; s < config.stages; ++s) {
            for (int k = 0; k < config.machines_per_stage; ++k) {
                int machine = s * config.machines_per_stage + k;
                job.operations[s].alternatives.push_back({machine, rng.uniform_int(2, 9)});
            }
        }
    }
    inst.finalize();
    return inst;
}

namespace {

// Whitespace tokenizer that tracks line numbers for error messages and
// accepts both \n and \r\n endings.
class Tokens {
public:
    explicit Tokens(const std::string& text) {
        std::string cur;
        int line = 1;
        auto flush = [&] {
            if (!cur.empty()) {
                toks_.push_back(cur);
                lines_.push_back(line);
                cur.clear();
            }
        };
        for (char c : text) {
            if (c == '\n') {
                flush();
                ++line;
            } else if (c == ' ' || c == '\t' || c == '\r') {
                flush();
            } else {
                cur.push_back(c);
            }
        }
        flush();
    }

    bool done() const { return pos_ >= toks_.size(); }
    int line() const { return pos_ < lines_.size() ? lines_[pos_] : (lines_.empty() ? 1 : lines_.back()); }

    int64_t next_int(const char* what) {
        if (done()) {
            throw ParseError(std::string("unexpected end of input while reading ") + what);
        }
        const std::string& t = toks_[pos_];
        size_t used = 0;
        int64_t v = 0;
        try {
            v = std::stoll(t, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != t.size()) {
            throw ParseError("line " + std::to_string(line()) + ": expected integer for " +
                             what + ", got '" + t + "'");
        }
        ++pos_;
        return v;
    }

    // Skips whatever is left on `ln`; the .fjs header line may carry a
    // trailing average-flexibility value.
    void skip_rest_of_line(int ln) {
        while (!done() && lines_[pos_] == ln) ++pos_;
    }

private:
    std::vector<std::string> toks_;
    std::vector<int> lines_;
    size_t pos_ = 0;
};

}  // namespace

Instance parse_fjs(const std::string& text, const std::string& name) {
    Tokens toks(text);
    Instance inst;
    inst.name = name;
    int header_line = toks.line();
    inst.num_jobs = static_cast<int>(toks.next_int("job count"));
    inst.num_machines = static_cast<int>(toks.next_int("machine count"));
    if (inst.num_jobs <= 0 || inst.num_machines <= 0) {
        throw ParseError("fjs header: non-positive dimensions");
    }
    toks.skip_rest_of_line(header_line);  // optional avg flexibility

    inst.jobs.resize(inst.num_jobs);
    for (int i = 0; i < inst.num_jobs; ++i) {
        int num_ops = static_cast<int>(toks.next_int("operation count"));
        if (num_ops <= 0) {
            throw ParseError("line " + std::to_string(toks.line()) + ": job " +
                             std::to_string(i) + " has no operations");
        }
        inst.jobs[i].operations.resize(num_ops);
        for (int j = 0; j < num_ops; ++j) {
            int num_alts = static_cast<int>(toks.next_int("alternative count"));
            if (num_alts <= 0) {
                throw ParseError("line " + std::to_string(toks.line()) +
                                 ": operation with no alternatives");
            }
            auto& op = inst.jobs[i].operations[j];
            for (int a = 0; a < num_alts; ++a) {
                int line = toks.line();
                int machine = static_cast<int>(toks.next_int("machine index"));
                int64_t dur = toks.next_int("duration");
                if (machine < 1 || machine > inst.num_machines) {
                    throw ParseError("line " + std::to_string(line) +
                                     ": machine index out of range: " + std::to_string(machine));
                }
                if (dur < 1) {
                    throw ParseError("line " + std::to_string(line) + ": duration below 1");
                }
                op.alternatives.push_back({machine - 1, dur});
            }
            std::sort(op.alternatives.begin(), op.alternatives.end(),
                      [](const Alternative& x, const Alternative& y) { return x.machine < y.machine; });
        }
    }
    if (!toks.done()) {
        throw ParseError("line " + std::to_string(toks.line()) + ": trailing data after last job");
    }
    inst.finalize();
    return inst;
}

std::string write_fjs(const Instance& inst) {
    std::ostringstream out;
    double total_alts = 0;
    for (const auto& job : inst.jobs) {
        for (const auto& op : job.operations) total_alts += static_cast<double>(op.alternatives.size());
    }
    int n = 0;
    for (const auto& job : inst.jobs) n += static_cast<int>(job.operations.size());
    out << inst.num_jobs << ' ' << inst.num_machines << ' ' << (total_alts / n) << '\n';
    for (const auto& job : inst.jobs) {
        out << job.operations.size();
        for (const auto& op : job.operations) {
            out << ' ' << op.alternatives.size();
            for (const auto& alt : op.alternatives) {
                out << ' ' << (alt.machine + 1) << ' ' << alt.duration;
            }
        }
        out << '\n';
    }
    return out.str();
}

namespace {

Instance parse_jssp_matrices(const std::string& text, const std::string& name) {
    Tokens toks(text);
    int jobs = static_cast<int>(toks.next_int("job count"));
    int machines = static_cast<int>(toks.next_int("machine count"));
    if (jobs <= 0 || machines <= 0) throw ParseError("jssp header: non-positive dimensions");

    std::vector<std::vector<int64_t>> times(jobs, std::vector<int64_t>(machines));
    for (int i = 0; i < jobs; ++i) {
        for (int j = 0; j < machines; ++j) times[i][j] = toks.next_int("duration");
    }
    Instance inst;
    inst.name = name;
    inst.num_jobs = jobs;
    inst.num_machines = machines;
    inst.jobs.resize(jobs);
    for (int i = 0; i < jobs; ++i) {
        inst.jobs[i].operations.resize(machines);
        for (int j = 0; j < machines; ++j) {
            int line = toks.line();
            int machine = static_cast<int>(toks.next_int("machine index"));
            if (machine < 1 || machine > machines) {
                throw ParseError("line " + std::to_string(line) +
                                 ": machine index out of range: " + std::to_string(machine));
            }
            inst.jobs[i].operations[j].alternatives.push_back({machine - 1, times[i][j]});
        }
    }
    if (!toks.done()) {
        throw ParseError("line " + std::to_string(toks.line()) + ": trailing data after machine matrix");
    }
    inst.finalize();
    return inst;
}

}  // namespace

Instance parse_taillard_jssp(const std::string& text, const std::string& name) {
    return parse_jssp_matrices(text, name);
}

Instance parse_dmu(const std::string& text, const std::string& name) {
    return parse_jssp_matrices(text, name);
}

std::string instance_to_json(const Instance& inst) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["num_jobs"] = inst.num_jobs;
    j["num_machines"] = inst.num_machines;
    j["meta"] = inst.name;
    nlohmann::json jobs = nlohmann::json::array();
    for (const auto& job : inst.jobs) {
        nlohmann::json ops = nlohmann::json::array();
        for (const auto& op : job.operations) {
            nlohmann::json alts = nlohmann::json::array();
            for (const auto& alt : op.alternatives) {
                alts.push_back({{"machine", alt.machine}, {"duration", alt.duration}});
            }
            ops.push_back({{"alternatives", alts}});
        }
        jobs.push_back({{"operations", ops}});
    }
    j["jobs"] = jobs;
    return j.dump(2) + "\n";
}

Instance instance_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("instance json: ") + e.what());
    }
    try {
        if (j.at("format_version").get<int>() != 1) {
            throw ParseError("instance json: unsupported format_version");
        }
        Instance inst;
        inst.num_jobs = j.at("num_jobs").get<int>();
        inst.num_machines = j.at("num_machines").get<int>();
        inst.name = j.value("meta", std::string());
        for (const auto& job_j : j.at("jobs")) {
            Job job;
            for (const auto& op_j : job_j.at("operations")) {
                OperationSpec op;
                for (const auto& alt_j : op_j.at("alternatives")) {
                    op.alternatives.push_back(
                        {alt_j.at("machine").get<int>(), alt_j.at("duration").get<int64_t>()});
                }
                job.operations.push_back(std::move(op));
            }
            inst.jobs.push_back(std::move(job));
        }
        inst.finalize();
        return inst;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("instance json: ") + e.what());
    }
}

StaticLowerBound lower_bound_static(const Instance& inst) {
    StaticLowerBound lb;
    lb.per_op.assign(inst.total_operations(), 0);
    for (int i = 0; i < inst.num_jobs; ++i) {
        int64_t acc = 0;
        const Job& job = inst.jobs[i];
        for (size_t j = 0; j < job.operations.size(); ++j) {
            acc += job.operations[j].min_duration();
            lb.per_op[inst.flat_id(i, static_cast<int>(j))] = acc;
        }
        lb.global = std::max(lb.global, acc);
    }
    return lb;
}

}  // namespace flexsched
