#include "flexsched/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "flexsched/parallel.hpp"

namespace flexsched {

namespace {

int argmax(const std::vector<double>& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i) {
        if (v[static_cast<size_t>(i)] > v[static_cast<size_t>(best)]) best = i;
    }
    return best;
}

}  // namespace

DecodeResult decode_greedy(const Instance& inst, const PolicyParameters& params,
                           const PolicyConfig& config, double time_scale) {
    auto started = std::chrono::steady_clock::now();
    nn::NoGradGuard no_grad;
    SchedulingState state(inst);
    DecodeResult out;
    KvCache cache;
    while (!state.terminal()) {
        StateFeatures f = state.extract_features(time_scale);
        PolicyOutput pol = config.use_kv_cache ? policy_forward_cached(f, params, config, cache)
                                               : policy_forward(f, params, config);
        Action a = pol.actions[static_cast<size_t>(argmax(pol.probs))];
        out.actions.push_back(a);
        state.apply(a);
    }
    out.makespan = state.makespan();
    out.schedule = state.extract_schedule();
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return out;
}

DecodeResult decode_sampling(const Instance& inst, const PolicyParameters& params,
                             const PolicyConfig& config, int k, uint64_t seed, double time_scale,
                             std::vector<int64_t>* all_makespans) {
    if (k < 1) throw ConfigError("decode_sampling: k must be positive");
    auto started = std::chrono::steady_clock::now();
    nn::NoGradGuard no_grad;
    DecodeResult best;
    best.makespan = -1;
    if (all_makespans) all_makespans->clear();
    for (int sample = 0; sample < k; ++sample) {
        Rng rng = Rng::stream(seed, static_cast<uint64_t>(sample));
        SchedulingState state(inst);
        std::vector<Action> actions;
        KvCache cache;
        while (!state.terminal()) {
            StateFeatures f = state.extract_features(time_scale);
            PolicyOutput pol = config.use_kv_cache
                                   ? policy_forward_cached(f, params, config, cache)
                                   : policy_forward(f, params, config);
            size_t pick = rng.categorical(pol.probs);
            actions.push_back(pol.actions[pick]);
            state.apply(pol.actions[pick]);
        }
        int64_t makespan = state.makespan();
        if (all_makespans) all_makespans->push_back(makespan);
        if (best.makespan < 0 || makespan < best.makespan) {
            best.makespan = makespan;
            best.actions = std::move(actions);
            best.schedule = state.extract_schedule();
        }
    }
    best.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return best;
}

double gap_percent(int64_t makespan, int64_t reference) {
    if (reference <= 0) throw ConfigError("gap: reference must be positive");
    return 100.0 * static_cast<double>(makespan - reference) / static_cast<double>(reference);
}

void validate_schedule(const Instance& inst, const std::vector<ScheduleRow>& rows,
                       int64_t reported_makespan) {
    if (static_cast<int>(rows.size()) != inst.total_operations()) {
        throw InvariantError("schedule: row count " + std::to_string(rows.size()) +
                             " does not cover all " + std::to_string(inst.total_operations()) +
                             " operations");
    }
    std::vector<const ScheduleRow*> by_op(inst.total_operations(), nullptr);
    for (const ScheduleRow& r : rows) {
        if (r.job < 0 || r.job >= inst.num_jobs ||
            r.idx < 0 || r.idx >= static_cast<int>(inst.jobs[r.job].operations.size())) {
            throw InvariantError("schedule: row references a nonexistent operation");
        }
        int flat = inst.flat_id(r.job, r.idx);
        if (by_op[flat]) throw InvariantError("schedule: duplicate row for one operation");
        by_op[flat] = &r;
        int64_t d = inst.jobs[r.job].operations[r.idx].duration_on(r.machine);
        if (d < 0) throw InvariantError("schedule: operation assigned to an ineligible machine");
        if (r.start < 0 || r.finish != r.start + d) {
            throw InvariantError("schedule: finish != start + duration");
        }
    }
    // Job precedence.
    for (int i = 0; i < inst.num_jobs; ++i) {
        for (size_t j = 1; j < inst.jobs[i].operations.size(); ++j) {
            const ScheduleRow* prev = by_op[inst.flat_id(i, static_cast<int>(j) - 1)];
            const ScheduleRow* cur = by_op[inst.flat_id(i, static_cast<int>(j))];
            if (cur->start < prev->finish) {
                throw InvariantError("schedule: job precedence violated in job " +
                                     std::to_string(i));
            }
        }
    }
    // Machine exclusivity.
    std::map<int, std::vector<std::pair<int64_t, int64_t>>> by_machine;
    for (const ScheduleRow& r : rows) by_machine[r.machine].push_back({r.start, r.finish});
    for (auto& [m, intervals] : by_machine) {
        std::sort(intervals.begin(), intervals.end());
        for (size_t i = 1; i < intervals.size(); ++i) {
            if (intervals[i].first < intervals[i - 1].second) {
                throw InvariantError("schedule: overlapping intervals on machine " +
                                     std::to_string(m));
            }
        }
    }
    int64_t recomputed = 0;
    for (const ScheduleRow& r : rows) recomputed = std::max(recomputed, r.finish);
    if (recomputed != reported_makespan) {
        throw InvariantError("schedule: reported makespan " + std::to_string(reported_makespan) +
                             " != recomputed " + std::to_string(recomputed));
    }
}

std::string schedule_to_csv(const std::vector<ScheduleRow>& rows) {
    std::ostringstream out;
    out << "op_id,job,idx,machine,start,finish\n";
    for (const ScheduleRow& r : rows) {
        out << r.op << ',' << r.job << ',' << r.idx << ',' << r.machine << ',' << r.start << ','
            << r.finish << '\n';
    }
    return out.str();
}

std::vector<ScheduleRow> schedule_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("schedule csv: empty input");
    std::vector<ScheduleRow> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream fields(line);
        ScheduleRow r;
        if (!(fields >> r.op >> r.job >> r.idx >> r.machine >> r.start >> r.finish)) {
            throw ParseError("schedule csv line " + std::to_string(line_no) + ": expected 6 fields");
        }
        rows.push_back(r);
    }
    return rows;
}

std::string gantt_json(const std::vector<ScheduleRow>& rows, int num_machines) {
    int64_t makespan = 0;
    nlohmann::json machines = nlohmann::json::array();
    for (int m = 0; m < num_machines; ++m) {
        nlohmann::json bars = nlohmann::json::array();
        for (const ScheduleRow& r : rows) {
            if (r.machine != m) continue;
            bars.push_back({{"op", r.op},
                            {"job", r.job},
                            {"idx", r.idx},
                            {"start", r.start},
                            {"finish", r.finish}});
            makespan = std::max(makespan, r.finish);
        }
        std::sort(bars.begin(), bars.end(), [](const nlohmann::json& a, const nlohmann::json& b) {
            return a.at("start").get<int64_t>() < b.at("start").get<int64_t>();
        });
        machines.push_back({{"machine", m}, {"bars", bars}});
    }
    nlohmann::json j{{"format_version", 1}, {"makespan", makespan}, {"machines", machines}};
    return j.dump(2) + "\n";
}

std::vector<ScheduleRow> gantt_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
        if (j.at("format_version").get<int>() != 1) {
            throw ParseError("gantt json: unsupported format_version");
        }
        std::vector<ScheduleRow> rows;
        for (const auto& machine : j.at("machines")) {
            int m = machine.at("machine").get<int>();
            for (const auto& bar : machine.at("bars")) {
                ScheduleRow r;
                r.op = bar.at("op").get<int>();
                r.job = bar.at("job").get<int>();
                r.idx = bar.at("idx").get<int>();
                r.machine = m;
                r.start = bar.at("start").get<int64_t>();
                r.finish = bar.at("finish").get<int64_t>();
                rows.push_back(r);
            }
        }
        std::sort(rows.begin(), rows.end(),
                  [](const ScheduleRow& a, const ScheduleRow& b) { return a.op < b.op; });
        return rows;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("gantt json: ") + e.what());
    }
}

std::string gantt_svg(const std::vector<ScheduleRow>& rows, int num_machines) {
    int64_t makespan = 0;
    for (const ScheduleRow& r : rows) makespan = std::max(makespan, r.finish);

    const int row_height = 28;
    const int bar_height = 20;
    const int left = 60;
    const int top = 20;
    const int chart_width = 720;
    double unit = makespan > 0 ? static_cast<double>(chart_width) / static_cast<double>(makespan) : 1.0;
    int width = left + chart_width + 20;
    int height = top + num_machines * row_height + 40;

    static const char* kPalette[] = {"#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1",
                                     "#76b7b2", "#edc948", "#ff9da7", "#9c755f", "#bab0ac"};

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    for (int m = 0; m < num_machines; ++m) {
        int y = top + m * row_height;
        svg << "<text x=\"4\" y=\"" << (y + bar_height - 5) << "\">M" << m << "</text>\n";
        svg << "<line x1=\"" << left << "\" y1=\"" << (y + bar_height + 2) << "\" x2=\""
            << (left + chart_width) << "\" y2=\"" << (y + bar_height + 2)
            << "\" stroke=\"#ddd\"/>\n";
    }
    for (const ScheduleRow& r : rows) {
        int y = top + r.machine * row_height;
        double x = left + static_cast<double>(r.start) * unit;
        double w = std::max(1.0, static_cast<double>(r.finish - r.start) * unit);
        svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w << "\" height=\""
            << bar_height << "\" fill=\"" << kPalette[r.job % 10]
            << "\" stroke=\"#333\" stroke-width=\"0.5\"><title>J" << r.job << "." << r.idx
            << " [" << r.start << "," << r.finish << "] on M" << r.machine << "</title></rect>\n";
        if (w > 26) {
            svg << "<text x=\"" << (x + 3) << "\" y=\"" << (y + bar_height - 6)
                << "\" fill=\"#fff\">J" << r.job << "." << r.idx << "</text>\n";
        }
    }
    int axis_y = top + num_machines * row_height + 14;
    svg << "<text x=\"" << left << "\" y=\"" << axis_y << "\">0</text>\n";
    svg << "<text x=\"" << (left + chart_width - 30) << "\" y=\"" << axis_y << "\">"
        << makespan << "</text>\n";
    svg << "<text x=\"4\" y=\"" << axis_y << "\">t</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

std::map<std::string, int64_t> load_reference_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("reference table: cannot open " + path);
    std::map<std::string, int64_t> refs;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        size_t comma = line.find(',');
        if (comma == std::string::npos) {
            throw ParseError("reference table line " + std::to_string(line_no) +
                             ": expected name,value");
        }
        std::string name = line.substr(0, comma);
        if (name == "name") continue;  // header
        try {
            refs[name] = std::stoll(line.substr(comma + 1));
        } catch (const std::exception&) {
            throw ParseError("reference table line " + std::to_string(line_no) + ": bad value");
        }
    }
    return refs;
}

Instance load_instance_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open instance file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    std::filesystem::path p(path);
    std::string stem = p.stem().string();
    std::string ext = p.extension().string();
    if (ext == ".fjs") return parse_fjs(buf.str(), stem);
    if (ext == ".jssp" || ext == ".taillard") return parse_taillard_jssp(buf.str(), stem);
    if (ext == ".dmu") return parse_dmu(buf.str(), stem);
    if (ext == ".json") {
        Instance inst = instance_from_json(buf.str());
        if (inst.name.empty()) inst.name = stem;
        return inst;
    }
    throw ParseError("unrecognized instance extension: " + path);
}

BenchTable benchmark_suite(const std::string& dir, const InstanceSolver& solver,
                           const std::map<std::string, int64_t>& refs, int threads) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        if (ext == ".fjs" || ext == ".jssp" || ext == ".taillard" || ext == ".dmu" ||
            ext == ".json") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());

    BenchTable table;
    table.rows.resize(files.size());
    run_sharded(static_cast<int>(files.size()), threads, [&](int i) {
        const auto& file = files[static_cast<size_t>(i)];
        Instance inst = load_instance_file(file.string());
        DecodeResult result = solver(inst);
        validate_schedule(inst, result.schedule, result.makespan);
        BenchRow row;
        row.name = file.stem().string();
        row.makespan = result.makespan;
        row.seconds = result.seconds;
        auto it = refs.find(row.name);
        if (it != refs.end()) {
            row.has_ref = true;
            row.ref = it->second;
            row.gap = gap_percent(row.makespan, row.ref);
        }
        table.rows[static_cast<size_t>(i)] = std::move(row);
    });
    double gap_total = 0.0;
    for (const BenchRow& row : table.rows) {
        if (row.has_ref) {
            gap_total += row.gap;
            ++table.rows_with_ref;
        }
    }
    table.mean_gap = table.rows_with_ref > 0 ? gap_total / table.rows_with_ref : 0.0;
    return table;
}

// Wall times stay out of the CSV so reruns of a deterministic solver
// produce identical bytes; timings are reported on stdout instead.
std::string bench_csv(const BenchTable& table) {
    std::ostringstream out;
    out.precision(17);
    out << "name,makespan,reference,gap_percent\n";
    for (const BenchRow& r : table.rows) {
        out << r.name << ',' << r.makespan << ',';
        if (r.has_ref) out << r.ref << ',' << r.gap;
        else out << ',';
        out << '\n';
    }
    return out.str();
}

}  // namespace flexsched
