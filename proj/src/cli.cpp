#include "flexsched/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"

#include "flexsched/evaluation.hpp"
#include "flexsched/parallel.hpp"
#include "flexsched/training.hpp"

namespace flexsched {

namespace {

int default_threads() {
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open " + path + " for writing");
    out << content;
    if (!out) throw ConfigError("write failed: " + path);
}

struct SolverChoice {
    std::string rule;
    std::string checkpoint;
    int sample = 0;  // 0 = greedy
    uint64_t seed = 0;
    bool kv_cache = false;

    InstanceSolver make() const {
        if (!rule.empty()) {
            if (sample > 0) {
                throw ConfigError("--sample applies to --checkpoint solvers only");
            }
            Rule r = rule_from_string(rule);
            uint64_t root = seed;
            return [r, root](const Instance& inst) {
                auto started = std::chrono::steady_clock::now();
                // One RNG stream per instance, keyed on its content hash, so
                // the result does not depend on solve order.
                Rng rng(derive_seed(root, SchedulingState(inst).canonical_hash()));
                PdrResult p = pdr_rollout(inst, r, rng);
                DecodeResult out;
                out.makespan = p.makespan;
                out.schedule = p.schedule;
                out.actions = p.actions;
                out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                            started).count();
                return out;
            };
        }
        auto ckpt = std::make_shared<Checkpoint>(load_checkpoint(checkpoint));
        ckpt->config.use_kv_cache = kv_cache;
        int k = sample;
        uint64_t root = seed;
        return [ckpt, k, root](const Instance& inst) {
            if (k <= 0) return decode_greedy(inst, ckpt->params, ckpt->config);
            uint64_t instance_seed = derive_seed(root, SchedulingState(inst).canonical_hash());
            return decode_sampling(inst, ckpt->params, ckpt->config, k, instance_seed);
        };
    }
};

int run_generate(const GeneratorConfig& base, int count, const std::string& out_dir,
                 const std::string& format) {
    std::filesystem::create_directories(out_dir);
    for (int i = 0; i < count; ++i) {
        GeneratorConfig c = base;
        c.rng_seed = derive_seed(base.rng_seed, static_cast<uint64_t>(i));
        Instance inst = generate_instance(c);
        std::string stem = to_string(c.variant) + "_" + std::to_string(c.num_jobs) + "x" +
                           std::to_string(c.num_machines) + "_s" +
                           std::to_string(base.rng_seed) + "_" + std::to_string(i);
        inst.name = stem;
        std::filesystem::path path = std::filesystem::path(out_dir) / (stem + "." + format);
        write_file(path.string(), format == "fjs" ? write_fjs(inst) : instance_to_json(inst));
        std::cout << path.string() << "\n";
    }
    return kExitOk;
}

int run_solve(const SolverChoice& choice, const std::vector<std::string>& files,
              const std::string& out_schedule, const std::string& out_gantt,
              const std::string& out_svg, const std::string& out_csv) {
    InstanceSolver solver = choice.make();
    BenchTable table;
    for (const std::string& file : files) {
        Instance inst = load_instance_file(file);
        DecodeResult result = solver(inst);
        validate_schedule(inst, result.schedule, result.makespan);
        std::cout << inst.name << " makespan " << result.makespan << "\n";
        if (!out_schedule.empty()) write_file(out_schedule, schedule_to_csv(result.schedule));
        if (!out_gantt.empty()) {
            write_file(out_gantt, gantt_json(result.schedule, inst.num_machines));
        }
        if (!out_svg.empty()) write_file(out_svg, gantt_svg(result.schedule, inst.num_machines));
        BenchRow row;
        row.name = inst.name;
        row.makespan = result.makespan;
        row.seconds = result.seconds;
        table.rows.push_back(row);
    }
    if (!out_csv.empty()) write_file(out_csv, bench_csv(table));
    return kExitOk;
}

int run_bench(const SolverChoice& choice, const std::string& dir, const std::string& refs_path,
              const std::string& out_csv, int threads) {
    std::map<std::string, int64_t> refs;
    if (!refs_path.empty()) refs = load_reference_table(refs_path);
    BenchTable table = benchmark_suite(dir, choice.make(), refs, threads);
    std::cout << bench_csv(table);
    if (table.rows_with_ref > 0) {
        std::cout << "instance-wise mean gap over " << table.rows_with_ref << " instances: "
                  << table.mean_gap << "%\n";
    }
    if (!out_csv.empty()) write_file(out_csv, bench_csv(table));
    return kExitOk;
}

int run_gantt(const std::string& schedule_path, int machines, const std::string& out_svg,
              const std::string& out_json) {
    std::ifstream in(schedule_path);
    if (!in) throw ParseError("cannot open schedule " + schedule_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    std::vector<ScheduleRow> rows = schedule_from_csv(buf.str());
    if (machines <= 0) {
        for (const ScheduleRow& r : rows) machines = std::max(machines, r.machine + 1);
    }
    if (!out_svg.empty()) write_file(out_svg, gantt_svg(rows, machines));
    if (!out_json.empty()) write_file(out_json, gantt_json(rows, machines));
    if (out_svg.empty() && out_json.empty()) std::cout << gantt_svg(rows, machines);
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"flexsched: flexible job-shop scheduling via dispatching rules and a "
                 "learned dual-branch transformer policy"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "generate synthetic instances");
    GeneratorConfig gen_cfg;
    std::string gen_variant = "sd1";
    int gen_count = 1;
    std::string gen_out = ".";
    std::string gen_format = "json";
    gen->add_option("--variant", gen_variant, "sd1|sd2|jssp|ffsp")->capture_default_str();
    gen->add_option("--jobs", gen_cfg.num_jobs, "number of jobs")->required();
    gen->add_option("--machines", gen_cfg.num_machines, "number of machines")->required();
    gen->add_option("--stages", gen_cfg.stages, "ffsp stages")->capture_default_str();
    gen->add_option("--machines-per-stage", gen_cfg.machines_per_stage, "ffsp station size");
    gen->add_option("--seed", gen_cfg.rng_seed, "root seed")->capture_default_str();
    gen->add_option("--count", gen_count, "instances to generate")->capture_default_str();
    gen->add_option("--out", gen_out, "output directory")->capture_default_str();
    gen->add_option("--format", gen_format, "json|fjs")->capture_default_str();

    // shared solver flags
    auto add_solver_flags = [](CLI::App* cmd, SolverChoice& choice) {
        auto* rule = cmd->add_option("--rule", choice.rule, "dispatching rule "
                                     "(fifo|spt|mopnr|mwkr|random)");
        auto* ckpt = cmd->add_option("--checkpoint", choice.checkpoint, "policy checkpoint");
        rule->excludes(ckpt);
        ckpt->excludes(rule);
        auto* sample =
            cmd->add_option("--sample", choice.sample, "best-of-k stochastic decoding");
        auto* greedy = cmd->add_flag("--greedy", "argmax decoding (the default)");
        sample->excludes(greedy);
        greedy->excludes(sample);
        cmd->add_option("--seed", choice.seed, "root seed for stochastic components");
        cmd->add_flag("--kv-cache", choice.kv_cache, "enable the decoding KV cache");
    };

    // solve
    auto* solve = app.add_subcommand("solve", "solve instance files");
    SolverChoice solve_choice;
    add_solver_flags(solve, solve_choice);
    std::vector<std::string> solve_files;
    std::string solve_out_schedule, solve_out_gantt, solve_out_svg, solve_out_csv;
    solve->add_option("files", solve_files, "instance files")->required();
    solve->add_option("--out-schedule", solve_out_schedule, "write schedule CSV");
    solve->add_option("--out-gantt", solve_out_gantt, "write gantt JSON");
    solve->add_option("--out-svg", solve_out_svg, "write gantt SVG");
    solve->add_option("--out-csv", solve_out_csv, "write results CSV");

    // train
    auto* tr = app.add_subcommand("train", "train a policy");
    std::string train_config_path, resume_path;
    std::vector<std::string> overrides;
    tr->add_option("--config", train_config_path, "key = value config file");
    tr->add_option("--set", overrides, "override `key=value` pairs");
    tr->add_option("--resume", resume_path, "checkpoint to resume from");
    int train_threads = 0;
    tr->add_option("--jobs-parallel", train_threads, "worker threads (default: cores)");

    // bench
    auto* bench = app.add_subcommand("bench", "run a benchmark directory");
    SolverChoice bench_choice;
    add_solver_flags(bench, bench_choice);
    std::string bench_dir, bench_refs, bench_out;
    int bench_threads = 0;
    bench->add_option("--dir", bench_dir, "directory of instance files")->required();
    bench->add_option("--refs", bench_refs, "reference upper bounds CSV");
    bench->add_option("--out", bench_out, "write results CSV");
    bench->add_option("--jobs-parallel", bench_threads, "worker threads (default: cores)");

    // gantt
    auto* gantt = app.add_subcommand("gantt", "render a schedule CSV");
    std::string gantt_schedule, gantt_svg_out, gantt_json_out;
    int gantt_machines = 0;
    gantt->add_option("--schedule", gantt_schedule, "schedule CSV")->required();
    gantt->add_option("--machines", gantt_machines, "machine count (default: inferred)");
    gantt->add_option("--out-svg", gantt_svg_out, "SVG output path");
    gantt->add_option("--out-json", gantt_json_out, "JSON output path");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfigError;
    }

    try {
        if (gen->parsed()) {
            gen_cfg.variant = variant_from_string(gen_variant);
            if (gen_format != "json" && gen_format != "fjs") {
                throw ConfigError("generate: format must be json or fjs");
            }
            return run_generate(gen_cfg, gen_count, gen_out, gen_format);
        }
        if (solve->parsed()) {
            if (solve_choice.rule.empty() && solve_choice.checkpoint.empty()) {
                throw ConfigError("solve: pass --rule or --checkpoint");
            }
            return run_solve(solve_choice, solve_files, solve_out_schedule, solve_out_gantt,
                             solve_out_svg, solve_out_csv);
        }
        if (tr->parsed()) {
            TrainConfig config;
            if (!train_config_path.empty()) config = train_config_from_file(train_config_path);
            std::string merged;
            for (const std::string& kv : overrides) merged += kv + "\n";
            if (!merged.empty()) {
                // Overrides win: apply them on top of the file config.
                TrainConfig base = config;
                std::string full = train_config_to_string(base) + merged;
                config = train_config_from_string(full);
            }
            if (train_threads > 0) config.threads = train_threads;
            else if (config.threads <= 1) config.threads = default_threads();
            TrainHandle handle = train(config, resume_path);
            std::cout << train_report_csv(handle.report);
            std::cout << "best validation mean makespan " << handle.report.best_validation
                      << " at epoch " << handle.report.best_epoch << "\n";
            return kExitOk;
        }
        if (bench->parsed()) {
            if (bench_choice.rule.empty() && bench_choice.checkpoint.empty()) {
                throw ConfigError("bench: pass --rule or --checkpoint");
            }
            return run_bench(bench_choice, bench_dir, bench_refs, bench_out,
                             bench_threads > 0 ? bench_threads : default_threads());
        }
        if (gantt->parsed()) {
            return run_gantt(gantt_schedule, gantt_machines, gantt_svg_out, gantt_json_out);
        }
        throw ConfigError("no subcommand given");
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInvariant;
    }
}

}  // namespace flexsched
