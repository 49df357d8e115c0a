#include "tsl/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsl/errors.hpp"
#include "tsl/harness.hpp"

namespace tsl {

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;
constexpr int kExitRuntime = 4;

std::string run_id(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d", index);
    return buf;
}

void write_lines(const std::string &path, const std::vector<std::string> &lines) {
    std::ofstream out(path);
    for (const std::string &l : lines) out << l << '\n';
}

json eval_config_json(const EvalConfig &cfg) {
    return {{"base_seed", cfg.base_seed},      {"rollouts", cfg.rollouts},
            {"warmup_cycles", cfg.warmup_cycles}, {"eval_cycles", cfg.eval_cycles},
            {"demand_scale", cfg.demand_scale},   {"threads", cfg.threads}};
}

int cmd_validate(const std::string &path, bool show_routes, bool as_json, std::ostream &out) {
    Scenario sc = load_scenario(path);
    if (as_json) {
        json doc = {{"scenario", sc.name},
                    {"nodes", sc.net.nodes.size()},
                    {"edges", sc.net.edges.size()},
                    {"intersections", sc.net.intersections.size()},
                    {"routes", sc.routes.size()},
                    {"entry_edges", sc.net.entry_edges()},
                    {"rate_per_lane_vps", sc.demand.rate_per_lane_vps}};
        out << doc.dump(2) << '\n';
    } else {
        out << "scenario " << sc.name << ": " << sc.net.nodes.size() << " nodes, " << sc.net.edges.size()
            << " edges, " << sc.net.intersections.size() << " intersections, " << sc.routes.size() << " routes\n";
    }
    if (show_routes) {
        out << "entry_edge,edges,turns,weight\n";
        for (const Route &r : sc.routes) {
            out << r.entry_edge() << ',';
            for (std::size_t i = 0; i < r.edges.size(); ++i) out << (i ? "|" : "") << r.edges[i];
            out << ',' << r.turns << ',' << format_double(r.weight) << '\n';
        }
    }
    return kExitOk;
}

void write_run_artifacts(const std::string &dir, const RunArtifacts &art, const std::string &checkpoint,
                         const json &config) {
    ensure_dir(dir);
    std::ofstream(dir + "/config.json") << config.dump(2) << '\n';
    write_monitor_csv(dir + "/monitor.csv", art.monitor);
    write_plans_csv(dir + "/plans", art.plans);
    write_trips_csv(dir + "/trips.csv", art.trips);
    write_lines(dir + "/events.jsonl", art.events);
    if (!checkpoint.empty()) std::ofstream(dir + "/checkpoint.json") << checkpoint << '\n';
}

int cmd_train(const std::string &scenario_path, int runs, int cycles, std::uint64_t base_seed, double demand_scale,
              int threads, const std::string &out_dir, bool as_json, std::ostream &out) {
    Scenario sc = load_scenario(scenario_path);
    json resolved = {{"command", "train"},       {"scenario", sc.name},   {"runs", runs},
                     {"cycles", cycles},         {"base_seed", base_seed}, {"demand_scale", demand_scale},
                     {"threads", threads},       {"out", out_dir}};
    out << (as_json ? resolved.dump() : "config: " + resolved.dump()) << '\n';

    ensure_dir(out_dir + "/runs");
    std::vector<TrainResult> results(runs);
    std::vector<std::exception_ptr> errors(runs);
    // runs are independent; fan them out over a small pool
    int pool = threads <= 0 ? static_cast<int>(std::thread::hardware_concurrency()) : threads;
    pool = std::max(1, std::min(pool, runs));
    std::vector<std::thread> workers;
    for (int w = 0; w < pool; ++w)
        workers.emplace_back([&, w]() {
            for (int r = w; r < runs; r += pool) {
                try {
                    TrainRunConfig cfg;
                    cfg.seed = derive_seed(base_seed, SeedPurpose::Training, static_cast<std::uint64_t>(r));
                    cfg.cycles = cycles;
                    cfg.demand_scale = demand_scale;
                    results[r] = train(sc, cfg);
                } catch (...) {
                    errors[r] = std::current_exception();
                }
            }
        });
    for (auto &t : workers) t.join();
    for (auto &e : errors)
        if (e) std::rethrow_exception(e);

    for (int r = 0; r < runs; ++r) {
        json cfg = resolved;
        cfg["run"] = r;
        cfg["seed"] = results[r].artifacts.seed;
        write_run_artifacts(out_dir + "/runs/" + run_id(r), results[r].artifacts, results[r].checkpoint_json, cfg);
    }
    if (as_json) {
        json done = {{"runs_completed", runs}, {"out", out_dir + "/runs"}};
        out << done.dump() << '\n';
    } else {
        out << "trained " << runs << " run(s) -> " << out_dir << "/runs\n";
    }
    return kExitOk;
}

json eval_result_json(const EvalResult &r) {
    return {{"method", r.method},
            {"trips", r.pooled_trips},
            {"travel_mean", r.travel.mean},
            {"travel_std", r.travel.stddev},
            {"waiting_mean", r.waiting.mean},
            {"waiting_std", r.waiting.stddev},
            {"speed_mean", r.speed.mean},
            {"speed_std", r.speed.stddev},
            {"leftover_active", r.leftover_active}};
}

int cmd_evaluate(const std::string &scenario_path, const std::string &method_text, const EvalConfig &eval_cfg,
                 const std::string &out_dir, bool as_json, std::ostream &out) {
    Scenario sc = load_scenario(scenario_path);
    MethodSpec method = parse_method(method_text);
    json resolved = {{"command", "evaluate"}, {"scenario", sc.name}, {"method", method_text},
                     {"eval", eval_config_json(eval_cfg)}, {"out", out_dir}};
    out << (as_json ? resolved.dump() : "config: " + resolved.dump()) << '\n';

    EvalResult result = evaluate(sc, method, eval_cfg);
    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        for (std::size_t k = 0; k < result.raw.size(); ++k) {
            std::string dir = out_dir + "/rollout_" + run_id(static_cast<int>(k));
            ensure_dir(dir);
            write_trips_csv(dir + "/trips.csv", result.raw[k].trips);
            write_monitor_csv(dir + "/monitor.csv", result.raw[k].monitor);
            write_plans_csv(dir + "/plans", result.raw[k].plans);
            write_lines(dir + "/events.jsonl", result.raw[k].events);
        }
    }
    out << (as_json ? eval_result_json(result).dump()
                    : result.method + ": travel " + format_double(result.travel.mean) + " +/- " +
                          format_double(result.travel.stddev) + " s over " + std::to_string(result.pooled_trips) +
                          " trips")
        << '\n';
    return kExitOk;
}

int cmd_compare(const std::string &scenario_path, const std::vector<std::string> &method_texts,
                const CompareConfig &cfg, const std::string &out_dir, bool as_json, std::ostream &out) {
    Scenario sc = load_scenario(scenario_path);
    std::vector<MethodSpec> methods;
    for (const std::string &m : method_texts) methods.push_back(parse_method(m));
    std::string report_dir = out_dir + "/report/" + sc.name;
    json resolved = {{"command", "compare"},
                     {"scenario", sc.name},
                     {"methods", method_texts},
                     {"eval", eval_config_json(cfg.eval)},
                     {"out", report_dir}};
    out << (as_json ? resolved.dump() : "config: " + resolved.dump()) << '\n';

    CompareOutput result = compare_methods(sc, methods, cfg, report_dir);
    if (!result.notice.empty()) out << "notice: " << result.notice << '\n';
    if (as_json) {
        json doc;
        doc["report_dir"] = report_dir;
        doc["stats_emitted"] = result.stats_emitted;
        for (const EvalResult &r : result.results) doc["methods"].push_back(eval_result_json(r));
        out << doc.dump() << '\n';
    } else {
        out << "method,travel_mean,travel_std,waiting_mean,waiting_std,speed_mean,speed_std\n";
        for (const EvalResult &r : result.results)
            out << r.method << ',' << format_double(r.travel.mean) << ',' << format_double(r.travel.stddev) << ','
                << format_double(r.waiting.mean) << ',' << format_double(r.waiting.stddev) << ','
                << format_double(r.speed.mean) << ',' << format_double(r.speed.stddev) << '\n';
        out << "report: " << report_dir << '\n';
    }
    return kExitOk;
}

int cmd_sweep(const std::string &scenario_path, const EvalConfig &eval_cfg, const std::string &out_dir, bool as_json,
              std::ostream &out) {
    Scenario sc = load_scenario(scenario_path);
    json resolved = {{"command", "sweep-static"}, {"scenario", sc.name}, {"eval", eval_config_json(eval_cfg)}};
    out << (as_json ? resolved.dump() : "config: " + resolved.dump()) << '\n';
    SweepResult sweep = sweep_static(sc, eval_cfg);
    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        std::ofstream sw(out_dir + "/static_sweep.csv");
        sw << "plan,travel_mean,travel_std,waiting_mean,speed_mean,tied_with_best\n";
        for (int k = 0; k < 7; ++k) {
            const EvalResult &r = sweep.per_plan[k];
            sw << k << ',' << format_double(r.travel.mean) << ',' << format_double(r.travel.stddev) << ','
               << format_double(r.waiting.mean) << ',' << format_double(r.speed.mean) << ','
               << (sweep.tied_with_best[k] ? 1 : 0) << '\n';
        }
    }
    if (as_json) {
        json doc = {{"best_plan", sweep.best_plan}};
        for (int k = 0; k < 7; ++k)
            doc["plans"].push_back({{"plan", k},
                                    {"travel_mean", sweep.per_plan[k].travel.mean},
                                    {"tied_with_best", sweep.tied_with_best[k]}});
        out << doc.dump() << '\n';
    } else {
        out << "plan,travel_mean,tied_with_best\n";
        for (int k = 0; k < 7; ++k)
            out << k << ',' << format_double(sweep.per_plan[k].travel.mean) << ','
                << (sweep.tied_with_best[k] ? 1 : 0) << '\n';
        out << "best: static:" << sweep.best_plan << '\n';
    }
    return kExitOk;
}

int cmd_calibrate(const std::string &scenario_path, const CalibrateConfig &cfg, bool as_json, std::ostream &out) {
    Scenario sc = load_scenario(scenario_path);
    json resolved = {{"command", "calibrate"},
                     {"scenario", sc.name},
                     {"seed", cfg.seed},
                     {"horizon_cycles", cfg.horizon_cycles},
                     {"target_queue_fraction", cfg.target_queue_fraction}};
    out << (as_json ? resolved.dump() : "config: " + resolved.dump()) << '\n';
    double scale = calibrate_demand(sc, cfg);
    if (as_json)
        out << json{{"demand_scale", scale}, {"rate_per_lane_vps", sc.demand.rate_per_lane_vps * scale}}.dump()
            << '\n';
    else
        out << "demand_scale: " << format_double(scale) << " (rate_per_lane_vps "
            << format_double(sc.demand.rate_per_lane_vps * scale) << ")\n";
    return kExitOk;
}

} // namespace

int cli_main(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"traffic signal control laboratory"};
    app.require_subcommand(1);

    std::uint64_t seed = 1;
    std::string out_dir = "out";
    bool as_json = false;
    app.add_option("--seed", seed, "base experiment seed");
    app.add_option("--out", out_dir, "output directory");
    app.add_flag("--json", as_json, "machine-readable stdout");

    std::string scenario_path;
    bool show_routes = false;
    auto *validate = app.add_subcommand("validate", "validate a scenario file");
    validate->add_option("scenario", scenario_path)->required();
    validate->add_flag("--routes", show_routes, "print the weighted route table");

    int train_runs = 10, train_cycles = 1000, threads = 0;
    double demand_scale = 1.0;
    auto *train_cmd = app.add_subcommand("train", "run seeded training runs");
    train_cmd->add_option("scenario", scenario_path)->required();
    train_cmd->add_option("--seeds", train_runs, "number of independent runs (paper-faithful: 30)")->check(CLI::PositiveNumber);
    train_cmd->add_option("--cycles", train_cycles, "training cycles per run");
    train_cmd->add_option("--demand-scale", demand_scale);
    train_cmd->add_option("--threads", threads);

    std::string method_text = "static:3";
    int rollouts = 10, warmup_cycles = 50, eval_cycles = 500;
    auto *eval_cmd = app.add_subcommand("evaluate", "evaluate one controller");
    eval_cmd->add_option("scenario", scenario_path)->required();
    eval_cmd->add_option("--method", method_text)->required();
    eval_cmd->add_option("--eval-seeds", rollouts)->check(CLI::PositiveNumber);
    eval_cmd->add_option("--warmup-cycles", warmup_cycles);
    eval_cmd->add_option("--eval-cycles", eval_cycles);
    eval_cmd->add_option("--demand-scale", demand_scale);
    eval_cmd->add_option("--threads", threads);

    std::vector<std::string> method_texts;
    auto *compare_cmd = app.add_subcommand("compare", "evaluate methods on a shared seed set and test differences");
    compare_cmd->add_option("scenario", scenario_path)->required();
    compare_cmd->add_option("--methods", method_texts, "comma-separated method list")->required()->delimiter(',');
    compare_cmd->add_option("--eval-seeds", rollouts)->check(CLI::PositiveNumber);
    compare_cmd->add_option("--warmup-cycles", warmup_cycles);
    compare_cmd->add_option("--eval-cycles", eval_cycles);
    compare_cmd->add_option("--demand-scale", demand_scale);
    compare_cmd->add_option("--threads", threads);

    auto *sweep_cmd = app.add_subcommand("sweep-static", "evaluate all 7 static plans");
    sweep_cmd->add_option("scenario", scenario_path)->required();
    sweep_cmd->add_option("--eval-seeds", rollouts)->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--warmup-cycles", warmup_cycles);
    sweep_cmd->add_option("--eval-cycles", eval_cycles);
    sweep_cmd->add_option("--demand-scale", demand_scale);
    sweep_cmd->add_option("--threads", threads);

    int horizon_cycles = 100;
    double target_queue_fraction = 0.4;
    auto *calibrate_cmd = app.add_subcommand("calibrate", "find the largest sub-saturated demand scale");
    calibrate_cmd->add_option("scenario", scenario_path)->required();
    calibrate_cmd->add_option("--horizon-cycles", horizon_cycles);
    calibrate_cmd->add_option("--target", target_queue_fraction);

    std::vector<const char *> argv;
    argv.push_back("tsl");
    for (const std::string &a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp &) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError &e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    }

    EvalConfig eval_cfg;
    eval_cfg.base_seed = seed;
    eval_cfg.rollouts = rollouts;
    eval_cfg.warmup_cycles = warmup_cycles;
    eval_cfg.eval_cycles = eval_cycles;
    eval_cfg.demand_scale = demand_scale;
    eval_cfg.threads = threads;

    try {
        if (validate->parsed()) return cmd_validate(scenario_path, show_routes, as_json, out);
        if (train_cmd->parsed())
            return cmd_train(scenario_path, train_runs, train_cycles, seed, demand_scale, threads, out_dir, as_json,
                             out);
        if (eval_cmd->parsed()) return cmd_evaluate(scenario_path, method_text, eval_cfg, out_dir, as_json, out);
        if (compare_cmd->parsed()) {
            CompareConfig cfg;
            cfg.eval = eval_cfg;
            return cmd_compare(scenario_path, method_texts, cfg, out_dir, as_json, out);
        }
        if (sweep_cmd->parsed()) return cmd_sweep(scenario_path, eval_cfg, out_dir, as_json, out);
        if (calibrate_cmd->parsed()) {
            CalibrateConfig cfg;
            cfg.seed = seed;
            cfg.horizon_cycles = horizon_cycles;
            cfg.target_queue_fraction = target_queue_fraction;
            return cmd_calibrate(scenario_path, cfg, as_json, out);
        }
        err << "usage error: no subcommand\n";
        return kExitUsage;
    } catch (const ParseError &e) {
        err << "scenario error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const ValidationError &e) {
        err << "validation error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::invalid_argument &e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception &e) {
        err << "runtime error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

} // namespace tsl
