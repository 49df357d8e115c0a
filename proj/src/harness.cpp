#include "tsl/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "tsl/errors.hpp"

namespace tsl {

using nlohmann::json;

// --- method parsing ---

MethodSpec parse_method(const std::string &text) {
    MethodSpec m;
    m.label = text;
    if (text == "webster") {
        m.kind = MethodSpec::Kind::Webster;
    } else if (text == "maxpressure") {
        m.kind = MethodSpec::Kind::MaxPressure;
    } else if (text == "actuated") {
        m.kind = MethodSpec::Kind::Actuated;
    } else if (text.rfind("static:", 0) == 0) {
        std::string arg = text.substr(7);
        if (arg == "best") {
            m.kind = MethodSpec::Kind::StaticBest;
        } else {
            m.kind = MethodSpec::Kind::Static;
            std::size_t used = 0;
            int k = -1;
            try {
                k = std::stoi(arg, &used);
            } catch (const std::exception &) {
                throw std::invalid_argument("bad static plan index: " + arg);
            }
            if (used != arg.size() || k < 0 || k > 6)
                throw std::invalid_argument("static plan index must be 0..6 or 'best': " + arg);
            m.plan_index = k;
        }
    } else if (text.rfind("dqn:", 0) == 0) {
        m.kind = MethodSpec::Kind::Dqn;
        m.checkpoint_path = text.substr(4);
        if (m.checkpoint_path.empty()) throw std::invalid_argument("dqn method needs a checkpoint path");
    } else {
        throw std::invalid_argument("unknown method: " + text +
                                    " (expected static:<k>, static:best, webster, maxpressure, actuated, dqn:<path>)");
    }
    return m;
}

// --- controller factory ---

std::unique_ptr<Controller> make_controller(const MethodSpec &method, const Engine &engine, int intersection,
                                            const std::vector<std::unique_ptr<DqnAgent>> *agents) {
    switch (method.kind) {
    case MethodSpec::Kind::Static:
        return std::make_unique<StaticController>(method.plan_index);
    case MethodSpec::Kind::Webster:
        return std::make_unique<WebsterController>(engine, intersection);
    case MethodSpec::Kind::MaxPressure:
        return std::make_unique<MaxPressureController>(engine, intersection);
    case MethodSpec::Kind::Actuated:
        return std::make_unique<ActuatedController>(engine, intersection);
    case MethodSpec::Kind::Dqn: {
        if (!agents || intersection >= static_cast<int>(agents->size()))
            throw std::invalid_argument("dqn controller needs a loaded checkpoint for every intersection");
        const QNetwork *net = &(*agents)[intersection]->net();
        std::array<double, 2> lanes = {
            static_cast<double>(std::max(1, engine.inbound_lane_count(intersection, 0))),
            static_cast<double>(std::max(1, engine.inbound_lane_count(intersection, 1)))};
        auto chooser = [net, lanes](std::uint64_t, const std::array<double, 2> &prev_w) {
            std::array<double, 2> s = {prev_w[0] / lanes[0], prev_w[1] / lanes[1]};
            return net->argmax_q(s);
        };
        return std::make_unique<CyclicAgentController>("dqn", chooser);
    }
    case MethodSpec::Kind::StaticBest:
        throw std::logic_error("static:best must be resolved through sweep_static first");
    }
    throw std::logic_error("unreachable method kind");
}

// --- shared run loop ---

std::array<double, 2> normalize_state(const Engine &engine, int intersection, const std::array<double, 2> &w_raw) {
    return {w_raw[0] / std::max(1, engine.inbound_lane_count(intersection, 0)),
            w_raw[1] / std::max(1, engine.inbound_lane_count(intersection, 1))};
}

std::array<double, 2> observe_state(const Engine &engine, int intersection) {
    return normalize_state(engine, intersection, engine.cumulative_stopped_pair(intersection));
}

RunArtifacts run_cycles(Engine &engine, std::vector<std::unique_ptr<Controller>> &controllers, int cycles,
                        const RunLimits &limits, const CycleHook &on_cycle_end) {
    int n_i = engine.intersection_count();
    if (static_cast<int>(controllers.size()) != n_i)
        throw std::invalid_argument("need exactly one controller per intersection");

    RunArtifacts out;
    engine.set_trace([&out, &engine](const TraceEvent &ev) {
        if (ev.kind != TraceEvent::Kind::Teleport && ev.kind != TraceEvent::Kind::TeleportRemoved) return;
        json line = {{"t", ev.t},
                     {"type", ev.kind == TraceEvent::Kind::Teleport ? "teleport" : "teleport_removed"},
                     {"vehicle", ev.vehicle},
                     {"edge", engine.scenario().net.edges[ev.edge].id}};
        out.events.push_back(line.dump());
    });

    std::vector<std::array<double, 2>> prev_w(n_i, {0.0, 0.0});
    std::deque<std::int64_t> teleport_window;
    std::int64_t teleports_at_cycle_start = engine.teleport_event_count();
    // all intersections share one cycle grid; plan swaps go through the clock
    // so the boundary-only contract is enforced at runtime
    std::vector<CycleClock> clocks(n_i, CycleClock{SignalTiming{engine.cycle_len(), 3}});

    for (std::uint64_t c = 0; c < static_cast<std::uint64_t>(cycles); ++c) {
        for (int i = 0; i < n_i; ++i) controllers[i]->on_cycle_start(c, prev_w[i]);
        for (int i = 0; i < n_i; ++i)
            if (const SignalPlan *p = controllers[i]->committed_plan()) {
                clocks[i].commit_plan(*p);
                out.plans.push_back({c, i, p->index, p->splits.phase1, p->splits.phase2});
            }

        for (int t = 0; t < engine.cycle_len(); ++t) {
            SignalView view;
            view.phase_colors.resize(n_i);
            std::int64_t tick = engine.clock();
            for (int i = 0; i < n_i; ++i) view.phase_colors[i] = controllers[i]->colors(tick);
            engine.step(view);
            engine.resolve_gridlock();
            for (int i = 0; i < n_i; ++i) {
                controllers[i]->observe_tick(engine);
                clocks[i].advance();
            }
        }

        std::vector<std::array<double, 2>> w(n_i);
        for (int i = 0; i < n_i; ++i) w[i] = engine.cumulative_stopped_pair(i);
        for (int i = 0; i < n_i; ++i) {
            const SignalPlan *p = controllers[i]->committed_plan();
            out.monitor.push_back({c, i, p ? p->index : -1, reward_from_state(w[i]), engine.active_count(),
                                   engine.window_mean_speed()});
        }
        if (on_cycle_end) on_cycle_end(c, w);
        engine.reset_cycle_window();
        prev_w = std::move(w);

        std::int64_t now = engine.teleport_event_count();
        teleport_window.push_back(now - teleports_at_cycle_start);
        teleports_at_cycle_start = now;
        if (teleport_window.size() > 10) teleport_window.pop_front();
        std::int64_t recent = 0;
        for (std::int64_t v : teleport_window) recent += v;
        if (recent > limits.max_teleports_per_10_cycles)
            throw std::runtime_error("persistent gridlock: " + std::to_string(recent) +
                                     " teleports within 10 cycles (limit " +
                                     std::to_string(limits.max_teleports_per_10_cycles) + ") at cycle " +
                                     std::to_string(c));
    }

    engine.set_trace({});
    out.trips = engine.trips();
    out.teleport_events = engine.teleport_event_count();
    out.teleport_removed = engine.teleport_removed_count();
    out.injected = engine.injected_count();
    out.leftover_active = engine.active_count();
    return out;
}

// --- training ---

TrainResult train(const Scenario &scenario, const TrainRunConfig &config) {
    if (config.cycles < config.hyper.warmup)
        throw std::invalid_argument("training cycles (" + std::to_string(config.cycles) +
                                    ") below replay warmup (" + std::to_string(config.hyper.warmup) + ")");

    Engine engine(scenario, config.seed, config.demand_scale);
    int n_i = engine.intersection_count();
    if (n_i == 0) throw std::invalid_argument("scenario has no signalized intersection to train on");

    TrainResult result;
    for (int i = 0; i < n_i; ++i)
        result.agents.push_back(std::make_unique<DqnAgent>(config.hyper, splitmix64(config.seed) + i));

    std::vector<std::array<double, 2>> lane_norm(n_i);
    for (int i = 0; i < n_i; ++i)
        lane_norm[i] = {static_cast<double>(std::max(1, engine.inbound_lane_count(i, 0))),
                        static_cast<double>(std::max(1, engine.inbound_lane_count(i, 1)))};

    std::vector<std::array<double, 2>> last_state(n_i, {0.0, 0.0});
    std::vector<int> last_action(n_i, 3);

    std::vector<std::unique_ptr<Controller>> controllers;
    for (int i = 0; i < n_i; ++i) {
        DqnAgent *agent = result.agents[i].get();
        auto chooser = [agent, i, &lane_norm, &last_state, &last_action, &config](
                           std::uint64_t cycle, const std::array<double, 2> &prev_w) {
            std::array<double, 2> s = {prev_w[0] / lane_norm[i][0], prev_w[1] / lane_norm[i][1]};
            double eps = agent->epsilon_at(static_cast<std::int64_t>(cycle), config.cycles);
            int a = agent->select(s, eps);
            last_state[i] = s;
            last_action[i] = a;
            return a;
        };
        controllers.push_back(std::make_unique<CyclicAgentController>("dqn-train", chooser));
    }

    auto hook = [&](std::uint64_t, const std::vector<std::array<double, 2>> &w_raw) {
        for (int i = 0; i < n_i; ++i) {
            MdpStep step;
            step.state = last_state[i];
            step.action = last_action[i];
            step.reward = reward_from_state(w_raw[i]);
            step.next_state = {w_raw[i][0] / lane_norm[i][0], w_raw[i][1] / lane_norm[i][1]};
            result.agents[i]->train_step(step);
        }
    };

    result.artifacts = run_cycles(engine, controllers, config.cycles, config.limits, hook);
    result.artifacts.seed = config.seed;
    result.checkpoint_json = agents_checkpoint_json(result.agents, config.seed, config.cycles);
    return result;
}

std::string agents_checkpoint_json(const std::vector<std::unique_ptr<DqnAgent>> &agents, std::uint64_t seed,
                                   std::int64_t cycles) {
    json doc;
    doc["schema"] = 1;
    doc["seed"] = seed;
    doc["cycles_trained"] = cycles;
    json list = json::array();
    for (std::size_t i = 0; i < agents.size(); ++i) {
        json a = json::parse(agents[i]->to_checkpoint_json(seed, cycles));
        a["intersection"] = i;
        list.push_back(std::move(a));
    }
    doc["agents"] = std::move(list);
    return doc.dump(2);
}

std::vector<std::unique_ptr<DqnAgent>> agents_from_checkpoint_json(const std::string &text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception &e) {
        throw ParseError(std::string("invalid checkpoint JSON: ") + e.what());
    }
    if (!doc.contains("schema") || doc["schema"].get<int>() != 1) throw ParseError("unsupported checkpoint schema");
    std::vector<std::unique_ptr<DqnAgent>> agents;
    for (const json &a : doc.at("agents"))
        agents.push_back(std::make_unique<DqnAgent>(DqnAgent::from_checkpoint_json(a.dump())));
    if (agents.empty()) throw ParseError("checkpoint contains no agents");
    return agents;
}

std::vector<std::unique_ptr<DqnAgent>> load_checkpoint_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open checkpoint file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return agents_from_checkpoint_json(text);
}

// --- evaluation ---

namespace {

struct FilteredTrips {
    std::vector<double> travel, waiting, speed;
};

FilteredTrips filter_trips(const RunArtifacts &artifacts, int warmup_cycles, int cycle_s) {
    FilteredTrips f;
    std::int64_t start = static_cast<std::int64_t>(warmup_cycles) * cycle_s;
    for (const TripRecord &t : artifacts.trips) {
        if (t.teleported || t.entry_s < start) continue;
        f.travel.push_back(static_cast<double>(t.travel_s));
        f.waiting.push_back(static_cast<double>(t.waiting_s));
        f.speed.push_back(t.speed_mps);
    }
    return f;
}

DescriptiveStats pooled_or_zero(const std::vector<double> &xs) {
    if (xs.size() < 2) return {xs.empty() ? 0.0 : xs.front(), 0.0};
    return descriptive(xs);
}

void run_indexed(int jobs, int threads, const std::function<void(int)> &fn) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, jobs));
    if (threads == 1) {
        for (int j = 0; j < jobs; ++j) fn(j);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (int j = w; j < jobs; j += threads) fn(j);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto &t : pool) t.join();
    for (auto &e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace

EvalResult evaluate(const Scenario &scenario, const MethodSpec &method, const EvalConfig &config) {
    if (method.kind == MethodSpec::Kind::StaticBest) {
        SweepResult sweep = sweep_static(scenario, config);
        EvalResult best = sweep.per_plan[sweep.best_plan];
        best.method = "static:best";
        return best;
    }

    std::vector<std::unique_ptr<DqnAgent>> agents;
    if (method.kind == MethodSpec::Kind::Dqn) agents = load_checkpoint_file(method.checkpoint_path);

    EvalResult result;
    result.method = method.label.empty() ? "method" : method.label;
    result.rollouts.resize(config.rollouts);
    result.raw.resize(config.rollouts);

    run_indexed(config.rollouts, config.threads, [&](int r) {
        std::uint64_t seed = derive_seed(config.base_seed, SeedPurpose::Evaluation, static_cast<std::uint64_t>(r));
        Engine engine(scenario, seed, config.demand_scale);
        if (method.kind == MethodSpec::Kind::Dqn &&
            static_cast<int>(agents.size()) != engine.intersection_count())
            throw std::invalid_argument("checkpoint agent count does not match scenario intersections");
        std::vector<std::unique_ptr<Controller>> controllers;
        for (int i = 0; i < engine.intersection_count(); ++i)
            controllers.push_back(make_controller(method, engine, i, &agents));
        RunArtifacts art = run_cycles(engine, controllers, config.warmup_cycles + config.eval_cycles, config.limits);
        art.seed = seed;
        FilteredTrips f = filter_trips(art, config.warmup_cycles, scenario.timing.cycle_s);
        RolloutSummary s;
        s.seed = seed;
        s.trips = static_cast<int>(f.travel.size());
        s.travel_mean = f.travel.empty() ? 0.0 : sample_mean(f.travel);
        s.waiting_mean = f.waiting.empty() ? 0.0 : sample_mean(f.waiting);
        s.speed_mean = f.speed.empty() ? 0.0 : sample_mean(f.speed);
        result.rollouts[r] = s;
        result.raw[r] = std::move(art);
    });

    FilteredTrips pooled;
    for (const RunArtifacts &art : result.raw) {
        FilteredTrips f = filter_trips(art, config.warmup_cycles, scenario.timing.cycle_s);
        pooled.travel.insert(pooled.travel.end(), f.travel.begin(), f.travel.end());
        pooled.waiting.insert(pooled.waiting.end(), f.waiting.begin(), f.waiting.end());
        pooled.speed.insert(pooled.speed.end(), f.speed.begin(), f.speed.end());
        result.leftover_active += art.leftover_active;
    }
    result.pooled_trips = static_cast<int>(pooled.travel.size());
    result.travel = pooled_or_zero(pooled.travel);
    result.waiting = pooled_or_zero(pooled.waiting);
    result.speed = pooled_or_zero(pooled.speed);
    return result;
}

// --- static sweep ---

SweepResult sweep_static(const Scenario &scenario, const EvalConfig &config) {
    SweepResult out;
    out.per_plan.reserve(7);
    for (int k = 0; k < 7; ++k) {
        MethodSpec m;
        m.kind = MethodSpec::Kind::Static;
        m.plan_index = k;
        m.label = "static:" + std::to_string(k);
        out.per_plan.push_back(evaluate(scenario, m, config));
    }
    out.best_plan = 0;
    for (int k = 1; k < 7; ++k)
        if (out.per_plan[k].travel.mean < out.per_plan[out.best_plan].travel.mean) out.best_plan = k;

    out.tied_with_best.assign(7, false);
    out.tied_with_best[out.best_plan] = true;
    if (config.rollouts >= 2) {
        std::vector<SampleGroup> groups;
        for (int k = 0; k < 7; ++k) {
            SampleGroup g;
            g.label = "static:" + std::to_string(k);
            for (const RolloutSummary &r : out.per_plan[k].rollouts) g.samples.push_back(r.travel_mean);
            groups.push_back(std::move(g));
        }
        TukeyResult tukey = tukey_hsd(groups);
        for (const TukeyRow &row : tukey.rows) {
            std::string best_label = "static:" + std::to_string(out.best_plan);
            if (row.group_a != best_label && row.group_b != best_label) continue;
            if (row.significant) continue;
            const std::string &other = row.group_a == best_label ? row.group_b : row.group_a;
            out.tied_with_best[other.back() - '0'] = true;
        }
    }
    return out;
}

// --- calibration ---

bool demand_criterion(const Scenario &scenario, double scale, const CalibrateConfig &config) {
    Engine engine(scenario, derive_seed(config.seed, SeedPurpose::Calibration, 0), scale);
    std::vector<std::unique_ptr<Controller>> controllers;
    for (int i = 0; i < engine.intersection_count(); ++i) controllers.push_back(std::make_unique<StaticController>(3));
    RunLimits limits;
    limits.max_teleports_per_10_cycles = std::numeric_limits<int>::max(); // never abort while probing
    try {
        run_cycles(engine, controllers, config.horizon_cycles, limits);
    } catch (const std::runtime_error &) {
        return false;
    }
    if (engine.teleport_event_count() > 0) return false;
    double ticks = static_cast<double>(engine.clock());
    for (int l = 0; l < engine.lane_count(); ++l) {
        double mean_queue = static_cast<double>(engine.lane_queue_ticks(l)) / ticks;
        if (mean_queue > config.target_queue_fraction * engine.lane_capacity(l)) return false;
    }
    return true;
}

double calibrate_demand(const Scenario &scenario, const CalibrateConfig &config) {
    double lo = 0.0;
    double hi = 1.0;
    if (demand_criterion(scenario, hi, config)) {
        while (hi < config.scale_upper_limit && demand_criterion(scenario, hi * 2.0, config)) hi *= 2.0;
        lo = hi;
        hi *= 2.0;
        if (lo >= config.scale_upper_limit) return config.scale_upper_limit;
    }
    // invariant: criterion(lo) holds, criterion(hi) fails
    while (hi - lo > 0.05 * std::max(lo, 0.05)) {
        double mid = 0.5 * (lo + hi);
        (demand_criterion(scenario, mid, config) ? lo : hi) = mid;
    }
    return lo;
}

// --- file IO ---

void ensure_dir(const std::string &path) { std::filesystem::create_directories(path); }

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

void write_trips_csv(const std::string &path, const std::vector<TripRecord> &trips) {
    std::ofstream out(path);
    out << "vehicle_id,entry_s,exit_s,travel_s,waiting_s,speed_mps,teleported\n";
    for (const TripRecord &t : trips)
        out << t.vehicle_id << ',' << t.entry_s << ',' << t.exit_s << ',' << t.travel_s << ',' << t.waiting_s << ','
            << format_double(t.speed_mps) << ',' << (t.teleported ? 1 : 0) << '\n';
}

void write_monitor_csv(const std::string &path, const std::vector<MonitorRow> &rows) {
    std::ofstream out(path);
    out << "cycle,intersection,action,reward,active_vehicles,mean_speed\n";
    for (const MonitorRow &r : rows)
        out << r.cycle << ',' << r.intersection << ',' << r.action << ',' << format_double(r.reward) << ','
            << r.active_vehicles << ',' << format_double(r.mean_speed) << '\n';
}

void write_plans_csv(const std::string &path_prefix, const std::vector<PlanRow> &rows) {
    // one trace file per intersection
    int max_i = -1;
    for (const PlanRow &r : rows) max_i = std::max(max_i, r.intersection);
    for (int i = 0; i <= std::max(0, max_i); ++i) {
        std::ofstream out(path_prefix + "_i" + std::to_string(i) + ".csv");
        out << "cycle,plan_index,split1,split2\n";
        for (const PlanRow &r : rows)
            if (r.intersection == i)
                out << r.cycle << ',' << r.plan_index << ',' << format_double(r.split1) << ','
                    << format_double(r.split2) << '\n';
    }
}

// --- comparison pipeline ---

namespace {

std::string sanitize_label(const std::string &label) {
    std::string s;
    for (char c : label) s.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    return s;
}

void write_summary_csv(const std::string &path, const std::vector<EvalResult> &results) {
    std::ofstream out(path);
    out << "method,speed_mean,speed_std,waiting_mean,waiting_std,travel_mean,travel_std,trips,leftover_active\n";
    for (const EvalResult &r : results)
        out << r.method << ',' << format_double(r.speed.mean) << ',' << format_double(r.speed.stddev) << ','
            << format_double(r.waiting.mean) << ',' << format_double(r.waiting.stddev) << ','
            << format_double(r.travel.mean) << ',' << format_double(r.travel.stddev) << ',' << r.pooled_trips << ','
            << r.leftover_active << '\n';
}

std::vector<SampleGroup> metric_groups(const std::vector<EvalResult> &results,
                                       double RolloutSummary::*field) {
    std::vector<SampleGroup> groups;
    for (const EvalResult &r : results) {
        SampleGroup g;
        g.label = r.method;
        for (const RolloutSummary &s : r.rollouts) g.samples.push_back(s.*field);
        groups.push_back(std::move(g));
    }
    return groups;
}

} // namespace

CompareOutput compare_methods(const Scenario &scenario, const std::vector<MethodSpec> &methods,
                              const CompareConfig &config, const std::string &out_dir) {
    if (methods.empty()) throw std::invalid_argument("compare needs at least one method");
    ensure_dir(out_dir);

    CompareOutput out;
    for (const MethodSpec &m : methods) {
        if (m.kind == MethodSpec::Kind::StaticBest && !out.sweep) {
            out.sweep = sweep_static(scenario, config.eval);
            EvalResult best = out.sweep->per_plan[out.sweep->best_plan];
            best.method = "static:best";
            out.results.push_back(std::move(best));
        } else {
            out.results.push_back(evaluate(scenario, m, config.eval));
        }
    }

    // raw trip logs: every summary number is recomputable from these
    ensure_dir(out_dir + "/trips");
    for (const EvalResult &r : out.results)
        for (std::size_t k = 0; k < r.raw.size(); ++k)
            write_trips_csv(out_dir + "/trips/" + sanitize_label(r.method) + "_r" + std::to_string(k) + ".csv",
                            r.raw[k].trips);

    write_summary_csv(out_dir + "/summary.csv", out.results);

    if (out.sweep) {
        std::ofstream sw(out_dir + "/static_sweep.csv");
        sw << "plan,travel_mean,travel_std,waiting_mean,speed_mean,tied_with_best\n";
        for (int k = 0; k < 7; ++k) {
            const EvalResult &r = out.sweep->per_plan[k];
            sw << k << ',' << format_double(r.travel.mean) << ',' << format_double(r.travel.stddev) << ','
               << format_double(r.waiting.mean) << ',' << format_double(r.speed.mean) << ','
               << (out.sweep->tied_with_best[k] ? 1 : 0) << '\n';
        }
    }

    if (out.results.size() < 2 || config.eval.rollouts < 2) {
        out.notice = "statistical tests skipped: need at least 2 methods and 2 rollouts";
        return out;
    }

    const std::array<std::pair<const char *, double RolloutSummary::*>, 3> metrics = {
        std::make_pair("travel_time", &RolloutSummary::travel_mean),
        std::make_pair("waiting_time", &RolloutSummary::waiting_mean),
        std::make_pair("speed", &RolloutSummary::speed_mean)};

    json anova_doc;
    std::ofstream tukey_csv(out_dir + "/tukey.csv");
    tukey_csv << "metric,group_a,group_b,diff,ci_low,ci_high,significant\n";

    for (const auto &[name, field] : metrics) {
        std::vector<SampleGroup> groups = metric_groups(out.results, field);
        AnovaResult anova = anova_oneway(groups);
        AssumptionReport assumptions = check_assumptions(groups);
        anova_doc[name] = {{"f", anova.f},
                           {"df_between", anova.df_between},
                           {"df_within", anova.df_within},
                           {"p_value", anova.p},
                           {"degenerate", anova.degenerate},
                           {"assumptions",
                            {{"max_abs_skewness", assumptions.max_abs_skewness},
                             {"max_abs_excess_kurtosis", assumptions.max_abs_excess_kurtosis},
                             {"variance_ratio", assumptions.variance_ratio},
                             {"flagged", assumptions.flagged}}}};

        TukeyResult tukey = tukey_hsd(groups, config.tukey_alpha);
        for (const TukeyRow &row : tukey.rows)
            tukey_csv << name << ',' << row.group_a << ',' << row.group_b << ',' << format_double(row.diff) << ','
                      << format_double(row.ci_low) << ',' << format_double(row.ci_high) << ','
                      << (row.significant ? 1 : 0) << '\n';

        // per-method KDE of the rollout means on a shared grid
        bool kde_ok = true;
        double h_max = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
        std::vector<double> bandwidths;
        for (const SampleGroup &g : groups) {
            try {
                double h = silverman_bandwidth(g.samples);
                bandwidths.push_back(h);
                h_max = std::max(h_max, h);
            } catch (const std::invalid_argument &) {
                kde_ok = false;
                break;
            }
            lo = std::min(lo, *std::min_element(g.samples.begin(), g.samples.end()));
            hi = std::max(hi, *std::max_element(g.samples.begin(), g.samples.end()));
        }
        if (!kde_ok) {
            out.notice += std::string(name) + " KDE skipped (zero-spread sample); ";
            continue;
        }
        constexpr int kGridPoints = 201;
        std::vector<double> grid(kGridPoints);
        double a = lo - 3.0 * h_max, b = hi + 3.0 * h_max;
        for (int i = 0; i < kGridPoints; ++i) grid[i] = a + (b - a) * i / (kGridPoints - 1);
        std::ofstream kde_csv(out_dir + "/kde_" + name + ".csv");
        kde_csv << "value";
        for (const SampleGroup &g : groups) kde_csv << ',' << g.label;
        kde_csv << '\n';
        std::vector<std::vector<double>> densities;
        for (std::size_t gi = 0; gi < groups.size(); ++gi)
            densities.push_back(kde(groups[gi].samples, grid, bandwidths[gi]));
        for (int i = 0; i < kGridPoints; ++i) {
            kde_csv << format_double(grid[i]);
            for (const auto &d : densities) kde_csv << ',' << format_double(d[i]);
            kde_csv << '\n';
        }
    }

    std::ofstream(out_dir + "/anova.json") << anova_doc.dump(2) << '\n';
    out.stats_emitted = true;
    return out;
}

} // namespace tsl
