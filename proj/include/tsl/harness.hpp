#ifndef TSL_HARNESS_HPP
#define TSL_HARNESS_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tsl/agent.hpp"
#include "tsl/control.hpp"
#include "tsl/scenario.hpp"
#include "tsl/simcore.hpp"
#include "tsl/stats.hpp"

namespace tsl {

// --- method selection ---

struct MethodSpec {
    enum class Kind { Static, StaticBest, Webster, MaxPressure, Actuated, Dqn };
    Kind kind = Kind::Static;
    int plan_index = 3;          // Static
    std::string checkpoint_path; // Dqn
    std::string label;           // as given on the command line
};

// Parses `static:<k>`, `static:best`, `webster`, `maxpressure`, `actuated`,
// `dqn:<checkpoint-path>`. Throws std::invalid_argument otherwise.
MethodSpec parse_method(const std::string &text);

// --- shared run loop ---

struct MonitorRow {
    std::uint64_t cycle = 0;
    int intersection = 0;
    int action = -1; // committed plan index, -1 for acyclic controllers
    double reward = 0.0;
    int active_vehicles = 0;
    double mean_speed = 0.0;
};

struct PlanRow {
    std::uint64_t cycle = 0;
    int intersection = 0;
    int plan_index = -1;
    double split1 = 0.0;
    double split2 = 0.0;
};

struct RunArtifacts {
    std::vector<MonitorRow> monitor;
    std::vector<PlanRow> plans;
    std::vector<TripRecord> trips;
    std::vector<std::string> events; // line-delimited JSON (teleports)
    std::int64_t teleport_events = 0;
    std::int64_t teleport_removed = 0;
    std::int64_t injected = 0;
    int leftover_active = 0;
    std::uint64_t seed = 0;
};

struct RunLimits {
    // teleport events in any 10-cycle window beyond this abort the run
    int max_teleports_per_10_cycles = 50;
};

// Advances `cycles` full cycles, driving the controllers and collecting the
// per-cycle monitor stream. `on_cycle_end(c, w_raw)` sees the raw per-phase
// stopped averages of every intersection for cycle c.
using CycleHook = std::function<void(std::uint64_t cycle, const std::vector<std::array<double, 2>> &w_raw)>;

RunArtifacts run_cycles(Engine &engine, std::vector<std::unique_ptr<Controller>> &controllers, int cycles,
                        const RunLimits &limits = {}, const CycleHook &on_cycle_end = {});

// The agent-facing state of one intersection for the just-completed cycle:
// per-phase stopped averages normalized by the phase's inbound lane count.
std::array<double, 2> observe_state(const Engine &engine, int intersection);
std::array<double, 2> normalize_state(const Engine &engine, int intersection, const std::array<double, 2> &w_raw);

// --- training ---

struct TrainRunConfig {
    std::uint64_t seed = 1;
    int cycles = 1000;
    DqnHyperParams hyper;
    double demand_scale = 1.0;
    RunLimits limits;
};

struct TrainResult {
    std::vector<std::unique_ptr<DqnAgent>> agents; // one per intersection
    RunArtifacts artifacts;
    std::string checkpoint_json; // all agents, one document
};

TrainResult train(const Scenario &scenario, const TrainRunConfig &config);

// multi-agent checkpoint document helpers
std::string agents_checkpoint_json(const std::vector<std::unique_ptr<DqnAgent>> &agents, std::uint64_t seed,
                                   std::int64_t cycles);
std::vector<std::unique_ptr<DqnAgent>> agents_from_checkpoint_json(const std::string &text);
std::vector<std::unique_ptr<DqnAgent>> load_checkpoint_file(const std::string &path);

// --- evaluation ---

struct EvalConfig {
    std::uint64_t base_seed = 1;
    int rollouts = 10;
    int warmup_cycles = 50;
    int eval_cycles = 500;
    double demand_scale = 1.0;
    int threads = 0; // 0 = hardware concurrency
    RunLimits limits;
};

struct RolloutSummary {
    std::uint64_t seed = 0;
    int trips = 0;
    double travel_mean = 0.0;
    double waiting_mean = 0.0;
    double speed_mean = 0.0;
};

struct EvalResult {
    std::string method;
    std::vector<RolloutSummary> rollouts;
    std::vector<RunArtifacts> raw; // aligned with rollouts
    // pooled per-trip statistics across all rollouts (warmup excluded)
    DescriptiveStats travel, waiting, speed;
    int pooled_trips = 0;
    int leftover_active = 0;
};

// Builds controllers for `method` and runs one rollout per derived eval seed.
// The same config yields the same seed set for every method.
EvalResult evaluate(const Scenario &scenario, const MethodSpec &method, const EvalConfig &config);

// --- static sweep ---

struct SweepResult {
    int best_plan = 3;
    std::vector<EvalResult> per_plan; // index = plan
    std::vector<bool> tied_with_best; // Tukey CI over per-rollout travel means includes 0
};

SweepResult sweep_static(const Scenario &scenario, const EvalConfig &config);

// --- demand calibration ---

struct CalibrateConfig {
    std::uint64_t seed = 1;
    int horizon_cycles = 100;
    double target_queue_fraction = 0.4; // per-lane mean queue / capacity bound
    double scale_upper_limit = 64.0;
};

// True when static:3 keeps the network teleport-free with every lane's mean
// queue below the target fraction of its capacity.
bool demand_criterion(const Scenario &scenario, double scale, const CalibrateConfig &config);

// Largest demand scale (by bisection) still satisfying demand_criterion.
double calibrate_demand(const Scenario &scenario, const CalibrateConfig &config);

// --- comparison pipeline (the Tables 1-2 analogue) ---

struct CompareConfig {
    EvalConfig eval;
    double tukey_alpha = 0.05;
};

struct CompareOutput {
    std::vector<EvalResult> results;         // one per method, input order
    std::optional<SweepResult> sweep;        // present when static:best was requested
    bool stats_emitted = false;
    std::string notice;                      // set when stats were skipped
};

// Evaluates every method on the shared seed set and writes summary.csv,
// anova.json, tukey.csv and kde_<metric>.csv under `out_dir`.
CompareOutput compare_methods(const Scenario &scenario, const std::vector<MethodSpec> &methods,
                              const CompareConfig &config, const std::string &out_dir);

// --- artifact IO ---

void ensure_dir(const std::string &path);
void write_trips_csv(const std::string &path, const std::vector<TripRecord> &trips);
void write_monitor_csv(const std::string &path, const std::vector<MonitorRow> &rows);
// writes <path_prefix>_i<N>.csv per intersection
void write_plans_csv(const std::string &path_prefix, const std::vector<PlanRow> &rows);
std::string format_double(double v);

// controller factory shared by evaluate/compare and the CLI
std::unique_ptr<Controller> make_controller(const MethodSpec &method, const Engine &engine, int intersection,
                                            const std::vector<std::unique_ptr<DqnAgent>> *agents);

} // namespace tsl

#endif
