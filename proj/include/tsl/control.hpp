#ifndef TSL_CONTROL_HPP
#define TSL_CONTROL_HPP

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tsl/signal.hpp"
#include "tsl/simcore.hpp"

namespace tsl {

// A controller owns the signal of one intersection. colors() is queried
// before each tick; observe_tick() runs after the engine advanced, so
// controllers see the arrivals and queues of the tick just completed.
// on_cycle_start() fires at shared cycle boundaries with the previous
// cycle's per-phase stopped averages (zeros for the first cycle).
class Controller {
public:
    virtual ~Controller() = default;
    virtual std::string name() const = 0;
    virtual void on_cycle_start(std::uint64_t /*cycle*/, const std::array<double, 2> & /*prev_w*/) {}
    virtual std::array<Color, 2> colors(std::int64_t tick) = 0;
    virtual void observe_tick(const Engine & /*eng*/) {}
    // non-null for cyclic controllers; used for the plan trace
    virtual const SignalPlan *committed_plan() const { return nullptr; }
};

// --- static ---

class StaticController : public Controller {
public:
    explicit StaticController(int plan_index);
    std::string name() const override { return "static:" + std::to_string(plan_.index); }
    std::array<Color, 2> colors(std::int64_t tick) override;
    const SignalPlan *committed_plan() const override { return &plan_; }

private:
    SignalPlan plan_;
};

// --- Webster split rule ---

// Equisaturation splits from per-phase flow ratios y_p, clamped to the plan
// space's [0.30, 0.70] band. All-zero flows fall back to an even split.
PhaseSplits webster_splits(const std::array<double, 2> &flow_ratios);

constexpr double kWebsterMinSplit = 0.30;
constexpr double kWebsterMaxSplit = 0.70;
constexpr int kWebsterRecomputeCycles = 5;
constexpr int kWebsterHorizonS = 300;

class WebsterController : public Controller {
public:
    WebsterController(const Engine &eng, int intersection);
    std::string name() const override { return "webster"; }
    void on_cycle_start(std::uint64_t cycle, const std::array<double, 2> &prev_w) override;
    std::array<Color, 2> colors(std::int64_t tick) override;
    void observe_tick(const Engine &eng) override;
    const SignalPlan *committed_plan() const override { return &plan_; }

    // testable core: flow ratios from the current rolling window
    std::array<double, 2> flow_ratios() const;

private:
    int intersection_;
    std::vector<int> lanes_;            // global lane indices inbound to this intersection
    std::vector<int> lane_phase_mask_;  // aligned with lanes_
    std::deque<std::vector<int>> window_; // per-tick per-lane join counts
    std::vector<long> window_sums_;
    SignalPlan plan_ = {3, {0.50, 0.50}};
};

// --- Max-Pressure ---

// Argmax of per-phase pressure; ties keep the current phase, otherwise the
// lower index wins.
int max_pressure_select(const std::array<double, 2> &pressure, int current_phase);

constexpr int kMaxPressureSlotS = 10;
constexpr int kMaxPressureYellowS = 3;

class MaxPressureController : public Controller {
public:
    MaxPressureController(const Engine &eng, int intersection);
    std::string name() const override { return "maxpressure"; }
    std::array<Color, 2> colors(std::int64_t tick) override;
    void observe_tick(const Engine &eng) override;

    // testable core: advance one second with the given pressures
    void advance(const std::array<double, 2> &pressure);
    int serving() const { return serving_; }
    std::array<double, 2> pressures(const Engine &eng) const;

private:
    int intersection_;
    int serving_ = 0;
    int green_elapsed_ = 0;
    int yellow_left_ = 0;
    int pending_ = -1;
};

// --- actuated ---

struct ActuatedParams {
    int min_green_s = 10;
    int gap_s = 3; // matches the yellow; arrivals this soon after a gap-out resume green
    int extension_s = 2;
    int max_green_s = 42;
    int yellow_s = 3;
};

class ActuatedController : public Controller {
public:
    explicit ActuatedController(const Engine &eng, int intersection, ActuatedParams params = {});
    explicit ActuatedController(ActuatedParams params); // detector-driven (tests)
    std::string name() const override { return "actuated"; }
    std::array<Color, 2> colors(std::int64_t tick) override;
    void observe_tick(const Engine &eng) override;

    // testable core: advance one second given arrivals on the served approach
    void advance(int arrivals);
    int serving() const { return serving_; }
    bool in_yellow() const { return in_yellow_; }

private:
    int intersection_ = -1;
    ActuatedParams p_;
    int serving_ = 0;
    bool in_yellow_ = false;
    bool maxed_out_ = false;
    int local_t_ = 0;   // seconds since the serving phase's green began
    int yellow_t_ = 0;
    int green_end_;
};

// --- generic cyclic policy hook (RL policies, sweeps) ---

class CyclicAgentController : public Controller {
public:
    using PlanChooser = std::function<int(std::uint64_t cycle, const std::array<double, 2> &prev_w)>;
    CyclicAgentController(std::string name, PlanChooser chooser);
    std::string name() const override { return name_; }
    void on_cycle_start(std::uint64_t cycle, const std::array<double, 2> &prev_w) override;
    std::array<Color, 2> colors(std::int64_t tick) override;
    const SignalPlan *committed_plan() const override { return &plan_; }

private:
    std::string name_;
    PlanChooser chooser_;
    SignalPlan plan_ = {3, {0.50, 0.50}};
};

} // namespace tsl

#endif
