#include "tsl/signal.hpp"

#include <cmath>
#include <stdexcept>

namespace tsl {

const std::vector<SignalPlan> &action_space() {
    static const std::vector<SignalPlan> plans = {
        {0, {0.30, 0.70}}, {1, {0.37, 0.63}}, {2, {0.43, 0.57}}, {3, {0.50, 0.50}},
        {4, {0.57, 0.43}}, {5, {0.63, 0.37}}, {6, {0.70, 0.30}},
    };
    return plans;
}

int green1_seconds(const PhaseSplits &splits, const SignalTiming &timing) {
    // round-half-up keeps the table symmetric under split reversal
    int alloc1 = static_cast<int>(std::floor(splits.phase1 * timing.cycle_s + 0.5));
    return alloc1 - timing.yellow_per_transition_s;
}

int green2_seconds(const PhaseSplits &splits, const SignalTiming &timing) {
    return timing.cycle_s - green1_seconds(splits, timing) - 2 * timing.yellow_per_transition_s;
}

std::array<Color, 2> phase_at(const PhaseSplits &splits, int tick, const SignalTiming &timing) {
    if (tick < 0 || tick >= timing.cycle_s) throw std::out_of_range("tick outside cycle");
    int g1 = green1_seconds(splits, timing);
    int y = timing.yellow_per_transition_s;
    if (tick < g1) return {Color::Green, Color::Red};
    if (tick < g1 + y) return {Color::Yellow, Color::Red};
    if (tick < timing.cycle_s - y) return {Color::Red, Color::Green};
    return {Color::Red, Color::Yellow};
}

void CycleClock::commit_plan(const SignalPlan &plan) {
    if (tick_ != 0) throw std::logic_error("plan commit attempted mid-cycle");
    plan_ = plan;
}

void CycleClock::advance() {
    if (++tick_ == timing_.cycle_s) {
        tick_ = 0;
        ++cycle_;
    }
}

} // namespace tsl
