#ifndef TSL_SIGNAL_HPP
#define TSL_SIGNAL_HPP

#include <array>
#include <cstdint>
#include <vector>

namespace tsl {

enum class Color { Red, Yellow, Green };

struct SignalTiming {
    int cycle_s = 60;
    int yellow_per_transition_s = 3; // two transitions per cycle, 6 s total
};

struct PhaseSplits {
    double phase1 = 0.5;
    double phase2 = 0.5;
};

struct SignalPlan {
    int index = 0; // 0..6
    PhaseSplits splits;
};

// The fixed 7-plan action space: index 0 allocates 30% of the cycle to
// phase 1 and 70% to phase 2, index 6 the reverse.
const std::vector<SignalPlan> &action_space();

// Green seconds for phase 1 under the given splits: round(split1*60) - 3,
// phase 2 takes the remainder so the cycle always sums to 60.
int green1_seconds(const PhaseSplits &splits, const SignalTiming &timing = {});
int green2_seconds(const PhaseSplits &splits, const SignalTiming &timing = {});

// Colors of (phase1, phase2) at `tick` in [0, 59]. Exactly one phase is
// non-red at every tick.
std::array<Color, 2> phase_at(const PhaseSplits &splits, int tick, const SignalTiming &timing = {});

inline std::array<Color, 2> phase_at(const SignalPlan &plan, int tick, const SignalTiming &timing = {}) {
    return phase_at(plan.splits, tick, timing);
}

// Shared cycle clock. Plans may only be replaced at a cycle boundary.
class CycleClock {
public:
    explicit CycleClock(SignalTiming timing = {}) : timing_(timing) {}

    std::uint64_t cycle() const { return cycle_; }
    int tick_in_cycle() const { return tick_; }
    const SignalPlan &active_plan() const { return plan_; }
    const SignalTiming &timing() const { return timing_; }

    // Throws std::logic_error when attempted mid-cycle.
    void commit_plan(const SignalPlan &plan);

    void advance();

private:
    SignalTiming timing_;
    SignalPlan plan_ = {3, {0.50, 0.50}};
    std::uint64_t cycle_ = 0;
    int tick_ = 0;
};

} // namespace tsl

#endif
