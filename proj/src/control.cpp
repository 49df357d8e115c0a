#include "tsl/control.hpp"

#include <algorithm>
#include <stdexcept>

namespace tsl {

// --- static ---

StaticController::StaticController(int plan_index) {
    const auto &plans = action_space();
    if (plan_index < 0 || plan_index >= static_cast<int>(plans.size()))
        throw std::invalid_argument("static plan index out of range: " + std::to_string(plan_index));
    plan_ = plans[plan_index];
}

std::array<Color, 2> StaticController::colors(std::int64_t tick) {
    return phase_at(plan_, static_cast<int>(tick % 60));
}

// --- Webster ---

PhaseSplits webster_splits(const std::array<double, 2> &y) {
    double total = y[0] + y[1];
    if (total <= 0.0) return {0.50, 0.50};
    double s1 = y[0] / total;
    s1 = std::clamp(s1, kWebsterMinSplit, kWebsterMaxSplit);
    return {s1, 1.0 - s1};
}

WebsterController::WebsterController(const Engine &eng, int intersection) : intersection_(intersection) {
    for (int e = 0; e < eng.edge_count(); ++e) {
        int base = eng.first_lane_of_edge(e);
        for (int k = 0; k < eng.lanes_of_edge(e); ++k) {
            int mask = 0;
            for (int p = 0; p < 2; ++p)
                for (const auto &[in, out] : eng.movements_by_phase()[intersection][p])
                    if (in == e) mask |= (1 << p);
            if (mask != 0) {
                lanes_.push_back(base + k);
                lane_phase_mask_.push_back(mask);
            }
        }
    }
    window_sums_.assign(lanes_.size(), 0);
}

void WebsterController::observe_tick(const Engine &eng) {
    std::vector<int> joins(lanes_.size());
    for (std::size_t i = 0; i < lanes_.size(); ++i) {
        joins[i] = eng.lane_joins_last_tick(lanes_[i]);
        window_sums_[i] += joins[i];
    }
    window_.push_back(std::move(joins));
    if (static_cast<int>(window_.size()) > kWebsterHorizonS) {
        for (std::size_t i = 0; i < lanes_.size(); ++i) window_sums_[i] -= window_.front()[i];
        window_.pop_front();
    }
}

std::array<double, 2> WebsterController::flow_ratios() const {
    std::array<double, 2> y = {0.0, 0.0};
    if (window_.empty()) return y;
    double horizon = static_cast<double>(window_.size());
    double saturation = 1.0 / kSaturationHeadwayS;
    for (std::size_t i = 0; i < lanes_.size(); ++i) {
        double flow = static_cast<double>(window_sums_[i]) / horizon;
        for (int p = 0; p < 2; ++p)
            if (lane_phase_mask_[i] & (1 << p)) y[p] = std::max(y[p], flow / saturation);
    }
    return y;
}

void WebsterController::on_cycle_start(std::uint64_t cycle, const std::array<double, 2> &) {
    if (cycle % kWebsterRecomputeCycles != 0) return;
    plan_.splits = webster_splits(flow_ratios());
    plan_.index = -1;
}

std::array<Color, 2> WebsterController::colors(std::int64_t tick) {
    return phase_at(plan_.splits, static_cast<int>(tick % 60));
}

// --- Max-Pressure ---

int max_pressure_select(const std::array<double, 2> &pressure, int current_phase) {
    if (pressure[0] == pressure[1]) return current_phase;
    return pressure[0] > pressure[1] ? 0 : 1;
}

MaxPressureController::MaxPressureController(const Engine &, int intersection) : intersection_(intersection) {}

std::array<double, 2> MaxPressureController::pressures(const Engine &eng) const {
    std::array<double, 2> pr = {0.0, 0.0};
    for (int p = 0; p < 2; ++p)
        for (const auto &[in, out] : eng.movements_by_phase()[intersection_][p])
            pr[p] += eng.queued_on_edge(in) - eng.queued_on_edge(out);
    return pr;
}

void MaxPressureController::advance(const std::array<double, 2> &pressure) {
    if (yellow_left_ > 0) {
        if (--yellow_left_ == 0) {
            serving_ = pending_;
            pending_ = -1;
            green_elapsed_ = 0;
        }
        return;
    }
    ++green_elapsed_;
    if (green_elapsed_ < kMaxPressureSlotS) return;
    int next = max_pressure_select(pressure, serving_);
    if (next == serving_) {
        green_elapsed_ = 0;
        return;
    }
    pending_ = next;
    yellow_left_ = kMaxPressureYellowS;
}

void MaxPressureController::observe_tick(const Engine &eng) { advance(pressures(eng)); }

std::array<Color, 2> MaxPressureController::colors(std::int64_t) {
    std::array<Color, 2> c = {Color::Red, Color::Red};
    c[serving_] = yellow_left_ > 0 ? Color::Yellow : Color::Green;
    return c;
}

// --- actuated ---

ActuatedController::ActuatedController(const Engine &, int intersection, ActuatedParams params)
    : intersection_(intersection), p_(params), green_end_(params.min_green_s) {}

ActuatedController::ActuatedController(ActuatedParams params) : p_(params), green_end_(params.min_green_s) {}

void ActuatedController::advance(int arrivals) {
    int t = local_t_; // the second just completed, measured from green onset
    ++local_t_;
    if (!in_yellow_) {
        if (arrivals > 0) green_end_ = std::min(p_.max_green_s, std::max(green_end_, t + p_.extension_s));
        if (local_t_ >= green_end_ || local_t_ >= p_.max_green_s) {
            in_yellow_ = true;
            yellow_t_ = 0;
            maxed_out_ = green_end_ >= p_.max_green_s;
        }
        return;
    }
    // during the change interval, a fresh arrival inside the gap window pulls
    // the phase back to green unless it maxed out
    if (arrivals > 0 && !maxed_out_ && yellow_t_ < p_.gap_s) {
        in_yellow_ = false;
        green_end_ = std::min(p_.max_green_s, t + p_.extension_s);
        return;
    }
    if (++yellow_t_ >= p_.yellow_s) {
        serving_ = 1 - serving_;
        in_yellow_ = false;
        maxed_out_ = false;
        local_t_ = 0;
        yellow_t_ = 0;
        green_end_ = p_.min_green_s;
    }
}

void ActuatedController::observe_tick(const Engine &eng) {
    advance(eng.joins_last_tick(intersection_, serving_));
}

std::array<Color, 2> ActuatedController::colors(std::int64_t) {
    std::array<Color, 2> c = {Color::Red, Color::Red};
    c[serving_] = in_yellow_ ? Color::Yellow : Color::Green;
    return c;
}

// --- cyclic policy hook ---

CyclicAgentController::CyclicAgentController(std::string name, PlanChooser chooser)
    : name_(std::move(name)), chooser_(std::move(chooser)) {}

void CyclicAgentController::on_cycle_start(std::uint64_t cycle, const std::array<double, 2> &prev_w) {
    int action = chooser_(cycle, prev_w);
    plan_ = action_space().at(action);
}

std::array<Color, 2> CyclicAgentController::colors(std::int64_t tick) {
    return phase_at(plan_, static_cast<int>(tick % 60));
}

} // namespace tsl
