#ifndef TSL_SIMCORE_HPP
#define TSL_SIMCORE_HPP

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "tsl/rng.hpp"
#include "tsl/scenario.hpp"
#include "tsl/signal.hpp"

namespace tsl {

// Saturation discharge headway per lane under green.
constexpr double kSaturationHeadwayS = 2.0;
// Jam spacing used for queue capacity.
constexpr double kVehicleFootprintM = 7.5;
// Continuous queueing beyond this is treated as gridlock and teleported.
constexpr int kTeleportThresholdS = 300;

struct TripRecord {
    std::uint64_t vehicle_id = 0;
    std::int64_t entry_s = 0;
    std::int64_t exit_s = 0;
    std::int64_t travel_s = 0;
    std::int64_t waiting_s = 0;
    double speed_mps = 0.0;
    bool teleported = false;
};

enum class VehicleMode { FreeFlow, Queued };

struct Vehicle {
    std::uint64_t id = 0;
    int route_idx = -1;
    int route_pos = 0;
    std::int64_t entry_s = 0;
    std::int64_t stopped_s = 0;
    VehicleMode mode = VehicleMode::FreeFlow;
    int remaining_s = 0;          // free-flow seconds left on current edge
    int lane = -1;                // global lane index while queued
    std::int64_t queued_since = -1;
    bool teleported = false;
    bool active = false;
};

// Normalized speeds are binary in the point-queue model (queued 0, moving 1),
// so the low-speed threshold reduces to the queued test.
inline int stopped(const Vehicle &v) { return v.mode == VehicleMode::Queued ? 1 : 0; }

// Per-tick movement colors, one pair of phase colors per intersection in
// scenario order. Unsignalized connections are implicitly green.
struct SignalView {
    std::vector<std::array<Color, 2>> phase_colors;
};

struct TraceEvent {
    enum class Kind { Inject, Join, Discharge, Exit, Teleport, TeleportRemoved };
    Kind kind;
    std::uint64_t vehicle;
    int edge;  // edge involved (joined/discharged-from/teleported-from)
    int lane;  // global lane index, -1 when not applicable
    std::int64_t t;
};

// Deterministic discrete-time point-queue traffic engine. One step() is one
// second: Bernoulli injections, free-flow timers, signalized FIFO discharge,
// stopped-time accounting.
class Engine {
public:
    Engine(const Scenario &scenario, std::uint64_t seed, double demand_scale = 1.0);

    void step(const SignalView &view);

    // Teleports vehicles queued continuously for kTeleportThresholdS or more
    // past their blockage. Intended to run once per tick after step().
    void resolve_gridlock();

    // Injects a vehicle on the given route if its entry edge has space.
    bool spawn(int route_idx);

    std::int64_t clock() const { return clock_; }
    int active_count() const { return active_count_; }
    std::int64_t injected_count() const { return injected_count_; }
    std::int64_t completed_count() const { return static_cast<std::int64_t>(trips_.size()); }
    std::int64_t teleport_removed_count() const { return teleport_removed_count_; }
    std::int64_t teleport_event_count() const { return teleport_event_count_; }
    bool conservation_holds() const {
        return injected_count_ == active_count_ + completed_count() + teleport_removed_count_;
    }

    const std::vector<TripRecord> &trips() const { return trips_; }
    std::int64_t total_stopped_seconds() const { return total_stopped_seconds_; }

    int edge_count() const { return static_cast<int>(scenario_->net.edges.size()); }
    int lane_count() const { return static_cast<int>(lanes_.size()); }
    int intersection_count() const { return static_cast<int>(scenario_->net.intersections.size()); }
    int edge_index(const std::string &id) const;
    int queued_on_edge(int edge_idx) const { return edge_queued_[edge_idx]; }
    int occupancy(int edge_idx) const { return edge_occupancy_[edge_idx]; }
    int lane_queue_len(int lane) const { return static_cast<int>(lanes_[lane].q.size()); }
    int lane_capacity(int lane) const { return lanes_[lane].capacity; }
    // queued vehicle-seconds accumulated on the lane since construction
    std::int64_t lane_queue_ticks(int lane) const { return lane_queue_ticks_[lane]; }
    int lanes_of_edge(int edge_idx) const { return lane_count_of_edge_[edge_idx]; }
    int first_lane_of_edge(int edge_idx) const { return lane_base_[edge_idx]; }

    // Movements per intersection and phase as (in_edge, out_edge) index pairs.
    const std::vector<std::array<std::vector<std::pair<int, int>>, 2>> &movements_by_phase() const {
        return movements_by_phase_;
    }

    // --- cycle window accounting (w_p of the state/reward definition) ---
    // Time-averaged stopped vehicle count on phase `p` inbound lanes over the
    // current window. Throws std::logic_error unless the window spans exactly
    // one cycle.
    double cumulative_stopped(int intersection, int phase) const;
    std::array<double, 2> cumulative_stopped_pair(int intersection) const;
    void reset_cycle_window();
    int window_ticks() const { return window_ticks_; }
    int cycle_len() const { return cycle_len_; }
    // Mean normalized speed over the window: fraction of vehicle-seconds spent
    // moving. 1.0 when no vehicle was present.
    double window_mean_speed() const;

    // Stop-line arrivals (queue joins) during the last completed tick.
    int joins_last_tick(int intersection, int phase) const { return phase_joins_last_[intersection][phase]; }
    int lane_joins_last_tick(int lane) const { return lane_joins_last_[lane]; }

    int inbound_lane_count(int intersection, int phase) const { return inbound_lanes_[intersection][phase]; }

    void set_trace(std::function<void(const TraceEvent &)> cb) { trace_ = std::move(cb); }

    const Scenario &scenario() const { return *scenario_; }
    const Vehicle &vehicle(std::uint64_t id) const { return vehicles_[id]; }

private:
    struct Lane {
        int edge = -1;
        int index = -1;
        int capacity = 1;
        int intersection = -1; // -1 when the edge ends at a plain node
        int phase_mask = 0;    // bit p set when some movement of this edge is in phase p
        double credit = 0.0;
        std::deque<std::uint64_t> q;
    };

    void join_queue(std::uint64_t vid);
    void emit(TraceEvent::Kind kind, std::uint64_t vehicle, int edge, int lane);
    void complete_trip(Vehicle &v);
    int phase_of_movement(int in_edge, int out_edge, int *intersection_out = nullptr) const;

    const Scenario *scenario_;
    Rng rng_arrivals_;
    Rng rng_routes_;
    double demand_scale_;

    // static per-edge data
    std::vector<int> travel_ticks_;
    std::vector<int> edge_capacity_;
    std::vector<int> lane_base_;
    std::vector<int> lane_count_of_edge_;
    std::vector<double> route_length_m_;
    std::vector<int> entry_edge_idx_;                     // sorted by edge id
    std::vector<double> entry_probability_;               // aligned with entry_edge_idx_
    std::vector<std::vector<int>> entry_routes_;          // route indices per entry edge
    std::vector<std::vector<double>> entry_route_cumw_;   // cumulative weights
    std::vector<std::array<std::vector<std::pair<int, int>>, 2>> movements_by_phase_;
    std::vector<std::array<int, 2>> inbound_lanes_;
    std::unordered_map<std::uint64_t, std::pair<int, int>> movement_phase_; // (in,out) -> (intersection, phase)

    // dynamic state
    std::int64_t clock_ = 0;
    std::vector<Lane> lanes_;
    std::vector<Vehicle> vehicles_; // indexed by id
    std::vector<std::uint64_t> freeflow_;
    std::vector<int> edge_occupancy_;
    std::vector<int> edge_queued_;
    std::vector<TripRecord> trips_;
    std::int64_t injected_count_ = 0;
    std::int64_t teleport_removed_count_ = 0;
    std::int64_t teleport_event_count_ = 0;
    int active_count_ = 0;
    std::int64_t total_stopped_seconds_ = 0;

    int cycle_len_ = 60;
    int window_ticks_ = 0;
    std::vector<std::array<std::int64_t, 2>> window_stopped_;
    std::int64_t window_vehicle_ticks_ = 0;
    std::int64_t window_moving_ticks_ = 0;
    std::vector<std::array<int, 2>> phase_joins_last_;
    std::vector<int> lane_joins_last_;
    std::vector<std::int64_t> lane_queue_ticks_;

    std::function<void(const TraceEvent &)> trace_;
};

} // namespace tsl

#endif
