#include "tsl/simcore.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tsl/errors.hpp"

namespace tsl {

namespace {

std::uint64_t movement_key(int in_edge, int out_edge) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(in_edge)) << 32) |
           static_cast<std::uint32_t>(out_edge);
}

} // namespace

Engine::Engine(const Scenario &scenario, std::uint64_t seed, double demand_scale)
    : scenario_(&scenario),
      rng_arrivals_(splitmix64(seed ^ 0xa11ce5ULL)),
      rng_routes_(splitmix64(seed ^ 0x7007e5ULL)),
      demand_scale_(demand_scale),
      cycle_len_(scenario.timing.cycle_s) {
    const RoadNetwork &net = scenario.net;
    int n_edges = static_cast<int>(net.edges.size());
    travel_ticks_.resize(n_edges);
    edge_capacity_.resize(n_edges);
    lane_base_.resize(n_edges);
    lane_count_of_edge_.resize(n_edges);
    edge_occupancy_.assign(n_edges, 0);
    edge_queued_.assign(n_edges, 0);

    movements_by_phase_.resize(net.intersections.size());
    inbound_lanes_.assign(net.intersections.size(), {0, 0});
    window_stopped_.assign(net.intersections.size(), {0, 0});
    phase_joins_last_.assign(net.intersections.size(), {0, 0});

    for (std::size_t i = 0; i < net.intersections.size(); ++i) {
        for (int p = 0; p < 2; ++p) {
            for (const Movement &m : net.intersections[i].phases[p]) {
                int in = static_cast<int>(net.edge_index.at(m.in_edge));
                int out = static_cast<int>(net.edge_index.at(m.out_edge));
                movements_by_phase_[i][p].push_back({in, out});
                movement_phase_[movement_key(in, out)] = {static_cast<int>(i), p};
            }
        }
    }

    for (int e = 0; e < n_edges; ++e) {
        const Edge &edge = net.edges[e];
        travel_ticks_[e] = std::max(1, static_cast<int>(std::ceil(edge.length_m / edge.speed_mps)));
        int lane_cap = std::max(1, static_cast<int>(std::floor(edge.length_m / kVehicleFootprintM)));
        edge_capacity_[e] = lane_cap * edge.lanes;
        lane_base_[e] = static_cast<int>(lanes_.size());
        lane_count_of_edge_[e] = edge.lanes;

        int intersection = -1;
        int mask = 0;
        auto it = net.intersection_index.find(edge.to);
        if (it != net.intersection_index.end()) {
            intersection = static_cast<int>(it->second);
            for (int p = 0; p < 2; ++p)
                for (const auto &[in, out] : movements_by_phase_[intersection][p])
                    if (in == e) mask |= (1 << p);
        }
        for (int k = 0; k < edge.lanes; ++k) {
            Lane lane;
            lane.edge = e;
            lane.index = k;
            lane.capacity = lane_cap;
            lane.intersection = intersection;
            lane.phase_mask = mask;
            lanes_.push_back(std::move(lane));
        }
        if (intersection >= 0)
            for (int p = 0; p < 2; ++p)
                if (mask & (1 << p)) inbound_lanes_[intersection][p] += edge.lanes;
    }
    lane_joins_last_.assign(lanes_.size(), 0);
    lane_queue_ticks_.assign(lanes_.size(), 0);

    // demand: entry edges in sorted-id order, routes grouped per entry
    for (const std::string &id : net.entry_edges()) {
        int e = static_cast<int>(net.edge_index.at(id));
        entry_edge_idx_.push_back(e);
        double p = scenario.demand.rate_per_lane_vps * demand_scale_ * net.edges[e].lanes;
        entry_probability_.push_back(std::clamp(p, 0.0, 1.0));
    }
    entry_routes_.resize(entry_edge_idx_.size());
    entry_route_cumw_.resize(entry_edge_idx_.size());
    route_length_m_.resize(scenario.routes.size());
    for (std::size_t r = 0; r < scenario.routes.size(); ++r) {
        const Route &route = scenario.routes[r];
        double len = 0.0;
        for (const std::string &eid : route.edges) len += net.edge(eid).length_m;
        route_length_m_[r] = len;
        int entry = static_cast<int>(net.edge_index.at(route.entry_edge()));
        for (std::size_t g = 0; g < entry_edge_idx_.size(); ++g) {
            if (entry_edge_idx_[g] == entry) {
                entry_routes_[g].push_back(static_cast<int>(r));
                double prev = entry_route_cumw_[g].empty() ? 0.0 : entry_route_cumw_[g].back();
                entry_route_cumw_[g].push_back(prev + route.weight);
            }
        }
    }
}

int Engine::edge_index(const std::string &id) const {
    return static_cast<int>(scenario_->net.edge_index.at(id));
}

int Engine::phase_of_movement(int in_edge, int out_edge, int *intersection_out) const {
    auto it = movement_phase_.find(movement_key(in_edge, out_edge));
    if (it == movement_phase_.end()) {
        if (intersection_out) *intersection_out = -1;
        return -1;
    }
    if (intersection_out) *intersection_out = it->second.first;
    return it->second.second;
}

void Engine::emit(TraceEvent::Kind kind, std::uint64_t vehicle, int edge, int lane) {
    if (trace_) trace_({kind, vehicle, edge, lane, clock_});
}

bool Engine::spawn(int route_idx) {
    const Route &route = scenario_->routes[route_idx];
    int entry = static_cast<int>(scenario_->net.edge_index.at(route.entry_edge()));
    if (edge_occupancy_[entry] >= edge_capacity_[entry]) return false;
    Vehicle v;
    v.id = vehicles_.size();
    v.route_idx = route_idx;
    v.route_pos = 0;
    v.entry_s = clock_;
    v.mode = VehicleMode::FreeFlow;
    v.remaining_s = travel_ticks_[entry];
    v.active = true;
    ++edge_occupancy_[entry];
    ++injected_count_;
    ++active_count_;
    freeflow_.push_back(v.id);
    emit(TraceEvent::Kind::Inject, v.id, entry, -1);
    vehicles_.push_back(std::move(v));
    return true;
}

void Engine::join_queue(std::uint64_t vid) {
    Vehicle &v = vehicles_[vid];
    const Route &route = scenario_->routes[v.route_idx];
    int cur = static_cast<int>(scenario_->net.edge_index.at(route.edges[v.route_pos]));
    int best = -1;
    int best_len = 0;
    for (int k = 0; k < lane_count_of_edge_[cur]; ++k) {
        const Lane &lane = lanes_[lane_base_[cur] + k];
        int len = static_cast<int>(lane.q.size());
        if (len >= lane.capacity) continue;
        if (best < 0 || len < best_len) {
            best = lane_base_[cur] + k;
            best_len = len;
        }
    }
    if (best < 0) {
        // every lane full (possible transiently after a teleport): retry next tick
        v.remaining_s = 0;
        freeflow_.push_back(vid);
        return;
    }
    lanes_[best].q.push_back(vid);
    v.mode = VehicleMode::Queued;
    v.lane = best;
    v.queued_since = clock_;
    ++edge_queued_[cur];
    ++lane_joins_last_[best];
    int next = static_cast<int>(scenario_->net.edge_index.at(route.edges[v.route_pos + 1]));
    int xi = -1;
    int phase = phase_of_movement(cur, next, &xi);
    if (phase >= 0) ++phase_joins_last_[xi][phase];
    emit(TraceEvent::Kind::Join, vid, cur, best);
}

void Engine::complete_trip(Vehicle &v) {
    TripRecord rec;
    rec.vehicle_id = v.id;
    rec.entry_s = v.entry_s;
    rec.exit_s = clock_ + 1;
    rec.travel_s = rec.exit_s - rec.entry_s;
    rec.waiting_s = v.stopped_s;
    rec.speed_mps = route_length_m_[v.route_idx] / static_cast<double>(rec.travel_s);
    rec.teleported = v.teleported;
    trips_.push_back(rec);
    v.active = false;
    --active_count_;
}

void Engine::step(const SignalView &view) {
    const RoadNetwork &net = scenario_->net;
    if (view.phase_colors.size() != net.intersections.size())
        throw std::logic_error("signal view does not cover every intersection");

    for (auto &j : phase_joins_last_) j = {0, 0};
    std::fill(lane_joins_last_.begin(), lane_joins_last_.end(), 0);

    // (i) Bernoulli injections per entry edge
    for (std::size_t g = 0; g < entry_edge_idx_.size(); ++g) {
        double u = rng_arrivals_.next_double();
        if (u >= entry_probability_[g]) continue;
        int e = entry_edge_idx_[g];
        if (edge_occupancy_[e] >= edge_capacity_[e]) continue; // entry blocked
        const auto &cumw = entry_route_cumw_[g];
        double v = rng_routes_.next_double() * cumw.back();
        std::size_t pick = std::lower_bound(cumw.begin(), cumw.end(), v) - cumw.begin();
        if (pick >= cumw.size()) pick = cumw.size() - 1;
        spawn(entry_routes_[g][pick]);
    }

    // (ii) free-flow timers; vehicles reaching the stop line join a queue,
    // vehicles finishing their last edge leave the network
    std::vector<std::uint64_t> moving;
    moving.swap(freeflow_);
    std::sort(moving.begin(), moving.end());
    for (std::uint64_t vid : moving) {
        Vehicle &v = vehicles_[vid];
        if (v.remaining_s > 0) --v.remaining_s;
        if (v.remaining_s > 0) {
            freeflow_.push_back(vid);
            continue;
        }
        const Route &route = scenario_->routes[v.route_idx];
        int cur = static_cast<int>(net.edge_index.at(route.edges[v.route_pos]));
        if (v.route_pos + 1 == static_cast<int>(route.edges.size())) {
            --edge_occupancy_[cur];
            emit(TraceEvent::Kind::Exit, vid, cur, -1);
            complete_trip(v);
            continue;
        }
        bool unsignalized = lanes_[lane_base_[cur]].intersection < 0;
        if (unsignalized) {
            // no stop line at a plain node: keep rolling if there is space
            int next = static_cast<int>(net.edge_index.at(route.edges[v.route_pos + 1]));
            if (edge_occupancy_[next] < edge_capacity_[next]) {
                --edge_occupancy_[cur];
                ++edge_occupancy_[next];
                ++v.route_pos;
                v.remaining_s = travel_ticks_[next];
                freeflow_.push_back(vid);
                continue;
            }
        }
        join_queue(vid);
    }

    // (iii) signalized discharge, at most one vehicle per lane per tick
    for (std::size_t li = 0; li < lanes_.size(); ++li) {
        Lane &lane = lanes_[li];
        if (lane.q.empty()) {
            lane.credit = 0.0;
            continue;
        }
        bool green = true;
        if (lane.intersection >= 0) {
            const Vehicle &head = vehicles_[lane.q.front()];
            const Route &route = scenario_->routes[head.route_idx];
            int cur = lane.edge;
            int next = static_cast<int>(net.edge_index.at(route.edges[head.route_pos + 1]));
            int phase = phase_of_movement(cur, next, nullptr);
            green = phase >= 0 && view.phase_colors[lane.intersection][phase] == Color::Green;
        }
        if (!green) {
            lane.credit = 0.0;
            continue;
        }
        lane.credit = std::min(1.0, lane.credit + 1.0 / kSaturationHeadwayS);
        if (lane.credit >= 1.0) {
            Vehicle &head = vehicles_[lane.q.front()];
            const Route &route = scenario_->routes[head.route_idx];
            int next = static_cast<int>(net.edge_index.at(route.edges[head.route_pos + 1]));
            if (edge_occupancy_[next] < edge_capacity_[next]) {
                lane.q.pop_front();
                lane.credit -= 1.0;
                --edge_queued_[lane.edge];
                --edge_occupancy_[lane.edge];
                ++edge_occupancy_[next];
                ++head.route_pos;
                head.mode = VehicleMode::FreeFlow;
                head.remaining_s = travel_ticks_[next];
                head.lane = -1;
                head.queued_since = -1;
                freeflow_.push_back(head.id);
                emit(TraceEvent::Kind::Discharge, head.id, lane.edge, static_cast<int>(li));
            }
            // else blocked by downstream spillback; keep the credit
        }
    }

    // (iv) stopped accounting: every still-queued vehicle accrues one second
    std::int64_t queued_total = 0;
    for (std::size_t li = 0; li < lanes_.size(); ++li) {
        const Lane &lane = lanes_[li];
        int len = static_cast<int>(lane.q.size());
        if (len == 0) continue;
        queued_total += len;
        lane_queue_ticks_[li] += len;
        for (std::uint64_t vid : lane.q) ++vehicles_[vid].stopped_s;
        if (lane.intersection >= 0)
            for (int p = 0; p < 2; ++p)
                if (lane.phase_mask & (1 << p)) window_stopped_[lane.intersection][p] += len;
    }
    total_stopped_seconds_ += queued_total;
    window_vehicle_ticks_ += active_count_;
    window_moving_ticks_ += active_count_ - queued_total;
    ++window_ticks_;

    // (v)
    ++clock_;
}

void Engine::resolve_gridlock() {
    const RoadNetwork &net = scenario_->net;
    for (std::size_t li = 0; li < lanes_.size(); ++li) {
        Lane &lane = lanes_[li];
        if (lane.q.empty()) continue;
        bool any = false;
        for (std::uint64_t vid : lane.q)
            if (clock_ - vehicles_[vid].queued_since >= kTeleportThresholdS) any = true;
        if (!any) continue;
        std::deque<std::uint64_t> keep;
        for (std::uint64_t vid : lane.q) {
            Vehicle &v = vehicles_[vid];
            if (clock_ - v.queued_since < kTeleportThresholdS) {
                keep.push_back(vid);
                continue;
            }
            ++teleport_event_count_;
            v.teleported = true;
            --edge_queued_[lane.edge];
            --edge_occupancy_[lane.edge];
            const Route &route = scenario_->routes[v.route_idx];
            if (v.route_pos + 1 < static_cast<int>(route.edges.size())) {
                // jump past the blockage, ignoring downstream capacity
                int next = static_cast<int>(net.edge_index.at(route.edges[v.route_pos + 1]));
                ++edge_occupancy_[next];
                ++v.route_pos;
                v.mode = VehicleMode::FreeFlow;
                v.remaining_s = travel_ticks_[next];
                v.lane = -1;
                v.queued_since = -1;
                freeflow_.push_back(vid);
                emit(TraceEvent::Kind::Teleport, vid, lane.edge, static_cast<int>(li));
            } else {
                v.active = false;
                --active_count_;
                ++teleport_removed_count_;
                emit(TraceEvent::Kind::TeleportRemoved, vid, lane.edge, static_cast<int>(li));
            }
        }
        lane.q = std::move(keep);
    }
}

double Engine::cumulative_stopped(int intersection, int phase) const {
    if (window_ticks_ != cycle_len_)
        throw std::logic_error("cycle window incomplete: have " + std::to_string(window_ticks_) + " of " +
                               std::to_string(cycle_len_) + " ticks");
    return static_cast<double>(window_stopped_[intersection][phase]) / cycle_len_;
}

std::array<double, 2> Engine::cumulative_stopped_pair(int intersection) const {
    return {cumulative_stopped(intersection, 0), cumulative_stopped(intersection, 1)};
}

void Engine::reset_cycle_window() {
    window_ticks_ = 0;
    window_vehicle_ticks_ = 0;
    window_moving_ticks_ = 0;
    for (auto &w : window_stopped_) w = {0, 0};
}

double Engine::window_mean_speed() const {
    if (window_vehicle_ticks_ == 0) return 1.0;
    return static_cast<double>(window_moving_ticks_) / static_cast<double>(window_vehicle_ticks_);
}

} // namespace tsl
