#include "tsl/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tsl/errors.hpp"

namespace tsl {

using nlohmann::json;

const Node &RoadNetwork::node(const std::string &id) const {
    auto it = node_index.find(id);
    if (it == node_index.end()) throw ValidationError("unknown node", id);
    return nodes[it->second];
}

const Edge &RoadNetwork::edge(const std::string &id) const {
    auto it = edge_index.find(id);
    if (it == edge_index.end()) throw ValidationError("unknown edge", id);
    return edges[it->second];
}

void RoadNetwork::rebuild_indices() {
    node_index.clear();
    edge_index.clear();
    intersection_index.clear();
    for (std::size_t i = 0; i < nodes.size(); ++i) node_index[nodes[i].id] = i;
    for (std::size_t i = 0; i < edges.size(); ++i) edge_index[edges[i].id] = i;
    for (std::size_t i = 0; i < intersections.size(); ++i) intersection_index[intersections[i].node] = i;
}

std::vector<std::string> RoadNetwork::entry_edges() const {
    std::set<std::string> has_inbound;
    for (const Edge &e : edges) has_inbound.insert(e.to);
    std::vector<std::string> out;
    for (const Edge &e : edges)
        if (!has_inbound.count(e.from)) out.push_back(e.id);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> RoadNetwork::exit_edges() const {
    std::set<std::string> has_outbound;
    for (const Edge &e : edges) has_outbound.insert(e.from);
    std::vector<std::string> out;
    for (const Edge &e : edges)
        if (!has_outbound.count(e.to)) out.push_back(e.id);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> RoadNetwork::successors(const std::string &edge_id) const {
    const Edge &e = edge(edge_id);
    std::vector<std::string> out;
    auto it = intersection_index.find(e.to);
    if (it != intersection_index.end()) {
        for (const auto &phase : intersections[it->second].phases)
            for (const Movement &m : phase)
                if (m.in_edge == edge_id) out.push_back(m.out_edge);
    } else {
        for (const Edge &next : edges)
            if (next.from == e.to) out.push_back(next.id);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

namespace {

double heading_deg(const RoadNetwork &net, const Edge &e) {
    const Node &a = net.node(e.from);
    const Node &b = net.node(e.to);
    return std::atan2(b.y - a.y, b.x - a.x) * 180.0 / M_PI;
}

void validate_network(const RoadNetwork &net) {
    std::set<std::string> node_ids, edge_ids;
    for (const Node &n : net.nodes) {
        if (!node_ids.insert(n.id).second) throw ValidationError("duplicate node id", n.id);
    }
    for (const Edge &e : net.edges) {
        if (!edge_ids.insert(e.id).second) throw ValidationError("duplicate edge id", e.id);
        if (!node_ids.count(e.from)) throw ValidationError("edge references missing node", e.from);
        if (!node_ids.count(e.to)) throw ValidationError("edge references missing node", e.to);
        if (e.lanes < 1) throw ValidationError("edge must have at least one lane", e.id);
        if (!(e.length_m > 0.0)) throw ValidationError("edge length must be positive", e.id);
        if (!(e.speed_mps > 0.0)) throw ValidationError("edge free speed must be positive", e.id);
    }
    for (const Intersection &x : net.intersections) {
        if (!node_ids.count(x.node)) throw ValidationError("intersection references missing node", x.node);
        if (x.phases.size() != 2) throw ValidationError("intersection must have exactly 2 phases", x.node);
        std::set<std::pair<std::string, std::string>> in_some_phase;
        for (const auto &phase : x.phases) {
            if (phase.empty()) throw ValidationError("phase with zero movements", x.node);
            for (const Movement &m : phase) {
                if (!edge_ids.count(m.in_edge)) throw ValidationError("movement references missing edge", m.in_edge);
                if (!edge_ids.count(m.out_edge)) throw ValidationError("movement references missing edge", m.out_edge);
                if (net.edge(m.in_edge).to != x.node)
                    throw ValidationError("movement in-edge does not terminate at intersection", m.in_edge);
                if (net.edge(m.out_edge).from != x.node)
                    throw ValidationError("movement out-edge does not originate at intersection", m.out_edge);
                in_some_phase.insert({m.in_edge, m.out_edge});
            }
        }
        (void)in_some_phase; // every listed movement is by construction in a phase
    }
}

void validate_routes(const std::vector<Route> &routes, const RoadNetwork &net) {
    for (const Route &r : routes) {
        if (r.edges.empty()) throw ValidationError("route with no edges", "<route>");
        for (std::size_t i = 0; i < r.edges.size(); ++i) {
            const Edge &e = net.edge(r.edges[i]);
            if (i + 1 < r.edges.size()) {
                const Edge &next = net.edge(r.edges[i + 1]);
                if (e.to != next.from)
                    throw ValidationError("route edges not connected", r.edges[i] + "->" + r.edges[i + 1]);
                auto it = net.intersection_index.find(e.to);
                if (it != net.intersection_index.end()) {
                    bool found = false;
                    for (const auto &phase : net.intersections[it->second].phases)
                        for (const Movement &m : phase)
                            if (m.in_edge == e.id && m.out_edge == next.id) found = true;
                    if (!found)
                        throw ValidationError("route uses unsignalized movement at intersection",
                                              e.id + "->" + next.id);
                }
            }
        }
    }
}

} // namespace

int turn_count(const Route &route, const RoadNetwork &net) {
    int turns = 0;
    for (std::size_t i = 0; i + 1 < route.edges.size(); ++i) {
        double h0 = heading_deg(net, net.edge(route.edges[i]));
        double h1 = heading_deg(net, net.edge(route.edges[i + 1]));
        double d = std::fmod(h1 - h0 + 540.0, 360.0) - 180.0;
        if (std::fabs(d) > kTurnThresholdDeg) ++turns;
    }
    return turns;
}

std::vector<Route> enumerate_routes(const RoadNetwork &net, int max_len) {
    std::vector<std::string> entries = net.entry_edges();
    std::set<std::string> exits;
    for (const std::string &id : net.exit_edges()) exits.insert(id);

    std::vector<Route> out;
    // Iterative DFS over edge sequences; nodes visited so far make the path
    // acyclic (this also rules out U-turn style reversals at plain nodes).
    struct Frame {
        std::vector<std::string> path;
        std::set<std::string> visited_nodes;
    };
    for (const std::string &entry : entries) {
        const Edge &e0 = net.edge(entry);
        std::vector<Frame> stack;
        stack.push_back({{entry}, {e0.from, e0.to}});
        while (!stack.empty()) {
            Frame f = std::move(stack.back());
            stack.pop_back();
            const std::string &last = f.path.back();
            if (exits.count(last)) {
                Route r;
                r.edges = f.path;
                out.push_back(std::move(r));
                continue; // exit edges have no successors anyway
            }
            if (static_cast<int>(f.path.size()) >= max_len) continue;
            std::vector<std::string> succ = net.successors(last);
            // reverse so the lexicographically smallest successor is expanded first
            for (auto it = succ.rbegin(); it != succ.rend(); ++it) {
                const Edge &next = net.edge(*it);
                if (f.visited_nodes.count(next.to)) continue;
                Frame g = f;
                g.path.push_back(*it);
                g.visited_nodes.insert(next.to);
                stack.push_back(std::move(g));
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const Route &a, const Route &b) { return a.edges < b.edges; });
    for (Route &r : out) r.turns = turn_count(r, net);
    return out;
}

std::vector<Route> weight_routes(std::vector<Route> routes, const RoadNetwork &net) {
    std::map<std::string, double> group_mass;
    for (Route &r : routes) {
        r.weight = 1.0 / (1.0 + r.turns);
        group_mass[r.entry_edge()] += r.weight;
    }
    for (const std::string &entry : net.entry_edges())
        if (!group_mass.count(entry)) throw ValidationError("entry edge with no route", entry);
    for (Route &r : routes) r.weight /= group_mass[r.entry_edge()];
    return routes;
}

namespace {

Scenario from_json(const json &doc, const std::string &name) {
    if (!doc.is_object()) throw ParseError("scenario root must be an object");
    if (!doc.contains("schema") || doc.at("schema").get<int>() != 1)
        throw ParseError("unsupported or missing schema version (expected 1)");
    for (const char *key : {"nodes", "edges", "intersections", "demand", "timing"})
        if (!doc.contains(key)) throw ParseError(std::string("missing required key: ") + key);

    Scenario sc;
    sc.name = name;
    for (const auto &jn : doc.at("nodes")) {
        Node n;
        n.id = jn.at("id").get<std::string>();
        n.x = jn.at("x").get<double>();
        n.y = jn.at("y").get<double>();
        sc.net.nodes.push_back(std::move(n));
    }
    for (const auto &je : doc.at("edges")) {
        Edge e;
        e.id = je.at("id").get<std::string>();
        e.from = je.at("from").get<std::string>();
        e.to = je.at("to").get<std::string>();
        e.lanes = je.at("lanes").get<int>();
        e.length_m = je.at("length_m").get<double>();
        e.speed_mps = je.at("speed_mps").get<double>();
        sc.net.edges.push_back(std::move(e));
    }
    for (const auto &jx : doc.at("intersections")) {
        Intersection x;
        x.node = jx.at("node").get<std::string>();
        for (const auto &jp : jx.at("phases")) {
            std::vector<Movement> phase;
            for (const auto &jm : jp) {
                if (!jm.is_array() || jm.size() != 2) throw ParseError("movement must be an [in_edge, out_edge] pair");
                phase.push_back({jm[0].get<std::string>(), jm[1].get<std::string>()});
            }
            x.phases.push_back(std::move(phase));
        }
        sc.net.intersections.push_back(std::move(x));
    }
    sc.net.rebuild_indices();
    validate_network(sc.net);

    sc.demand.rate_per_lane_vps = doc.at("demand").at("rate_per_lane_vps").get<double>();
    if (sc.demand.rate_per_lane_vps < 0.0) throw ValidationError("negative demand rate", "demand");

    sc.timing.cycle_s = doc.at("timing").at("cycle_s").get<int>();
    sc.timing.yellow_total_s = doc.at("timing").at("yellow_total_s").get<int>();
    if (sc.timing.cycle_s != 60 || sc.timing.yellow_total_s != 6)
        throw ValidationError("timing must be 60 s cycle with 6 s total yellow", "timing");

    if (doc.contains("routes")) {
        for (const auto &jr : doc.at("routes")) {
            Route r;
            for (const auto &je : jr.at("edges")) r.edges.push_back(je.get<std::string>());
            sc.routes.push_back(std::move(r));
        }
        validate_routes(sc.routes, sc.net);
        for (Route &r : sc.routes) r.turns = turn_count(r, sc.net);
    } else {
        constexpr int kDefaultMaxRouteLen = 8;
        sc.routes = enumerate_routes(sc.net, kDefaultMaxRouteLen);
    }
    sc.routes = weight_routes(std::move(sc.routes), sc.net);
    return sc;
}

} // namespace

Scenario load_scenario_json(const std::string &json_text, const std::string &name) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception &e) {
        throw ParseError(std::string("invalid JSON: ") + e.what());
    }
    try {
        return from_json(doc, name);
    } catch (const json::exception &e) {
        throw ParseError(std::string("bad scenario document: ") + e.what());
    }
}

Scenario load_scenario(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scenario file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string name = path;
    auto slash = name.find_last_of('/');
    if (slash != std::string::npos) name = name.substr(slash + 1);
    auto dot = name.rfind(".json");
    if (dot != std::string::npos) name = name.substr(0, dot);
    return load_scenario_json(ss.str(), name);
}

} // namespace tsl
