#ifndef TSL_SCENARIO_HPP
#define TSL_SCENARIO_HPP

#include <string>
#include <unordered_map>
#include <vector>

namespace tsl {

struct Node {
    std::string id;
    double x = 0.0; // meters, planar
    double y = 0.0;
};

struct Edge {
    std::string id;
    std::string from;
    std::string to;
    int lanes = 1;
    double length_m = 0.0;
    double speed_mps = 0.0;
};

struct Movement {
    std::string in_edge;
    std::string out_edge;

    bool operator==(const Movement &other) const = default;
};

// A signalized junction. Phases partition the permitted movements into two
// non-conflicting groups; every implemented intersection has exactly two.
struct Intersection {
    std::string node;
    std::vector<std::vector<Movement>> phases;
};

struct RoadNetwork {
    std::vector<Node> nodes;
    std::vector<Edge> edges;
    std::vector<Intersection> intersections;

    const Node &node(const std::string &id) const;
    const Edge &edge(const std::string &id) const;
    bool has_node(const std::string &id) const { return node_index.count(id) > 0; }
    bool has_edge(const std::string &id) const { return edge_index.count(id) > 0; }

    // Edges with no inbound / no outbound connection; these are where demand
    // enters and leaves the network.
    std::vector<std::string> entry_edges() const;
    std::vector<std::string> exit_edges() const;

    // Successor edges of `edge_id`: movements at intersections, plain
    // adjacency elsewhere. Sorted by edge id.
    std::vector<std::string> successors(const std::string &edge_id) const;

    void rebuild_indices();

    std::unordered_map<std::string, std::size_t> node_index;
    std::unordered_map<std::string, std::size_t> edge_index;
    std::unordered_map<std::string, std::size_t> intersection_index; // by node id
};

struct Route {
    std::vector<std::string> edges;
    int turns = 0;
    double weight = 0.0;

    const std::string &entry_edge() const { return edges.front(); }
};

// Constant Bernoulli arrivals; per-edge probability is rate * lane count.
struct DemandProfile {
    double rate_per_lane_vps = 0.0;

    double entry_probability(const Edge &e) const {
        double p = rate_per_lane_vps * e.lanes;
        return p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p);
    }
};

struct TimingConfig {
    int cycle_s = 60;
    int yellow_total_s = 6;
};

struct Scenario {
    std::string name;
    RoadNetwork net;
    std::vector<Route> routes; // weighted, grouped implicitly by entry edge
    DemandProfile demand;
    TimingConfig timing;
};

// Parses and fully validates a scenario file (see docs/schema in README).
// Throws ParseError on malformed input, ValidationError naming the offending
// element otherwise.
Scenario load_scenario(const std::string &path);

// As above but from an in-memory JSON string (the file loader delegates here).
Scenario load_scenario_json(const std::string &json_text, const std::string &name);

// All acyclic entry-to-exit paths of at most `max_len` edges, ordered
// lexicographically by edge-id sequence. Turn counts are filled in; weights
// are not (see weight_routes).
std::vector<Route> enumerate_routes(const RoadNetwork &net, int max_len);

// Heading changes above this count as a turn.
constexpr double kTurnThresholdDeg = 30.0;

int turn_count(const Route &route, const RoadNetwork &net);

// Within each entry-edge group, weight(r) = (1+turns)^-1 normalized over the
// group. Throws ValidationError if some entry edge of `net` has no route.
std::vector<Route> weight_routes(std::vector<Route> routes, const RoadNetwork &net);

} // namespace tsl

#endif
