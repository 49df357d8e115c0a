#include <doctest.h>

#include <sstream>

#include "tsl/errors.hpp"
#include "tsl/scenario.hpp"

using namespace tsl;

namespace {

std::string scenario_path(const char *name) { return std::string(TSL_SCENARIO_DIR) + "/" + name; }

// two-edge corridor with a signalized junction in the middle
const char *kCorridorJson = R"({
  "schema": 1,
  "nodes": [{"id":"a_src","x":-200,"y":0},{"id":"m","x":0,"y":0},{"id":"b_snk","x":200,"y":0},
            {"id":"n_src","x":0,"y":100},{"id":"n_snk","x":0,"y":100}],
  "edges": [
    {"id":"ab","from":"a_src","to":"m","lanes":1,"length_m":200,"speed_mps":10},
    {"id":"bc","from":"m","to":"b_snk","lanes":1,"length_m":200,"speed_mps":10},
    {"id":"n_in","from":"n_src","to":"m","lanes":1,"length_m":100,"speed_mps":10},
    {"id":"n_out","from":"m","to":"n_snk","lanes":1,"length_m":100,"speed_mps":10}
  ],
  "intersections": [{"node":"m","phases":[[["n_in","n_out"],["n_in","bc"]],[["ab","bc"],["ab","n_out"]]]}],
  "demand": {"rate_per_lane_vps": 0.0},
  "timing": {"cycle_s": 60, "yellow_total_s": 6}
})";

std::string serialize_routes(const std::vector<Route> &routes) {
    std::ostringstream os;
    for (const Route &r : routes) {
        for (const auto &e : r.edges) os << e << '|';
        os << r.turns << ';';
    }
    return os.str();
}

} // namespace

TEST_CASE("bundled single_intersection loads with 1 intersection and 12 inbound lanes") {
    Scenario sc = load_scenario(scenario_path("single_intersection.json"));
    REQUIRE(sc.net.intersections.size() == 1);
    int inbound_lanes = 0;
    for (const Edge &e : sc.net.edges)
        if (e.to == "c") inbound_lanes += e.lanes;
    CHECK(inbound_lanes == 12);
    CHECK(sc.routes.size() == 12);
}

TEST_CASE("bundled arterial_3 loads with 3 intersections") {
    Scenario sc = load_scenario(scenario_path("arterial_3.json"));
    CHECK(sc.net.intersections.size() == 3);
    CHECK(sc.net.entry_edges().size() == 8);
    CHECK(sc.net.exit_edges().size() == 8);
}

TEST_CASE("edge referencing a missing node names the offender") {
    const char *bad = R"({
      "schema": 1,
      "nodes": [{"id":"a","x":0,"y":0}],
      "edges": [{"id":"e1","from":"a","to":"X","lanes":1,"length_m":10,"speed_mps":5}],
      "intersections": [],
      "demand": {"rate_per_lane_vps": 0},
      "timing": {"cycle_s": 60, "yellow_total_s": 6}
    })";
    try {
        load_scenario_json(bad, "bad");
        FAIL("expected ValidationError");
    } catch (const ValidationError &e) {
        CHECK(e.element() == "X");
    }
}

TEST_CASE("malformed json raises a parse error") {
    CHECK_THROWS_AS(load_scenario_json("{not json", "x"), ParseError);
    CHECK_THROWS_AS(load_scenario_json(R"({"schema": 2})", "x"), ParseError);
    CHECK_THROWS_AS(load_scenario("/nonexistent/path.json"), ParseError);
}

TEST_CASE("phase with zero movements and non-2-phase intersections are rejected") {
    std::string base(kCorridorJson);
    std::string empty_phase = base;
    auto pos = empty_phase.find("[[\"n_in\",\"n_out\"],[\"n_in\",\"bc\"]]");
    REQUIRE(pos != std::string::npos);
    empty_phase.replace(pos, std::string("[[\"n_in\",\"n_out\"],[\"n_in\",\"bc\"]]").size(), "[]");
    CHECK_THROWS_AS(load_scenario_json(empty_phase, "x"), ValidationError);

    std::string one_phase = base;
    pos = one_phase.find(",[[\"ab\",\"bc\"],[\"ab\",\"n_out\"]]");
    REQUIRE(pos != std::string::npos);
    one_phase.erase(pos, std::string(",[[\"ab\",\"bc\"],[\"ab\",\"n_out\"]]").size());
    CHECK_THROWS_AS(load_scenario_json(one_phase, "x"), ValidationError);
}

TEST_CASE("route enumeration on the 4-way intersection yields 12 entry-exit paths") {
    Scenario sc = load_scenario(scenario_path("single_intersection.json"));
    auto routes = enumerate_routes(sc.net, 2);
    CHECK(routes.size() == 12); // 4 entries x 3 exits, no U-turns
    for (const Route &r : routes) CHECK(r.edges.size() == 2);

    CHECK(enumerate_routes(sc.net, 1).empty()); // every path needs two edges
}

TEST_CASE("linear corridor has exactly one through route") {
    Scenario sc = load_scenario_json(kCorridorJson, "corridor");
    auto routes = enumerate_routes(sc.net, 4);
    // entries: ab, n_in; each reaches bc / n_out per the movement table
    int from_ab = 0;
    for (const Route &r : routes)
        if (r.entry_edge() == "ab") ++from_ab;
    CHECK(from_ab == 2);
    auto only_two = enumerate_routes(sc.net, 2);
    CHECK(only_two.size() == routes.size()); // all paths here have length 2
}

TEST_CASE("enumeration is deterministic and lexicographically ordered") {
    Scenario sc = load_scenario(scenario_path("single_intersection.json"));
    auto a = enumerate_routes(sc.net, 3);
    auto b = enumerate_routes(sc.net, 3);
    CHECK(serialize_routes(a) == serialize_routes(b));
    for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i - 1].edges < a[i].edges);
}

TEST_CASE("turn counting against hand geometry") {
    Scenario sc = load_scenario(scenario_path("single_intersection.json"));
    Route through{{"e_in", "w_out"}, 0, 0.0};
    CHECK(turn_count(through, sc.net) == 0);
    Route left{{"e_in", "s_out"}, 0, 0.0}; // east approach turning south
    CHECK(turn_count(left, sc.net) == 1);

    // two right angles in sequence
    const char *zigzag = R"({
      "schema": 1,
      "nodes": [{"id":"a","x":0,"y":0},{"id":"b","x":100,"y":0},{"id":"c","x":100,"y":100},{"id":"d","x":200,"y":100}],
      "edges": [
        {"id":"e1","from":"a","to":"b","lanes":1,"length_m":100,"speed_mps":10},
        {"id":"e2","from":"b","to":"c","lanes":1,"length_m":100,"speed_mps":10},
        {"id":"e3","from":"c","to":"d","lanes":1,"length_m":100,"speed_mps":10}
      ],
      "intersections": [],
      "demand": {"rate_per_lane_vps": 0},
      "timing": {"cycle_s": 60, "yellow_total_s": 6}
    })";
    Scenario zz = load_scenario_json(zigzag, "zigzag");
    Route r{{"e1", "e2", "e3"}, 0, 0.0};
    CHECK(turn_count(r, zz.net) == 2);
}

TEST_CASE("route weights follow the inverse turn rule") {
    Scenario sc = load_scenario(scenario_path("single_intersection.json"));
    // each entry group has turn counts {0, 1, 1} -> weights {1/2, 1/4, 1/4}
    for (const Route &r : sc.routes) {
        if (r.turns == 0)
            CHECK(r.weight == doctest::Approx(0.5));
        else
            CHECK(r.weight == doctest::Approx(0.25));
    }

    SUBCASE("weights sum to one per entry edge") {
        for (const std::string &entry : sc.net.entry_edges()) {
            double total = 0.0;
            for (const Route &r : sc.routes)
                if (r.entry_edge() == entry) total += r.weight;
            CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("single route takes full weight; equal turns split evenly") {
    Scenario sc = load_scenario_json(kCorridorJson, "corridor");
    std::vector<Route> routes = enumerate_routes(sc.net, 3);
    routes = weight_routes(std::move(routes), sc.net);
    // group from n_in: n_in->n_out (through, 0 turns) and n_in->bc (turn)
    double n_total = 0.0;
    for (const Route &r : routes)
        if (r.entry_edge() == "n_in") n_total += r.weight;
    CHECK(n_total == doctest::Approx(1.0));

    // synthetic group {0, 0}
    std::vector<Route> sym;
    sym.push_back({{"ab", "bc"}, 0, 0.0});
    sym.push_back({{"ab", "n_out"}, 0, 0.0});
    RoadNetwork net = sc.net; // entry edges: ab, n_in -> n_in missing would throw; trim to ab
    // restrict the check to the grouping arithmetic
    std::vector<Route> weighted;
    REQUIRE_THROWS_AS(weight_routes(sym, net), ValidationError); // n_in has no route
}

TEST_CASE("adding a turn strictly decreases a route's weight") {
    Scenario sc = load_scenario_json(kCorridorJson, "corridor");
    std::vector<Route> flat = enumerate_routes(sc.net, 3);
    auto weighted = weight_routes(flat, sc.net);
    std::vector<Route> bent = flat;
    for (Route &r : bent)
        if (r.entry_edge() == "ab" && r.turns == 0) r.turns = 1; // pretend the through route bends
    auto reweighted = weight_routes(bent, sc.net);
    for (std::size_t i = 0; i < weighted.size(); ++i) {
        if (flat[i].entry_edge() != "ab") continue;
        if (bent[i].turns > flat[i].turns)
            CHECK(reweighted[i].weight < weighted[i].weight);
    }
}

TEST_CASE("re-normalization under duplication") {
    // duplicating a route with identical turn count renormalizes the group
    Scenario sc = load_scenario_json(kCorridorJson, "corridor");
    std::vector<Route> routes = enumerate_routes(sc.net, 3);
    std::vector<Route> doubled = routes;
    for (const Route &r : routes)
        if (r.entry_edge() == "ab") doubled.push_back(r);
    auto weighted = weight_routes(doubled, sc.net);
    double total = 0.0;
    for (const Route &r : weighted)
        if (r.entry_edge() == "ab") total += r.weight;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("explicit routes override enumeration and are validated") {
    std::string with_routes(kCorridorJson);
    auto pos = with_routes.rfind('}');
    with_routes.insert(with_routes.rfind("\"timing\""), R"("routes": [{"edges": ["ab","bc"]}, {"edges": ["n_in","n_out"]}],
  )");
    Scenario sc = load_scenario_json(with_routes, "corridor");
    CHECK(sc.routes.size() == 2);
    CHECK(sc.routes[0].weight == doctest::Approx(1.0));

    std::string bad_routes(kCorridorJson);
    bad_routes.insert(bad_routes.rfind("\"timing\""), R"("routes": [{"edges": ["ab","n_in"]}],
  )");
    CHECK_THROWS_AS(load_scenario_json(bad_routes, "corridor"), ValidationError);
    (void)pos;
}

TEST_CASE("demand probability is lane-proportional and clamped") {
    DemandProfile d{0.3};
    Edge e;
    e.lanes = 2;
    CHECK(d.entry_probability(e) == doctest::Approx(0.6));
    e.lanes = 5;
    CHECK(d.entry_probability(e) == doctest::Approx(1.0)); // clamped
}
