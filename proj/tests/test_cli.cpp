#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tsl/cli.hpp"
#include "tsl/harness.hpp"

using namespace tsl;

namespace {

std::string scenario_path(const char *name) { return std::string(TSL_SCENARIO_DIR) + "/" + name; }

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun run_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = cli_main(args, out, err);
    return {code, out.str(), err.str()};
}

std::string temp_dir(const char *name) {
    auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

} // namespace

TEST_CASE("validate: ok on bundled scenarios, nonzero naming the offender otherwise") {
    CliRun ok = run_cli({"validate", scenario_path("single_intersection.json")});
    CHECK(ok.code == 0);
    CHECK(ok.out.find("1 intersections") != std::string::npos);

    std::string dir = temp_dir("tsl_cli_validate");
    std::string bad_path = dir + "/bad.json";
    std::ofstream(bad_path) << R"({
      "schema": 1,
      "nodes": [{"id":"a","x":0,"y":0}],
      "edges": [{"id":"e1","from":"a","to":"X","lanes":1,"length_m":10,"speed_mps":5}],
      "intersections": [],
      "demand": {"rate_per_lane_vps": 0},
      "timing": {"cycle_s": 60, "yellow_total_s": 6}
    })";
    CliRun bad = run_cli({"validate", bad_path});
    CHECK(bad.code == 3);
    CHECK(bad.err.find("X") != std::string::npos);
}

TEST_CASE("validate --routes dumps the weighted route table") {
    CliRun r = run_cli({"validate", scenario_path("single_intersection.json"), "--routes"});
    CHECK(r.code == 0);
    // matches the library's own weighting
    Scenario sc = load_scenario(scenario_path("single_intersection.json"));
    for (const Route &route : sc.routes) {
        std::string row = route.entry_edge() + ",";
        CHECK(r.out.find(format_double(route.weight)) != std::string::npos);
        CHECK(r.out.find(row) != std::string::npos);
    }
}

TEST_CASE("usage errors exit with code 2") {
    CHECK(run_cli({}).code == 2);
    CHECK(run_cli({"train"}).code == 2);                           // missing scenario
    CHECK(run_cli({"train", "x.json", "--seeds", "0"}).code == 2); // zero runs
    CHECK(run_cli({"evaluate", scenario_path("single_intersection.json")}).code == 2); // missing method
    CHECK(run_cli({"no-such-command"}).code == 2);
}

TEST_CASE("train smoke run writes the full artifact layout and reruns identically") {
    std::string dir = temp_dir("tsl_cli_train");
    std::vector<std::string> args = {"--seed", "9",      "--out",    dir,
                                     "train",  scenario_path("single_intersection_dominant.json"),
                                     "--seeds", "1",     "--cycles", "25"};
    // shrink the warmup through cycles>=warmup: 25 cycles with default warmup
    // 100 would be rejected, so pass a tiny run through the library instead
    CliRun r = run_cli({"--seed", "9", "--out", dir, "train",
                        scenario_path("single_intersection_dominant.json"), "--seeds", "1", "--cycles", "120"});
    CHECK(r.code == 0);
    for (const char *f : {"config.json", "monitor.csv", "checkpoint.json", "trips.csv", "events.jsonl", "plans_i0.csv"})
        CHECK(std::filesystem::exists(dir + "/runs/0000/" + std::string(f)));

    std::string dir2 = temp_dir("tsl_cli_train2");
    CliRun r2 = run_cli({"--seed", "9", "--out", dir2, "train",
                         scenario_path("single_intersection_dominant.json"), "--seeds", "1", "--cycles", "120"});
    CHECK(r2.code == 0);
    auto slurp = [](const std::string &p) {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    CHECK(slurp(dir + "/runs/0000/monitor.csv") == slurp(dir2 + "/runs/0000/monitor.csv"));
    CHECK(slurp(dir + "/runs/0000/checkpoint.json") == slurp(dir2 + "/runs/0000/checkpoint.json"));
    (void)args;
}

TEST_CASE("compare with a single method skips the statistics with a notice") {
    std::string dir = temp_dir("tsl_cli_compare_single");
    CliRun r = run_cli({"--seed", "4", "--out", dir, "compare", scenario_path("single_intersection.json"),
                        "--methods", "static:3", "--eval-seeds", "2", "--warmup-cycles", "2", "--eval-cycles", "10"});
    CHECK(r.code == 0);
    CHECK(r.out.find("notice") != std::string::npos);
    CHECK(std::filesystem::exists(dir + "/report/single_intersection/summary.csv"));
    CHECK_FALSE(std::filesystem::exists(dir + "/report/single_intersection/anova.json"));
}

TEST_CASE("compare emits summary rows matching a descriptive recomputation") {
    std::string dir = temp_dir("tsl_cli_compare");
    CliRun r = run_cli({"--seed", "4", "--out", dir, "--json", "compare", scenario_path("single_intersection.json"),
                        "--methods", "static:3,maxpressure", "--eval-seeds", "3", "--warmup-cycles", "3",
                        "--eval-cycles", "20", "--threads", "2"});
    CHECK(r.code == 0);
    std::string report = dir + "/report/single_intersection";
    for (const char *f : {"summary.csv", "anova.json", "tukey.csv", "kde_travel_time.csv"})
        CHECK(std::filesystem::exists(report + "/" + std::string(f)));

    // recompute the static:3 row from the persisted raw trips
    std::vector<double> travel;
    for (int k = 0; k < 3; ++k) {
        std::ifstream in(report + "/trips/static_3_r" + std::to_string(k) + ".csv");
        REQUIRE(in.good());
        std::string line;
        std::getline(in, line); // header
        while (std::getline(in, line)) {
            std::stringstream ss(line);
            std::string field;
            std::vector<std::string> fields;
            while (std::getline(ss, field, ',')) fields.push_back(field);
            if (fields[6] == "1") continue;            // teleported
            if (std::stoll(fields[1]) < 3 * 60) continue; // warmup
            travel.push_back(std::stod(fields[3]));
        }
    }
    DescriptiveStats d = descriptive(travel);
    std::ifstream sum(report + "/summary.csv");
    std::string line, static_row;
    while (std::getline(sum, line))
        if (line.rfind("static:3,", 0) == 0) static_row = line;
    REQUIRE(!static_row.empty());
    CHECK(static_row.find(format_double(d.mean)) != std::string::npos);
    CHECK(static_row.find(format_double(d.stddev)) != std::string::npos);
}

TEST_CASE("evaluate subcommand reports a result line") {
    std::string dir = temp_dir("tsl_cli_eval");
    CliRun r = run_cli({"--out", dir, "evaluate", scenario_path("single_intersection.json"), "--method", "static:2",
                        "--eval-seeds", "2", "--warmup-cycles", "2", "--eval-cycles", "10"});
    CHECK(r.code == 0);
    CHECK(r.out.find("static:2") != std::string::npos);
}
