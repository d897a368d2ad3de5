#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mcrts/error.hpp"
#include "mcrts/harness.hpp"

using namespace mcrts;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mcrts_test_harness" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& body) { std::ofstream(p, std::ios::binary) << body; }

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string line; std::getline(is, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("gen: a 2x2 grid has 4 nodes and 8 directed edges") {
  const json net = json::parse(generate_network(2, 1));
  CHECK(net["nodes"].size() == 4);
  CHECK(net["edges"].size() == 8);
  const RoadNetwork parsed = load_network(net.dump());
  for (EdgeIndex e = 0; e < parsed.edge_count(); ++e) CHECK(parsed.edge(e).reverse_twin.has_value());
  CHECK_THROWS_AS(generate_network(1, 1), Error);
}

TEST_CASE("gen: n x n grid shape, determinism and validity") {
  for (int n : {3, 5, 10}) {
    const json net = json::parse(generate_network(n, 3));
    CHECK(net["nodes"].size() == static_cast<std::size_t>(n * n));
    CHECK(net["edges"].size() == static_cast<std::size_t>(4 * n * (n - 1)));
  }
  CHECK(generate_scenario(10, 7, LoadProfile::Default) == generate_scenario(10, 7, LoadProfile::Default));
  CHECK(generate_scenario(10, 7, LoadProfile::Default) != generate_scenario(10, 8, LoadProfile::Default));
  for (LoadProfile load : {LoadProfile::Light, LoadProfile::Default, LoadProfile::Rush}) {
    const Scenario s = load_scenario(generate_scenario(10, 7, load));
    CHECK(s.net.node_count() == 100);
    CHECK_FALSE(s.fleet.empty());
  }
  CHECK(parse_load("rush") == LoadProfile::Rush);
  CHECK_FALSE(parse_load("gridlock").has_value());
}

TEST_CASE("validate: generated file is accepted, broken inputs exit 1") {
  const fs::path dir = scratch("validate");
  GenConfig g;
  g.grid_n = 10;
  g.seed = 7;
  g.out_path = (dir / "s.json").string();
  std::ostringstream out, err;
  REQUIRE(cmd_gen(g, out, err) == kExitOk);
  CHECK(cmd_validate(*g.out_path, out, err) == kExitOk);
  CHECK(out.str().rfind("ok: 100 nodes, 360 edges", 0) == 0);

  json doc = json::parse(slurp(dir / "s.json"));
  doc["network"] = "missing.net.json";
  spit(dir / "broken.json", doc.dump());
  std::ostringstream out2, err2;
  CHECK(cmd_validate((dir / "broken.json").string(), out2, err2) == kExitInvalidInput);
  CHECK(err2.str().find("network") != std::string::npos);
  CHECK(cmd_validate((dir / "absent.json").string(), out2, err2) == kExitInvalidInput);
}

TEST_CASE("run: writes trace and reports, prints the summary line") {
  const fs::path dir = scratch("run");
  spit(dir / "s.json", generate_scenario(5, 2, LoadProfile::Default));
  RunConfig cfg;
  cfg.scenario_path = (dir / "s.json").string();
  cfg.seed = 9;
  cfg.out_dir = (dir / "out").string();
  std::ostringstream out, err;
  REQUIRE(cmd_run(cfg, out, err) == kExitOk);
  CHECK(out.str().rfind("C3: ", 0) == 0);
  CHECK(fs::exists(dir / "out" / "trace.ndjson"));
  CHECK(fs::exists(dir / "out" / "report.json"));
  CHECK(slurp(dir / "out" / "report.csv").rfind("criticality,count,target_fraction,target_s,achieved,pass\n", 0) == 0);

  // The trace file is a pure function of (scenario, seed, variant).
  const Trace direct = run(load_scenario_file(cfg.scenario_path), 9);
  CHECK(slurp(dir / "out" / "trace.ndjson") == trace_ndjson(direct));

  SUBCASE("csv only") {
    cfg.out_dir = (dir / "csv_only").string();
    cfg.formats = {"csv"};
    REQUIRE(cmd_run(cfg, out, err) == kExitOk);
    CHECK(fs::exists(dir / "csv_only" / "report.csv"));
    CHECK_FALSE(fs::exists(dir / "csv_only" / "report.json"));
  }
  SUBCASE("unknown policy preset is invalid input") {
    cfg.policy = "atlantis";
    CHECK(cmd_run(cfg, out, err) == kExitInvalidInput);
  }
  SUBCASE("unwritable output is an I/O error") {
    spit(dir / "blocker", "x");
    cfg.out_dir = (dir / "blocker" / "sub").string();
    CHECK(cmd_run(cfg, out, err) == kExitIo);
  }
}

TEST_CASE("compare: one row per (seed, variant), cells equal direct runs") {
  const Scenario s = load_scenario(generate_scenario(6, 5, LoadProfile::Rush));
  const DeadlinePolicy nz = DeadlinePolicy::preset("nz");
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const std::vector<Variant> variants{Variant::Mcrts, Variant::NoPreemption, Variant::Mcrts};
  const auto rows = compare(s, nz, seeds, variants, 4);
  REQUIRE(rows.size() == 9);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].seed == seeds[i / 3]);
    CHECK(rows[i].variant == variants[i % 3]);
    CHECK(rows[i].ok);
    const Trace t = run(s, rows[i].seed, rows[i].variant);
    const auto rep = compliance(t, nz);
    CHECK(rows[i].count == rep.at("C2+C3").count);
    CHECK(rows[i].mortality_delta == rep.mortality_delta);
    CHECK(rows[i].disturbance_veh_s == rep.disturbance_veh_s);
    REQUIRE(rows[i].achieved.size() == 2);
    CHECK(rows[i].achieved[0] == rep.at("C2+C3").targets[0].achieved);
  }
  // Duplicate variants produce identical rows.
  CHECK(rows[0].achieved == rows[2].achieved);
  CHECK(rows[0].mean_response_s == rows[2].mean_response_s);
  // Single-threaded sweep matches the concurrent one.
  const auto serial = compare(s, nz, seeds, variants, 1);
  CHECK(compare_csv(serial) == compare_csv(rows));

  const auto lines = split_lines(compare_csv(rows));
  REQUIRE(lines.size() == 10);
  CHECK(lines[0] == "seed,variant,status,count,achieved_1,achieved_2,mean_response_s,mortality_delta,disturbance_veh_s");
  CHECK(lines[1].rfind("1,mcrts,ok,", 0) == 0);
  CHECK(lines[2].rfind("1,no_preemption,ok,", 0) == 0);
}

TEST_CASE("compare command argument checks") {
  CompareConfig cfg;
  cfg.scenario_path = "/nonexistent/s.json";
  std::ostringstream out, err;
  cfg.variants = {Variant::Mcrts};
  CHECK(cmd_compare(cfg, out, err) == kExitInvalidInput);
  cfg.variants = {Variant::Mcrts, Variant::NoPreemption};
  CHECK(cmd_compare(cfg, out, err) == kExitInvalidInput);
}
