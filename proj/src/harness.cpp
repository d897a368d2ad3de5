#include "mcrts/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "mcrts/error.hpp"

namespace mcrts {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// Portable uniform draws: mt19937_64 output is fixed by the standard, the
/// library distributions are not.
class Draw {
 public:
  explicit Draw(std::uint64_t seed) : rng_(seed) {}
  double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(unit() * static_cast<double>(n)); }
  double exponential(double rate) { return -std::log1p(-unit()) / rate; }

 private:
  std::mt19937_64 rng_;
};

double round_to(double v, double step) { return std::round(v / step) * step; }

struct Profile {
  double congestion;       // mean on local streets
  double arterial_extra;   // added on two-lane arterials
  double queue_max;        // queued vehicles on arterials, uniform [0, queue_max]
  double pedestrians_max;  // per minute
  double requests_per_h;
  double walk_step;
  int ambulance_spacing;   // grid cells between lattice ambulances, 0 = n / 3
};

Profile profile(LoadProfile load) {
  switch (load) {
    case LoadProfile::Light: return {0.15, 0.10, 4.0, 20.0, 6.0, 0.01, 0};
    case LoadProfile::Default: return {0.35, 0.20, 8.0, 40.0, 10.0, 0.02, 0};
    // Saturated grid with a sparse ambulance lattice; the shipped reference scenario uses it.
    case LoadProfile::Rush: return {0.85, 0.0, 10.0, 60.0, 12.0, 0.02, 5};
  }
  return {};
}

std::string node_id(int r, int c) { return "r" + std::to_string(r) + "c" + std::to_string(c); }
std::string edge_id(int r1, int c1, int r2, int c2) { return node_id(r1, c1) + "-" + node_id(r2, c2); }
bool arterial(int line) { return line % 3 == 0; }

constexpr double kEdgeLength_m = 400.0;
constexpr double kSpeedLimit_mps = 13.9;
constexpr double kHorizon_s = 3600.0;

bool write_file(const fs::path& path, const std::string& body) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) return false;
  f << body;
  f.flush();
  return static_cast<bool>(f);
}

DeadlinePolicy effective_policy(const Scenario& s, const std::optional<std::string>& override_policy) {
  return override_policy ? load_policy(*override_policy) : s.policy;
}

std::string fmt_number(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

std::optional<LoadProfile> parse_load(std::string_view s) {
  if (s == "light") return LoadProfile::Light;
  if (s == "default") return LoadProfile::Default;
  if (s == "rush") return LoadProfile::Rush;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// gen

std::string generate_network(int n, std::uint64_t seed) {
  if (n < 2) throw Error(ErrorKind::InvalidParameter, "grid_n must be >= 2", "grid_n");
  Draw draw(seed ^ 0x6e6574ULL);
  json nodes = json::array();
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      json node{{"id", node_id(r, c)}};
      const bool interior = r > 0 && c > 0 && r < n - 1 && c < n - 1;
      if (interior) {
        node["signalized"] = true;
        node["signal"] = {{"cycle_s", 60.0}, {"green_window", {0.0, 30.0}}, {"offset_s", std::floor(draw.unit() * 60.0)}};
      }
      nodes.push_back(std::move(node));
    }
  json edges = json::array();
  auto link = [&](int r1, int c1, int r2, int c2, bool two_lane) {
    for (int dir = 0; dir < 2; ++dir) {
      const auto [a, b, x, y] = dir == 0 ? std::tuple{r1, c1, r2, c2} : std::tuple{r2, c2, r1, c1};
      edges.push_back({{"id", edge_id(a, b, x, y)},
                       {"from_node", node_id(a, b)},
                       {"to_node", node_id(x, y)},
                       {"length_m", kEdgeLength_m},
                       {"lanes", two_lane ? 2 : 1},
                       {"speed_limit_mps", kSpeedLimit_mps},
                       {"reverse_twin", edge_id(x, y, a, b)}});
    }
  };
  for (int r = 0; r < n; ++r)
    for (int c = 0; c + 1 < n; ++c) link(r, c, r, c + 1, arterial(r));
  for (int c = 0; c < n; ++c)
    for (int r = 0; r + 1 < n; ++r) link(r, c, r + 1, c, arterial(c));
  json doc{{"format", "mcrts-net/1"}, {"nodes", std::move(nodes)}, {"edges", std::move(edges)}};
  return doc.dump(2) + "\n";
}

std::string generate_scenario(int n, std::uint64_t seed, LoadProfile load, const std::optional<std::string>& network_ref) {
  const std::string net_text = generate_network(n, seed);
  const json net = json::parse(net_text);
  const Profile prof = profile(load);
  Draw draw(seed);

  json initial = json::array();
  for (const json& e : net["edges"]) {
    const bool two_lane = e["lanes"].get<int>() >= 2;
    const double base = prof.congestion + (two_lane ? prof.arterial_extra : 0.0);
    const double c = std::clamp(base + 0.3 * (draw.unit() - 0.5), 0.0, 0.95);
    json rec{{"edge", e["id"]}, {"congestion", round_to(c, 0.001)}};
    rec["pedestrian_flow"] = std::floor(draw.unit() * prof.pedestrians_max);
    if (two_lane) rec["queued_vehicles"] = static_cast<long>(std::floor(draw.unit() * (prof.queue_max + 1.0)));
    initial.push_back(std::move(rec));
  }

  // Ambulances spread over the grid on a coarse lattice; normal AVs at random.
  json fleet = json::array();
  const int stride = std::max(1, prof.ambulance_spacing > 0 ? prof.ambulance_spacing : n / 3);
  int amb = 0;
  for (int r = stride / 2; r < n; r += stride)
    for (int c = stride / 2; c < n; c += stride)
      fleet.push_back({{"id", "amb" + std::to_string(++amb)}, {"kind", "ambulance"}, {"node", node_id(r, c)}});
  const int cars = std::max(1, n * n / 25);
  for (int i = 0; i < cars; ++i) {
    const auto cell = static_cast<int>(draw.below(static_cast<std::size_t>(n * n)));
    fleet.push_back({{"id", "av" + std::to_string(i + 1)}, {"kind", "normal_av"}, {"node", node_id(cell / n, cell % n)}});
  }

  const std::string hospital = node_id(n / 2, n / 2);
  json requests = json::array();
  double t = 0.0;
  for (int i = 1;; ++i) {
    t += draw.exponential(prof.requests_per_h / 3600.0);
    if (t >= kHorizon_s - 600.0) break;
    const double u = draw.unit();
    const char* crit = u < 0.3 ? "C3" : u < 0.6 ? "C2" : u < 0.85 ? "C1" : "C0";
    const auto cell = static_cast<int>(draw.below(static_cast<std::size_t>(n * n)));
    json req{{"id", "q" + std::to_string(i)},
             {"release_s", std::floor(t)},
             {"criticality", crit},
             {"pickup", node_id(cell / n, cell % n)}};
    if (std::string_view(crit) == "C0") {
      const auto dst = static_cast<int>(draw.below(static_cast<std::size_t>(n * n)));
      req["mode"] = "E0";
      req["destination"] = node_id(dst / n, dst % n);
    } else {
      req["mode"] = "E1";
      if (std::string_view(crit) != "C1") req["destination"] = hospital;
    }
    requests.push_back(std::move(req));
  }

  json doc{{"format", "mcrts-scn/1"},
           {"network", network_ref ? json(*network_ref) : net},
           {"fleet", std::move(fleet)},
           {"requests", std::move(requests)},
           {"initial_state", std::move(initial)},
           {"updates", json::array()},
           {"background", {{"enabled", true}, {"step", prof.walk_step}}},
           {"policy", "nz"},
           {"routing", {{"k_routes", 3}}},
           {"scheduler", {{"reserved_vehicles", 0}, {"aging_s", 900.0}}},
           {"service", {{"on_scene_s", 300.0}}},
           {"horizon_s", kHorizon_s},
           {"tick_s", 10.0}};
  return doc.dump(2) + "\n";
}

int cmd_gen(const GenConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    if (cfg.split_network && !cfg.out_path) {
      err << "error: --split-network needs --out\n";
      return kExitInvalidInput;
    }
    if (!cfg.split_network) {
      const std::string body = generate_scenario(cfg.grid_n, cfg.seed, cfg.load);
      if (!cfg.out_path) {
        out << body;
        return kExitOk;
      }
      if (!write_file(*cfg.out_path, body)) {
        err << "error: cannot write '" << *cfg.out_path << "'\n";
        return kExitIo;
      }
      return kExitOk;
    }
    const fs::path scn(*cfg.out_path);
    const fs::path net = scn.parent_path() / (scn.stem().string() + ".net.json");
    if (!write_file(net, generate_network(cfg.grid_n, cfg.seed)) ||
        !write_file(scn, generate_scenario(cfg.grid_n, cfg.seed, cfg.load, net.filename().string()))) {
      err << "error: cannot write '" << scn.string() << "'\n";
      return kExitIo;
    }
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalidInput;
  }
}

// ---------------------------------------------------------------------------
// validate / run

int cmd_validate(const std::string& path, std::ostream& out, std::ostream& err) {
  try {
    Scenario s = load_scenario_file(path);
    out << "ok: " << s.net.node_count() << " nodes, " << s.net.edge_count() << " edges, " << s.fleet.size()
        << " vehicles, " << s.requests.size() << " requests, horizon " << fmt_number(s.horizon_s) << " s\n";
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalidInput;
  }
}

int cmd_run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  Scenario scenario;
  DeadlinePolicy policy;
  try {
    scenario = load_scenario_file(cfg.scenario_path);
    policy = effective_policy(scenario, cfg.policy);
    scenario.policy = policy;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalidInput;
  }
  for (const std::string& f : cfg.formats) {
    if (f != "json" && f != "csv") {
      err << "error: unknown report format '" << f << "'\n";
      return kExitInvalidInput;
    }
  }

  Trace trace = run(scenario, cfg.seed, cfg.variant);
  ComplianceReport report = compliance(trace, policy);

  const fs::path dir(cfg.out_dir);
  bool ok = write_file(dir / "trace.ndjson", trace_ndjson(trace));
  for (const std::string& f : cfg.formats)
    ok = ok && write_file(dir / ("report." + f), f == "json" ? report_json(report) : report_csv(report));
  if (!ok) {
    err << "error: cannot write outputs under '" << dir.string() << "'\n";
    return kExitIo;
  }
  out << summary_line(trace, report, policy) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// compare

std::vector<CompareRow> compare(const Scenario& scenario, const DeadlinePolicy& policy,
                                const std::vector<std::uint64_t>& seeds, const std::vector<Variant>& variants,
                                unsigned threads) {
  std::vector<CompareRow> rows;
  for (std::uint64_t s : seeds)
    for (Variant v : variants) {
      CompareRow r;
      r.seed = s;
      r.variant = v;
      rows.push_back(std::move(r));
    }

  Scenario sc = scenario;
  sc.policy = policy;
  auto cell = [&](CompareRow& row) {
    try {
      Trace trace = run(sc, row.seed, row.variant);
      ComplianceReport rep = compliance(trace, policy);
      const ClassReport& lt = rep.at("C2+C3");
      row.count = lt.count;
      for (const TargetResult& t : lt.targets) row.achieved.push_back(t.achieved);
      double sum = 0.0;
      std::size_t served = 0;
      for (const Outcome& o : trace.outcomes)
        if ((o.criticality == Criticality::C2 || o.criticality == Criticality::C3) && o.response_s) {
          sum += *o.response_s;
          ++served;
        }
      if (served) row.mean_response_s = sum / static_cast<double>(served);
      row.mortality_delta = rep.mortality_delta;
      row.disturbance_veh_s = rep.disturbance_veh_s;
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
  };

  unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(rows.size()));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < rows.size(); i = next++) cell(rows[i]);
    });
  for (auto& t : pool) t.join();
  return rows;
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
  std::string out =
      "seed,variant,status,count,achieved_1,achieved_2,mean_response_s,mortality_delta,disturbance_veh_s\n";
  for (const CompareRow& r : rows) {
    out += std::to_string(r.seed) + "," + std::string(to_string(r.variant)) + ",";
    if (!r.ok) {
      out += "failed,NA,NA,NA,NA,NA,NA\n";
      continue;
    }
    const bool any = r.count > 0;
    auto achieved = [&](std::size_t k) {
      return any && k < r.achieved.size() ? fmt_number(r.achieved[k]) : std::string("NA");
    };
    out += "ok," + std::to_string(r.count) + "," + achieved(0) + "," + achieved(1) + "," +
           (r.mean_response_s ? fmt_number(*r.mean_response_s) : std::string("NA")) + "," +
           fmt_number(r.mortality_delta) + "," + fmt_number(r.disturbance_veh_s) + "\n";
  }
  return out;
}

int cmd_compare(const CompareConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.seeds.empty() || cfg.variants.size() < 2) {
    err << "error: compare needs at least one seed and two variants\n";
    return kExitInvalidInput;
  }
  Scenario scenario;
  DeadlinePolicy policy;
  try {
    scenario = load_scenario_file(cfg.scenario_path);
    policy = effective_policy(scenario, cfg.policy);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalidInput;
  }
  const auto rows = compare(scenario, policy, cfg.seeds, cfg.variants, cfg.threads);
  for (const CompareRow& r : rows)
    if (!r.ok) err << "warning: seed " << r.seed << " variant " << to_string(r.variant) << " failed: " << r.error << "\n";
  const std::string csv = compare_csv(rows);
  if (!cfg.out_path) {
    out << csv;
    return kExitOk;
  }
  if (!write_file(*cfg.out_path, csv)) {
    err << "error: cannot write '" << *cfg.out_path << "'\n";
    return kExitIo;
  }
  return kExitOk;
}

}  // namespace mcrts
