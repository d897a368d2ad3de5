#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mcrts/kernel.hpp"
#include "mcrts/metrics.hpp"
#include "mcrts/scenario.hpp"

namespace mcrts {

/// Process exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitInvalidInput = 1, kExitIo = 2 };

struct RunConfig {
  std::string scenario_path;
  std::uint64_t seed = 42;
  Variant variant = Variant::Mcrts;
  std::string out_dir = "out";
  std::optional<std::string> policy;          // preset key or policy file
  std::vector<std::string> formats{"json", "csv"};  // report formats
};

/// Runs one simulation and writes trace.ndjson plus report.{json,csv} into
/// out_dir; prints the one-line summary to `out`.
int cmd_run(const RunConfig& config, std::ostream& out, std::ostream& err);

enum class LoadProfile { Light, Default, Rush };
std::optional<LoadProfile> parse_load(std::string_view s);

struct GenConfig {
  int grid_n = 10;
  std::uint64_t seed = 1;
  LoadProfile load = LoadProfile::Default;
  std::optional<std::string> out_path;  // stdout when unset
  /// Write the network to a sibling "<stem>.net.json" and reference it by path.
  bool split_network = false;
};

/// n x n grid scenario, fully determined by (n, seed, load).
/// Throws InvalidParameter when n < 2.
std::string generate_network(int grid_n, std::uint64_t seed);
std::string generate_scenario(int grid_n, std::uint64_t seed, LoadProfile load,
                              const std::optional<std::string>& network_ref = std::nullopt);
int cmd_gen(const GenConfig& config, std::ostream& out, std::ostream& err);

/// Loads and validates a scenario; prints a short description.
int cmd_validate(const std::string& scenario_path, std::ostream& out, std::ostream& err);

struct CompareRow {
  std::uint64_t seed = 0;
  Variant variant = Variant::Mcrts;
  bool ok = false;
  std::string error;
  std::size_t count = 0;                // C2+C3 requests
  std::vector<double> achieved;         // per C3 target, pooled C2+C3
  std::optional<double> mean_response_s;  // served C2+C3 requests
  double mortality_delta = 0.0;
  double disturbance_veh_s = 0.0;
};

/// Every (seed, variant) cell, rows ordered seed-major as given. Cells run
/// concurrently on up to `threads` workers (0 = hardware concurrency); a
/// failing cell is marked, never aborts the sweep.
std::vector<CompareRow> compare(const Scenario& scenario, const DeadlinePolicy& policy,
                                const std::vector<std::uint64_t>& seeds, const std::vector<Variant>& variants,
                                unsigned threads = 0);

/// Columns: seed,variant,status,count,achieved_1,achieved_2,mean_response_s,
/// mortality_delta,disturbance_veh_s. achieved_k is the pooled C2+C3 fraction
/// at the k-th C3 target; NA when absent.
std::string compare_csv(const std::vector<CompareRow>& rows);

struct CompareConfig {
  std::string scenario_path;
  std::vector<std::uint64_t> seeds{42};
  std::vector<Variant> variants{Variant::Mcrts, Variant::NoPreemption};
  std::optional<std::string> policy;
  std::optional<std::string> out_path;  // stdout when unset
  unsigned threads = 0;
};
int cmd_compare(const CompareConfig& config, std::ostream& out, std::ostream& err);

}  // namespace mcrts
