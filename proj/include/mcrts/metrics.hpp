#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mcrts/analogy.hpp"
#include "mcrts/kernel.hpp"

namespace mcrts {

struct TargetResult {
  Target target;
  double achieved = 0.0;
  bool pass = false;
};

/// Compliance of one criticality class (or the pooled C2+C3 group).
struct ClassReport {
  std::string name;
  std::size_t count = 0;
  std::size_t unserved = 0;
  std::optional<double> p50, p90, p95;  // nearest rank; nullopt when it lands on an unserved request
  std::vector<TargetResult> targets;

  bool applicable() const { return count > 0; }
};

struct ComplianceReport {
  std::string policy;
  std::vector<ClassReport> classes;  // C0..C3, then "C2+C3"
  double mortality_delta = 0.0;
  double disturbance_veh_s = 0.0;
  std::size_t unserved = 0;

  const ClassReport& at(std::string_view name) const;
};

/// Achieved fraction per (criticality, target); unserved requests count as
/// misses at every target.
ComplianceReport compliance(const Trace& trace, const DeadlinePolicy& policy);

/// Expected fractional mortality increase: 1% per minute beyond the
/// deadline, summed over C2/C3 requests.
double mortality_delta(const Trace& trace, const DeadlinePolicy& policy);

/// Vehicle-seconds charged by every pre-emption activation in the log.
double disturbance_total(const Trace& trace);

/// Nearest-rank percentile (q in (0, 1]) with unserved entries as +inf.
std::optional<double> percentile(std::vector<std::optional<double>> responses, double q);

std::string report_json(const ComplianceReport& report);
/// Columns: criticality,count,target_fraction,target_s,achieved,pass
std::string report_csv(const ComplianceReport& report);
/// "C3: 4/4 within 480s | mortality_delta=0.000 | disturbance=150 veh-s"
std::string summary_line(const Trace& trace, const ComplianceReport& report, const DeadlinePolicy& policy);

}  // namespace mcrts
