#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mcrts/analogy.hpp"

namespace mcrts {

/// Priority key overrides produced by AlterPriority, keyed by task id. The
/// value replaces the task's criticality ordinal when ordering.
using PriorityOverrides = std::map<std::string, int>;

/// Deterministic order: effective priority desc, absolute deadline asc, id asc.
std::vector<const MCTask*> priority_order(const std::vector<MCTask>& tasks, const PriorityOverrides& overrides = {});

struct AdmitOptions {
  /// Highest ladder level the scheduler may use (P0 pins the no-pre-emption baseline).
  Level max_level = Level::P4;
  /// Specialized vehicles held back from C0/C1 work.
  std::size_t reserved_vehicles = 0;
};

/// Gives every task exactly one disposition: AssignTask (optionally with
/// AssignNewDeadline when no choice meets the deadline) or QueueTask.
/// Candidates minimize (level, ETA, disturbance) lexicographically subject to
/// now + ETA <= deadline; vehicle and route order break remaining ties.
std::vector<ScheduleDecision> admit(const std::vector<MCTask>& pending, const std::vector<Vehicle>& fleet,
                                    double now_s, const AdmitOptions& opts = {},
                                    const PriorityOverrides& overrides = {});

/// A dispatched task being driven. `route` is the not-yet-entered remainder,
/// starting at resume_node at resume_s (the exit time of the committed edge,
/// or now when the vehicle waits at a node).
struct ActiveService {
  std::string task_id;
  Mode mode = Mode::E1;
  Criticality criticality = Criticality::C3;
  double release_s = 0.0;
  double deadline_abs_s = 0.0;
  std::string vehicle;
  Route route;
  NodeIndex resume_node = 0;
  double resume_s = 0.0;
  NodeIndex pickup = 0;
  Level level = Level::P0;
  double dispatch_s = 0.0;
  double last_advised_eta_s = 0.0;
};

struct MonitorContext {
  const RoadNetwork& net;
  const TrafficState& state;
  TaskOptions task;
  Level max_level = Level::P4;
};

enum class MonitorAction { NoAction, Reroute, Escalate, PredictedMiss };
std::string_view to_string(MonitorAction a);

struct MonitorOutcome {
  MonitorAction action = MonitorAction::NoAction;
  Level level = Level::P0;
  std::optional<Route> route;  // set when the remainder changes
  Eta eta_s;                   // remaining time from now under the outcome
  std::vector<ScheduleDecision> decisions;
};

/// Compares now + refreshed ETA with the deadline. On a predicted miss tries,
/// level by level from the current one, the current remainder and fresh
/// alternative routes; the first level with a feasible option wins. At the
/// top level with no feasible option the best one is taken along with a
/// new deadline.
MonitorOutcome monitor(const ActiveService& active, double now_s, Eta refreshed_eta_s, const MonitorContext& ctx);

}  // namespace mcrts
