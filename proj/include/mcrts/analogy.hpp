#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mcrts/network.hpp"
#include "mcrts/preemption.hpp"
#include "mcrts/router.hpp"

namespace mcrts {

// ---------------------------------------------------------------------------
// Traffic-domain inputs

enum class Mode { E0, E1 };
enum class Criticality { C0 = 0, C1 = 1, C2 = 2, C3 = 3 };
enum class VehicleKind { NormalAv, Ambulance, Fire, Police };
enum class VehicleStatus { Idle, EnRoute, Serving };

inline constexpr int kCriticalityCount = 4;
inline constexpr std::array<Criticality, kCriticalityCount> kAllCriticalities{Criticality::C0, Criticality::C1,
                                                                            Criticality::C2, Criticality::C3};

constexpr int ordinal(Criticality c) { return static_cast<int>(c); }
std::string_view to_string(Mode m);
std::string_view to_string(Criticality c);
std::string_view to_string(VehicleKind k);
std::string_view to_string(VehicleStatus s);
std::optional<Mode> parse_mode(std::string_view s);
std::optional<Criticality> parse_criticality(std::string_view s);
std::optional<VehicleKind> parse_vehicle_kind(std::string_view s);

/// A vehicle sits at `node`, or on `edge` at a fractional offset from its tail.
struct VehicleLocation {
  NodeIndex node = 0;
  std::optional<EdgeIndex> edge;
  double offset = 0.0;
};

struct Vehicle {
  std::string id;
  VehicleKind kind = VehicleKind::Ambulance;
  VehicleLocation location;
  VehicleStatus status = VehicleStatus::Idle;
};

/// One instance of the service function: mode, criticality, origin and
/// destination, vehicle kind, released at release_s.
struct EmergencyRequest {
  std::string id;
  double release_s = 0.0;
  Mode mode = Mode::E1;
  Criticality criticality = Criticality::C3;
  NodeIndex pickup = 0;
  std::optional<NodeIndex> destination;
  std::optional<VehicleKind> requested_kind;

  /// Throws InvalidParameter when mode and criticality disagree.
  void validate() const;
};

/// Whether a vehicle of `kind` may serve `req`. Normal AVs serve C0 and C1;
/// C2/C3 need the requested specialized kind (ambulance by default).
bool compatible(VehicleKind kind, const EmergencyRequest& req);

struct Target {
  double fraction = 0.0;
  double seconds = 0.0;

  friend bool operator==(const Target&, const Target&) = default;
};

/// Relative deadline per criticality (nullopt = unbounded) plus contractual
/// percentile targets.
struct DeadlinePolicy {
  std::string name = "nz";
  std::array<std::optional<double>, kCriticalityCount> deadline_s{std::nullopt, 1200.0, 480.0, 480.0};
  std::array<std::vector<Target>, kCriticalityCount> targets{
      std::vector<Target>{}, std::vector<Target>{}, std::vector<Target>{{0.5, 480.0}, {0.95, 1200.0}},
      std::vector<Target>{{0.5, 480.0}, {0.95, 1200.0}}};
  /// Multiplier turning the ETA estimate into the execution budget.
  double safety_margin = 1.0;

  /// Named presets: "nz", "uk", "usa", "au", "hk". Throws InvalidParameter.
  static DeadlinePolicy preset(std::string_view key);
  void validate() const;
};

/// Relative deadline in seconds; nullopt means unbounded.
std::optional<double> deadline_for(Criticality c, const DeadlinePolicy& policy);

// ---------------------------------------------------------------------------
// MCRTS image of a request

/// The request as a mixed-criticality task. The ETA matrix is indexed by
/// (candidate vehicle, route slot, pre-emption level) and doubles as the
/// execution budget. Missing route slots hold nullopt.
struct MCTask {
  std::string task_id;
  double release_s = 0.0;
  Mode mode = Mode::E1;
  Criticality criticality = Criticality::C3;
  std::optional<double> deadline_s;
  double computed_at_s = 0.0;
  NodeIndex pickup = 0;

  std::vector<std::string> vehicles;
  std::vector<double> lead_s;  // time to finish a partially driven edge
  std::vector<std::vector<Route>> routes;
  std::size_t route_slots = 0;
  std::vector<Eta> eta;
  std::vector<double> disturbance;

  std::size_t vehicle_count() const { return vehicles.size(); }
  std::size_t index(std::size_t v, std::size_t r, Level p) const {
    return (v * route_slots + r) * kLevelCount + static_cast<std::size_t>(ordinal(p));
  }
  Eta eta_at(std::size_t v, std::size_t r, Level p) const { return eta.at(index(v, r, p)); }
  double disturbance_at(std::size_t v, std::size_t r, Level p) const { return disturbance.at(index(v, r, p)); }
  /// Absolute deadline (infinity when unbounded).
  double absolute_deadline_s() const;
  /// E0 tasks never escalate past P0.
  Level max_level() const { return mode == Mode::E0 ? Level::P0 : Level::P4; }
};

struct TaskOptions {
  std::size_t k_routes = 3;
  PreemptionConfig preemption;
  RouterOptions router;
};

/// Routes worth evaluating from src to dst: the k base-overlay routes plus
/// the fastest route under network-wide P4, deduplicated.
std::vector<Route> candidate_routes(const RoadNetwork& net, const TrafficState& state, const NetworkOverlay& overlay,
                                    NodeIndex src, NodeIndex dst, double t_s, const TaskOptions& opts);

/// Maps a request onto an MCTask, evaluating the ETA matrix at time now_s
/// for every idle, kind-compatible vehicle in `fleet`.
/// Throws NoCandidateVehicle or NoRoute (every entry blocked).
MCTask to_task(const EmergencyRequest& request, const std::vector<Vehicle>& fleet, const RoadNetwork& net,
               const TrafficState& state, const NetworkOverlay& overlay, const DeadlinePolicy& policy, double now_s,
               const TaskOptions& opts = {});

// ---------------------------------------------------------------------------
// Scheduler outputs and their traffic-domain images

struct AssignTask {
  std::string task;
  std::string vehicle;
  Route route;
  Level level = Level::P0;
};
struct AssignNewDeadline {
  std::string task;
  double new_deadline_s = 0.0;  // absolute
};
struct QueueTask {
  std::string task;
};
struct AlterPriority {
  std::string task;
  int new_priority = 0;
};
struct AssignPreemption {
  std::string task;
  Level level = Level::P0;
};

using ScheduleDecision = std::variant<AssignTask, AssignNewDeadline, QueueTask, AlterPriority, AssignPreemption>;

struct DispatchVehicle {
  std::string request;
  std::string vehicle;
  Route route;
};
struct ExtendTarget {
  std::string request;
  double new_deadline_s = 0.0;
};
struct HoldRequest {
  std::string request;
};
struct Reprioritize {
  std::string request;
  int priority = 0;
};
struct ActivatePreemption {
  std::string request;
  Level level = Level::P0;
};

using TrafficCommand = std::variant<DispatchVehicle, ExtendTarget, HoldRequest, Reprioritize, ActivatePreemption>;

std::string_view decision_name(const ScheduleDecision& d);
std::string_view command_name(const TrafficCommand& c);
const std::string& decision_task(const ScheduleDecision& d);

/// Inverse task function. The first command is the image of the decision's
/// variant; AssignTask above P0 additionally yields ActivatePreemption.
std::vector<TrafficCommand> from_decision(const ScheduleDecision& decision);

}  // namespace mcrts
