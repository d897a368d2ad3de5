#include "mcrts/analogy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "mcrts/error.hpp"

namespace mcrts {

std::string_view to_string(Mode m) { return m == Mode::E0 ? "E0" : "E1"; }

std::string_view to_string(Criticality c) {
  switch (c) {
    case Criticality::C0: return "C0";
    case Criticality::C1: return "C1";
    case Criticality::C2: return "C2";
    case Criticality::C3: return "C3";
  }
  return "C?";
}

std::string_view to_string(VehicleKind k) {
  switch (k) {
    case VehicleKind::NormalAv: return "normal_av";
    case VehicleKind::Ambulance: return "ambulance";
    case VehicleKind::Fire: return "fire";
    case VehicleKind::Police: return "police";
  }
  return "";
}

std::string_view to_string(VehicleStatus s) {
  switch (s) {
    case VehicleStatus::Idle: return "idle";
    case VehicleStatus::EnRoute: return "en_route";
    case VehicleStatus::Serving: return "serving";
  }
  return "";
}

std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "E0") return Mode::E0;
  if (s == "E1") return Mode::E1;
  return std::nullopt;
}

std::optional<Criticality> parse_criticality(std::string_view s) {
  for (Criticality c : kAllCriticalities)
    if (to_string(c) == s) return c;
  return std::nullopt;
}

std::optional<VehicleKind> parse_vehicle_kind(std::string_view s) {
  for (VehicleKind k : {VehicleKind::NormalAv, VehicleKind::Ambulance, VehicleKind::Fire, VehicleKind::Police})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

void EmergencyRequest::validate() const {
  if (mode == Mode::E0 && criticality != Criticality::C0)
    throw Error(ErrorKind::InvalidParameter, "normal-mode request must have criticality C0", id);
  if (criticality != Criticality::C0 && mode != Mode::E1)
    throw Error(ErrorKind::InvalidParameter, "critical request must use emergency mode", id);
  if (mode == Mode::E0 && !destination)
    throw Error(ErrorKind::InvalidParameter, "normal-mode request needs a destination", id);
  if (!std::isfinite(release_s) || release_s < 0.0)
    throw Error(ErrorKind::InvalidParameter, "release time must be finite and >= 0", id);
}

bool compatible(VehicleKind kind, const EmergencyRequest& req) {
  const VehicleKind wanted = req.requested_kind.value_or(VehicleKind::Ambulance);
  switch (req.criticality) {
    case Criticality::C0:
      return kind == VehicleKind::NormalAv || (req.requested_kind && kind == *req.requested_kind);
    case Criticality::C1:
      return kind == VehicleKind::NormalAv || kind == wanted;
    case Criticality::C2:
    case Criticality::C3:
      return kind != VehicleKind::NormalAv && kind == (wanted == VehicleKind::NormalAv ? VehicleKind::Ambulance : wanted);
  }
  return false;
}

DeadlinePolicy DeadlinePolicy::preset(std::string_view key) {
  DeadlinePolicy p;
  p.name = std::string(key);
  auto life_threatening = [&p](std::vector<Target> targets) {
    const double deadline = targets.front().seconds;
    for (Criticality c : {Criticality::C2, Criticality::C3}) {
      p.targets[ordinal(c)] = targets;
      p.deadline_s[ordinal(c)] = deadline;
    }
  };
  if (key == "nz") {
    life_threatening({{0.5, 480.0}, {0.95, 1200.0}});
  } else if (key == "uk") {
    life_threatening({{0.75, 480.0}});
  } else if (key == "usa") {
    life_threatening({{0.90, 539.0}});
  } else if (key == "au") {
    life_threatening({{0.5, 600.0}});
  } else if (key == "hk") {
    life_threatening({{0.92, 720.0}});
  } else {
    throw Error(ErrorKind::InvalidParameter, "unknown policy preset '" + std::string(key) + "'");
  }
  return p;
}

void DeadlinePolicy::validate() const {
  for (Criticality c : kAllCriticalities) {
    const std::string where = std::string(to_string(c));
    if (auto d = deadline_s[ordinal(c)]; d && !(*d > 0.0))
      throw Error(ErrorKind::InvalidParameter, "deadline must be positive", "deadlines." + where);
    const auto& t = targets[ordinal(c)];
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!(t[i].fraction > 0.0 && t[i].fraction <= 1.0))
        throw Error(ErrorKind::InvalidParameter, "target fraction must lie in (0, 1]", "targets." + where);
      if (!(t[i].seconds > 0.0))
        throw Error(ErrorKind::InvalidParameter, "target seconds must be positive", "targets." + where);
      if (i > 0 && t[i].seconds < t[i - 1].seconds)
        throw Error(ErrorKind::InvalidParameter, "targets must be sorted by seconds", "targets." + where);
    }
  }
  if (!(safety_margin > 0.0)) throw Error(ErrorKind::InvalidParameter, "safety_margin must be positive");
}

std::optional<double> deadline_for(Criticality c, const DeadlinePolicy& policy) {
  return policy.deadline_s[ordinal(c)];
}

double MCTask::absolute_deadline_s() const {
  return deadline_s ? release_s + *deadline_s : std::numeric_limits<double>::infinity();
}

std::vector<Route> candidate_routes(const RoadNetwork& net, const TrafficState& state, const NetworkOverlay& overlay,
                                    NodeIndex src, NodeIndex dst, double t_s, const TaskOptions& opts) {
  std::vector<Route> out;
  try {
    out = k_routes(net, state, overlay, src, dst, t_s, opts.k_routes, opts.router);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoRoute) throw;
  }
  NetworkOverlay boosted = network_wide(Level::P4, net, state, opts.preemption);
  for (const auto& [e, o] : overlay.entries())
    if (!boosted.find(e)) boosted.set(e, o);
  try {
    Route r = fastest_route(net, state, boosted, src, dst, t_s, opts.router);
    const bool dup = std::any_of(out.begin(), out.end(), [&](const Route& x) { return x.same_edges(r); });
    if (!dup) {
      // Keep the route's own timing under the base overlay when it has one.
      if (auto timed = retime(net, r, t_s, state, overlay)) r = *timed;
      out.push_back(std::move(r));
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoRoute) throw;
  }
  return out;
}

MCTask to_task(const EmergencyRequest& request, const std::vector<Vehicle>& fleet, const RoadNetwork& net,
               const TrafficState& state, const NetworkOverlay& overlay, const DeadlinePolicy& policy, double now_s,
               const TaskOptions& opts) {
  request.validate();
  MCTask task;
  task.task_id = request.id;
  task.release_s = request.release_s;
  task.mode = request.mode;
  task.criticality = request.criticality;
  task.deadline_s = deadline_for(request.criticality, policy);
  task.computed_at_s = now_s;
  task.pickup = request.pickup;

  for (const Vehicle& v : fleet) {
    if (v.status != VehicleStatus::Idle || !compatible(v.kind, request)) continue;
    NodeIndex start = v.location.node;
    double lead = 0.0;
    if (v.location.edge) {
      const EdgeIndex e = *v.location.edge;
      auto tt = traversal_time(net, e, now_s, state, overlay);
      if (!tt) continue;
      lead = (1.0 - v.location.offset) * *tt;
      start = net.edge(e).to;
    }
    task.vehicles.push_back(v.id);
    task.lead_s.push_back(lead);
    task.routes.push_back(candidate_routes(net, state, overlay, start, request.pickup, now_s + lead, opts));
    task.route_slots = std::max(task.route_slots, task.routes.back().size());
  }
  if (task.vehicles.empty())
    throw Error(ErrorKind::NoCandidateVehicle, "no idle vehicle compatible with request", request.id);

  const std::size_t cells = task.vehicles.size() * task.route_slots * kLevelCount;
  task.eta.assign(cells, std::nullopt);
  task.disturbance.assign(cells, 0.0);
  bool any_finite = false;
  for (std::size_t v = 0; v < task.vehicles.size(); ++v) {
    for (std::size_t r = 0; r < task.routes[v].size(); ++r) {
      const Route& route = task.routes[v][r];
      const double depart = now_s + task.lead_s[v];
      for (Level p : kAllLevels) {
        PreemptionResult pre = apply(p, route, net, state, depart, opts.preemption);
        NetworkOverlay combined = overlay;
        combined.merge(pre.overlay);
        Eta eta = route_eta(net, route, depart, state, combined);
        if (!eta) continue;
        task.eta[task.index(v, r, p)] = policy.safety_margin * (task.lead_s[v] + *eta);
        task.disturbance[task.index(v, r, p)] = pre.disturbance.total();
        any_finite = true;
      }
    }
  }
  if (!any_finite) throw Error(ErrorKind::NoRoute, "every candidate route is blocked", request.id);
  return task;
}

// ---------------------------------------------------------------------------

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

std::string_view decision_name(const ScheduleDecision& d) {
  return std::visit(overloaded{[](const AssignTask&) { return std::string_view("AssignTask"); },
                               [](const AssignNewDeadline&) { return std::string_view("AssignNewDeadline"); },
                               [](const QueueTask&) { return std::string_view("QueueTask"); },
                               [](const AlterPriority&) { return std::string_view("AlterPriority"); },
                               [](const AssignPreemption&) { return std::string_view("AssignPreemption"); }},
                    d);
}

std::string_view command_name(const TrafficCommand& c) {
  return std::visit(overloaded{[](const DispatchVehicle&) { return std::string_view("DispatchVehicle"); },
                               [](const ExtendTarget&) { return std::string_view("ExtendTarget"); },
                               [](const HoldRequest&) { return std::string_view("HoldRequest"); },
                               [](const Reprioritize&) { return std::string_view("Reprioritize"); },
                               [](const ActivatePreemption&) { return std::string_view("ActivatePreemption"); }},
                    c);
}

const std::string& decision_task(const ScheduleDecision& d) {
  return std::visit([](const auto& x) -> const std::string& { return x.task; }, d);
}

std::vector<TrafficCommand> from_decision(const ScheduleDecision& decision) {
  return std::visit(
      overloaded{
          [](const AssignTask& d) {
            std::vector<TrafficCommand> out{DispatchVehicle{d.task, d.vehicle, d.route}};
            if (d.level != Level::P0) out.emplace_back(ActivatePreemption{d.task, d.level});
            return out;
          },
          [](const AssignNewDeadline& d) {
            return std::vector<TrafficCommand>{ExtendTarget{d.task, d.new_deadline_s}};
          },
          [](const QueueTask& d) { return std::vector<TrafficCommand>{HoldRequest{d.task}}; },
          [](const AlterPriority& d) { return std::vector<TrafficCommand>{Reprioritize{d.task, d.new_priority}}; },
          [](const AssignPreemption& d) { return std::vector<TrafficCommand>{ActivatePreemption{d.task, d.level}}; },
      },
      decision);
}

}  // namespace mcrts
