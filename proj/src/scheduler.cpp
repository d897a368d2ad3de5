#include "mcrts/scheduler.hpp"

#include <algorithm>
#include <set>
#include <tuple>

namespace mcrts {

std::string_view to_string(MonitorAction a) {
  switch (a) {
    case MonitorAction::NoAction: return "NoAction";
    case MonitorAction::Reroute: return "Reroute";
    case MonitorAction::Escalate: return "Escalate";
    case MonitorAction::PredictedMiss: return "PredictedMiss";
  }
  return "";
}

std::vector<const MCTask*> priority_order(const std::vector<MCTask>& tasks, const PriorityOverrides& overrides) {
  std::vector<const MCTask*> order;
  order.reserve(tasks.size());
  for (const MCTask& t : tasks) order.push_back(&t);
  auto key = [&](const MCTask* t) {
    auto it = overrides.find(t->task_id);
    const int priority = it != overrides.end() ? it->second : ordinal(t->criticality);
    return std::make_tuple(-priority, t->absolute_deadline_s(), std::cref(t->task_id));
  };
  std::stable_sort(order.begin(), order.end(), [&](const MCTask* a, const MCTask* b) { return key(a) < key(b); });
  return order;
}

std::vector<ScheduleDecision> admit(const std::vector<MCTask>& pending, const std::vector<Vehicle>& fleet,
                                    double now_s, const AdmitOptions& opts, const PriorityOverrides& overrides) {
  std::vector<ScheduleDecision> decisions;
  std::set<std::string> taken;
  std::size_t specialized_idle = static_cast<std::size_t>(std::count_if(fleet.begin(), fleet.end(), [](const Vehicle& v) {
    return v.status == VehicleStatus::Idle && v.kind != VehicleKind::NormalAv;
  }));

  auto find_vehicle = [&](const std::string& id) -> const Vehicle* {
    auto it = std::find_if(fleet.begin(), fleet.end(), [&](const Vehicle& v) { return v.id == id; });
    return it == fleet.end() ? nullptr : &*it;
  };

  for (const MCTask* task : priority_order(pending, overrides)) {
    const Level cap = std::min(opts.max_level, task->max_level(), [](Level a, Level b) { return ordinal(a) < ordinal(b); });
    const double deadline = task->absolute_deadline_s();
    const bool low_criticality = ordinal(task->criticality) <= ordinal(Criticality::C1);

    // (level, eta, disturbance, vehicle slot, route slot)
    using Feasible = std::tuple<int, double, double, std::size_t, std::size_t>;
    // (eta, disturbance, vehicle slot, route slot) at the cap level
    using Late = std::tuple<double, double, std::size_t, std::size_t>;
    std::optional<Feasible> best;
    std::optional<Late> late;

    for (std::size_t v = 0; v < task->vehicle_count(); ++v) {
      const Vehicle* vehicle = find_vehicle(task->vehicles[v]);
      if (!vehicle || vehicle->status != VehicleStatus::Idle || taken.count(vehicle->id)) continue;
      if (low_criticality && vehicle->kind != VehicleKind::NormalAv && specialized_idle <= opts.reserved_vehicles)
        continue;
      for (std::size_t r = 0; r < task->routes[v].size(); ++r) {
        for (int p = 0; p <= ordinal(cap); ++p) {
          const Eta eta = task->eta_at(v, r, level_from(p));
          if (!eta) continue;
          const double dist = task->disturbance_at(v, r, level_from(p));
          if (now_s + *eta <= deadline) {
            Feasible f{p, *eta, dist, v, r};
            if (!best || f < *best) best = f;
          }
          if (p == ordinal(cap)) {
            Late l{*eta, dist, v, r};
            if (!late || l < *late) late = l;
          }
        }
      }
    }

    auto assign = [&](std::size_t v, std::size_t r, Level p) {
      const Vehicle* vehicle = find_vehicle(task->vehicles[v]);
      taken.insert(vehicle->id);
      if (vehicle->kind != VehicleKind::NormalAv) --specialized_idle;
      decisions.emplace_back(AssignTask{task->task_id, vehicle->id, task->routes[v][r], p});
    };

    if (best) {
      auto [p, eta, dist, v, r] = *best;
      assign(v, r, level_from(p));
    } else if (late) {
      auto [eta, dist, v, r] = *late;
      assign(v, r, cap);
      decisions.emplace_back(AssignNewDeadline{task->task_id, now_s + eta});
    } else {
      decisions.emplace_back(QueueTask{task->task_id});
    }
  }
  return decisions;
}

MonitorOutcome monitor(const ActiveService& active, double now_s, Eta refreshed_eta_s, const MonitorContext& ctx) {
  MonitorOutcome out;
  out.level = active.level;
  out.eta_s = refreshed_eta_s;
  const double deadline = active.deadline_abs_s;
  if (refreshed_eta_s && now_s + *refreshed_eta_s <= deadline) return out;
  if (active.resume_node == active.pickup) return out;  // last edge already committed

  const Level mode_cap = active.mode == Mode::E0 ? Level::P0 : Level::P4;
  const int cap = std::min(ordinal(ctx.max_level), ordinal(mode_cap));
  const double lead = std::max(0.0, active.resume_s - now_s);

  std::vector<Route> options;
  Route current = active.route;
  current.origin = active.resume_node;
  if (is_contiguous(ctx.net, current) && current.destination(ctx.net) == active.pickup) options.push_back(current);
  for (Route& r : candidate_routes(ctx.net, ctx.state, {}, active.resume_node, active.pickup, active.resume_s, ctx.task)) {
    const bool dup = std::any_of(options.begin(), options.end(), [&](const Route& x) { return x.same_edges(r); });
    if (!dup) options.push_back(std::move(r));
  }

  struct Choice {
    std::size_t option;
    double eta;
  };
  auto best_at = [&](Level p) -> std::optional<Choice> {
    std::optional<Choice> best;
    for (std::size_t i = 0; i < options.size(); ++i) {
      PreemptionResult pre = apply(p, options[i], ctx.net, ctx.state, active.resume_s, ctx.task.preemption);
      Eta eta = route_eta(ctx.net, options[i], active.resume_s, ctx.state, pre.overlay);
      if (!eta) continue;
      const double total = lead + *eta;
      if (!best || total < best->eta) best = Choice{i, total};
    }
    return best;
  };

  auto finish = [&](MonitorAction action, Level p, const Choice& c) {
    out.action = action;
    out.level = p;
    out.eta_s = c.eta;
    const Route& chosen = options[c.option];
    const bool changed = !chosen.same_edges(active.route);
    if (changed) {
      auto timed = retime(ctx.net, chosen, active.resume_s, ctx.state, {});
      out.route = timed ? *timed : chosen;
      out.decisions.emplace_back(AssignTask{active.task_id, active.vehicle, *out.route, p});
    }
    if (p != active.level) out.decisions.emplace_back(AssignPreemption{active.task_id, p});
  };

  for (int p = ordinal(active.level); p <= cap; ++p) {
    auto c = best_at(level_from(p));
    if (!c || now_s + c->eta > deadline) continue;
    const bool changed = !options[c->option].same_edges(active.route);
    if (p == ordinal(active.level) && !changed) {
      out.eta_s = c->eta;
      return out;
    }
    finish(p == ordinal(active.level) ? MonitorAction::Reroute : MonitorAction::Escalate, level_from(p), *c);
    return out;
  }

  out.action = MonitorAction::PredictedMiss;
  if (auto c = best_at(level_from(cap))) {
    finish(MonitorAction::PredictedMiss, level_from(cap), *c);
    out.decisions.emplace_back(AssignNewDeadline{active.task_id, now_s + c->eta});
  } else {
    out.eta_s = std::nullopt;
  }
  return out;
}

}  // namespace mcrts
