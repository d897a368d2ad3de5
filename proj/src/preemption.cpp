#include "mcrts/preemption.hpp"

#include <algorithm>
#include <numeric>

namespace mcrts {

std::string_view to_string(Level p) {
  switch (p) {
    case Level::P0: return "P0";
    case Level::P1: return "P1";
    case Level::P2: return "P2";
    case Level::P3: return "P3";
    case Level::P4: return "P4";
  }
  return "P?";
}

std::optional<Level> parse_level(std::string_view s) {
  for (Level p : kAllLevels)
    if (to_string(p) == s) return p;
  return std::nullopt;
}

std::string_view describe(Level p) {
  switch (p) {
    case Level::P0: return "no pre-emption";
    case Level::P1: return "green wave";
    case Level::P2: return "lane reservation";
    case Level::P3: return "speed cap raise";
    case Level::P4: return "reverse lane";
  }
  return "";
}

std::string_view to_string(EffectKind k) {
  switch (k) {
    case EffectKind::GreenWave: return "green_wave";
    case EffectKind::LaneReservation: return "lane_reservation";
    case EffectKind::SpeedCap: return "speed_cap";
    case EffectKind::ReverseLane: return "reverse_lane";
  }
  return "";
}

std::string DisturbanceItem::key() const { return std::string(to_string(effect)) + ":" + element; }

double DisturbanceCost::total() const {
  return std::accumulate(items.begin(), items.end(), 0.0,
                         [](double acc, const DisturbanceItem& i) { return acc + i.vehicle_seconds; });
}

namespace {

bool wants_reverse(const Edge& edge, const EdgeTraffic& traffic, const PreemptionConfig& cfg) {
  return edge.reverse_twin.has_value() && (traffic.halted || traffic.congestion >= cfg.saturation);
}

// Effects of level p on a single edge; nullopt when nothing applies.
std::optional<EdgeOverlay> effects(Level p, const RoadNetwork& net, EdgeIndex e, const TrafficState& state,
                                   const PreemptionConfig& cfg) {
  const Edge& edge = net.edge(e);
  EdgeOverlay o;
  bool any = false;
  if (ordinal(p) >= 1 && net.node(edge.to).signal) any = o.forced_green = true;
  if (ordinal(p) >= 2 && edge.lanes >= 2) any = o.reserved_lane = true;
  if (ordinal(p) >= 3) {
    o.speed_cap_factor = cfg.speed_cap_factor;
    any = true;
  }
  if (ordinal(p) >= 4 && wants_reverse(edge, state.at(e), cfg)) any = o.reverse_enabled = true;
  if (!any) return std::nullopt;
  return o;
}

long cross_queue(const RoadNetwork& net, const TrafficState& state, NodeIndex n, EdgeIndex approach) {
  long q = 0;
  for (EdgeIndex in : net.in_edges(n))
    if (in != approach) q += state.at(in).queued_vehicles;
  return q;
}

}  // namespace

PreemptionResult apply(Level p, const Route& route, const RoadNetwork& net, const TrafficState& state, double t_s,
                       const PreemptionConfig& cfg) {
  PreemptionResult out;
  if (p == Level::P0) return out;

  for (EdgeIndex e : route.edges) {
    auto o = effects(p, net, e, state, cfg);
    if (!o) continue;
    out.overlay.set(e, *o);

    const Edge& edge = net.edge(e);
    if (o->forced_green) {
      const double q = static_cast<double>(cross_queue(net, state, edge.to, e));
      out.disturbance.items.push_back(
          {EffectKind::GreenWave, net.node(edge.to).id, q * cfg.green_hold_s * cfg.green_cost});
    }
    if (o->reserved_lane) {
      const double q = static_cast<double>(state.at(e).queued_vehicles);
      out.disturbance.items.push_back(
          {EffectKind::LaneReservation, edge.id, q * edge.nominal_time_s() * cfg.lane_cost});
    }
    if (ordinal(p) >= 3) out.disturbance.items.push_back({EffectKind::SpeedCap, edge.id, 0.0});
    if (o->reverse_enabled) {
      const Edge& twin = net.edge(*edge.reverse_twin);
      const double q = static_cast<double>(state.at(*edge.reverse_twin).queued_vehicles);
      out.disturbance.items.push_back(
          {EffectKind::ReverseLane, edge.id, cfg.reverse_cost * q * twin.nominal_time_s() * cfg.lane_cost});
    }
  }

  // Expiry: exit time under the new overlay plus recovery. Past a blocking
  // edge the nominal drive time stands in for the unknown exit.
  double t = t_s;
  for (EdgeIndex e : route.edges) {
    auto next = exit_time(net, e, t, state, out.overlay);
    t = next ? *next : t + net.edge(e).nominal_time_s();
    if (const EdgeOverlay* o = out.overlay.find(e)) {
      EdgeOverlay timed = *o;
      timed.expiry_s = t + cfg.recovery_s;
      out.overlay.set(e, timed);
    }
  }
  return out;
}

NetworkOverlay network_wide(Level p, const RoadNetwork& net, const TrafficState& state, const PreemptionConfig& cfg) {
  NetworkOverlay overlay;
  if (p == Level::P0) return overlay;
  for (EdgeIndex e = 0; e < net.edge_count(); ++e)
    if (auto o = effects(p, net, e, state, cfg)) overlay.set(e, *o);
  return overlay;
}

std::vector<RecoveryEvent> release(const NetworkOverlay& overlay, double t_s) {
  std::vector<RecoveryEvent> events;
  events.reserve(overlay.size());
  for (const auto& [e, o] : overlay.entries()) events.push_back({e, std::max(o.expiry_s, t_s)});
  std::sort(events.begin(), events.end(), [](const RecoveryEvent& a, const RecoveryEvent& b) {
    return a.time_s != b.time_s ? a.time_s < b.time_s : a.edge < b.edge;
  });
  return events;
}

}  // namespace mcrts
