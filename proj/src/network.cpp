#include "mcrts/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "json_fields.hpp"
#include "mcrts/error.hpp"

namespace mcrts {

using nlohmann::json;

double SignalPlan::next_green(double t) const {
  const double rel = t - offset_s;
  double cycles = std::floor(rel / cycle_s);
  double phase = rel - cycles * cycle_s;
  if (phase < 0.0) {
    phase += cycle_s;
    cycles -= 1.0;
  } else if (phase >= cycle_s) {
    phase -= cycle_s;
    cycles += 1.0;
  }
  if (phase >= green_start_s && phase < green_end_s) return t;
  const double start = phase < green_start_s ? cycles * cycle_s + green_start_s
                                             : (cycles + 1.0) * cycle_s + green_start_s;
  return std::max(t, offset_s + start);
}

namespace {

void check_signal(const SignalPlan& s, const std::string& path) {
  if (!(s.cycle_s > 0.0) || !std::isfinite(s.cycle_s))
    throw Error(ErrorKind::InvalidField, "cycle_s must be positive", path + ".cycle_s");
  if (!(s.green_start_s >= 0.0 && s.green_start_s < s.green_end_s && s.green_end_s <= s.cycle_s &&
        s.green_end_s - s.green_start_s < s.cycle_s))
    throw Error(ErrorKind::InvalidField, "green window must be nonempty and inside [0, cycle_s)",
                path + ".green_window");
  if (!std::isfinite(s.offset_s))
    throw Error(ErrorKind::InvalidField, "offset_s must be finite", path + ".offset_s");
}

}  // namespace

RoadNetwork RoadNetwork::build(std::vector<Node> nodes, std::vector<EdgeSpec> specs) {
  RoadNetwork net;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string path = "nodes[" + std::to_string(i) + "]";
    Node& n = nodes[i];
    if (n.id.empty()) throw Error(ErrorKind::InvalidField, "node id must be nonempty", path + ".id");
    if (!net.node_ids_.emplace(n.id, i).second)
      throw Error(ErrorKind::DuplicateId, "duplicate node id '" + n.id + "'", path + ".id");
    if (n.signalized != n.signal.has_value())
      throw Error(ErrorKind::InvalidField, "signalized nodes need a signal plan and vice versa",
                  path + ".signal");
    if (n.signal) check_signal(*n.signal, path + ".signal");
  }
  net.nodes_ = std::move(nodes);
  net.out_.assign(net.nodes_.size(), {});
  net.in_.assign(net.nodes_.size(), {});

  for (std::size_t i = 0; i < specs.size(); ++i) {
    const std::string path = "edges[" + std::to_string(i) + "]";
    const EdgeSpec& s = specs[i];
    if (s.id.empty()) throw Error(ErrorKind::InvalidField, "edge id must be nonempty", path + ".id");
    if (!net.edge_ids_.emplace(s.id, i).second)
      throw Error(ErrorKind::DuplicateId, "duplicate edge id '" + s.id + "'", path + ".id");
    auto from = net.find_node(s.from_node);
    if (!from)
      throw Error(ErrorKind::DanglingNodeReference, "unknown node '" + s.from_node + "'",
                  path + ".from_node");
    auto to = net.find_node(s.to_node);
    if (!to)
      throw Error(ErrorKind::DanglingNodeReference, "unknown node '" + s.to_node + "'",
                  path + ".to_node");
    if (*from == *to) throw Error(ErrorKind::InvalidField, "self-loop edge", path + ".to_node");
    if (!(s.length_m > 0.0) || !std::isfinite(s.length_m))
      throw Error(ErrorKind::InvalidField, "length_m must be positive", path + ".length_m");
    if (s.lanes < 1) throw Error(ErrorKind::InvalidField, "lanes must be >= 1", path + ".lanes");
    if (!(s.speed_limit_mps > 0.0) || !std::isfinite(s.speed_limit_mps))
      throw Error(ErrorKind::InvalidField, "speed_limit_mps must be positive",
                  path + ".speed_limit_mps");
    if (!(s.slope_factor > 0.0 && s.slope_factor <= 1.0))
      throw Error(ErrorKind::InvalidField, "slope_factor must lie in (0, 1]", path + ".slope_factor");

    Edge e;
    e.id = s.id;
    e.from = *from;
    e.to = *to;
    e.length_m = s.length_m;
    e.lanes = s.lanes;
    e.speed_limit_mps = s.speed_limit_mps;
    e.slope_factor = s.slope_factor;
    net.edges_.push_back(std::move(e));
    net.out_[*from].push_back(i);
    net.in_[*to].push_back(i);
  }

  // Twins resolve after every id is known.
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (!specs[i].reverse_twin) continue;
    const std::string path = "edges[" + std::to_string(i) + "].reverse_twin";
    auto twin = net.find_edge(*specs[i].reverse_twin);
    if (!twin) throw Error(ErrorKind::InvalidField, "unknown twin edge '" + *specs[i].reverse_twin + "'", path);
    const Edge& a = net.edges_[i];
    const Edge& b = net.edges_[*twin];
    if (a.from != b.to || a.to != b.from)
      throw Error(ErrorKind::InvalidField, "reverse twin must connect the same nodes in reverse", path);
    net.edges_[i].reverse_twin = *twin;
  }
  return net;
}

const Node& RoadNetwork::node(NodeIndex n) const {
  if (n >= nodes_.size()) throw Error(ErrorKind::UnknownNode, "node index " + std::to_string(n));
  return nodes_[n];
}

const Edge& RoadNetwork::edge(EdgeIndex e) const {
  if (e >= edges_.size()) throw Error(ErrorKind::UnknownEdge, "edge index " + std::to_string(e));
  return edges_[e];
}

std::optional<NodeIndex> RoadNetwork::find_node(std::string_view id) const {
  auto it = node_ids_.find(std::string(id));
  if (it == node_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<EdgeIndex> RoadNetwork::find_edge(std::string_view id) const {
  auto it = edge_ids_.find(std::string(id));
  if (it == edge_ids_.end()) return std::nullopt;
  return it->second;
}

NodeIndex RoadNetwork::node_index(std::string_view id) const {
  auto n = find_node(id);
  if (!n) throw Error(ErrorKind::UnknownNode, "unknown node '" + std::string(id) + "'");
  return *n;
}

EdgeIndex RoadNetwork::edge_index(std::string_view id) const {
  auto e = find_edge(id);
  if (!e) throw Error(ErrorKind::UnknownEdge, "unknown edge '" + std::string(id) + "'");
  return *e;
}

// ---------------------------------------------------------------------------
// JSON document

using detail::number;
using detail::require;
using detail::text;

RoadNetwork load_network(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::MalformedDocument, e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::MalformedDocument, "top level must be an object");
  if (auto f = doc.find("format"); f != doc.end() && *f != "mcrts-net/1")
    throw Error(ErrorKind::InvalidField, "unsupported format", "format");
  if (!doc.contains("nodes") || !doc["nodes"].is_array())
    throw Error(ErrorKind::MalformedDocument, "'nodes' array required", "nodes");
  if (!doc.contains("edges") || !doc["edges"].is_array())
    throw Error(ErrorKind::MalformedDocument, "'edges' array required", "edges");

  std::vector<Node> nodes;
  const json& jn = doc["nodes"];
  for (std::size_t i = 0; i < jn.size(); ++i) {
    const std::string path = "nodes[" + std::to_string(i) + "]";
    const json& o = jn[i];
    if (!o.is_object()) throw Error(ErrorKind::MalformedDocument, "node must be an object", path);
    Node n;
    n.id = text(o, "id", path);
    n.signalized = o.value("signalized", false);
    if (auto s = o.find("signal"); s != o.end() && !s->is_null()) {
      const std::string sp = path + ".signal";
      SignalPlan plan;
      plan.cycle_s = number(*s, "cycle_s", sp);
      const json& w = require(*s, "green_window", sp);
      if (!w.is_array() || w.size() != 2 || !w[0].is_number() || !w[1].is_number())
        throw Error(ErrorKind::InvalidField, "green_window must be [start_s, end_s]", sp + ".green_window");
      plan.green_start_s = w[0].get<double>();
      plan.green_end_s = w[1].get<double>();
      plan.offset_s = s->value("offset_s", 0.0);
      n.signal = plan;
    }
    nodes.push_back(std::move(n));
  }

  std::vector<RoadNetwork::EdgeSpec> edges;
  const json& je = doc["edges"];
  for (std::size_t i = 0; i < je.size(); ++i) {
    const std::string path = "edges[" + std::to_string(i) + "]";
    const json& o = je[i];
    if (!o.is_object()) throw Error(ErrorKind::MalformedDocument, "edge must be an object", path);
    RoadNetwork::EdgeSpec s;
    s.id = text(o, "id", path);
    s.from_node = text(o, "from_node", path);
    s.to_node = text(o, "to_node", path);
    s.length_m = number(o, "length_m", path);
    const double lanes = o.contains("lanes") ? number(o, "lanes", path) : 1.0;
    if (lanes != std::floor(lanes)) throw Error(ErrorKind::InvalidField, "lanes must be an integer", path + ".lanes");
    s.lanes = static_cast<int>(lanes);
    s.speed_limit_mps = number(o, "speed_limit_mps", path);
    s.slope_factor = o.contains("slope_factor") ? number(o, "slope_factor", path) : 1.0;
    if (auto t = o.find("reverse_twin"); t != o.end() && !t->is_null()) s.reverse_twin = text(o, "reverse_twin", path);
    edges.push_back(std::move(s));
  }
  return RoadNetwork::build(std::move(nodes), std::move(edges));
}

RoadNetwork load_network_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open network file", path);
  std::stringstream buf;
  buf << in.rdbuf();
  return load_network(buf.str());
}

std::string network_to_json(const RoadNetwork& net) {
  json doc;
  doc["format"] = "mcrts-net/1";
  json nodes = json::array();
  for (const Node& n : net.nodes()) {
    json o{{"id", n.id}, {"signalized", n.signalized}};
    if (n.signal) {
      o["signal"] = {{"cycle_s", n.signal->cycle_s},
                     {"green_window", {n.signal->green_start_s, n.signal->green_end_s}},
                     {"offset_s", n.signal->offset_s}};
    }
    nodes.push_back(std::move(o));
  }
  json edges = json::array();
  for (const Edge& e : net.edges()) {
    json o{{"id", e.id},
           {"from_node", net.node(e.from).id},
           {"to_node", net.node(e.to).id},
           {"length_m", e.length_m},
           {"lanes", e.lanes},
           {"speed_limit_mps", e.speed_limit_mps},
           {"slope_factor", e.slope_factor}};
    if (e.reverse_twin) o["reverse_twin"] = net.edge(*e.reverse_twin).id;
    edges.push_back(std::move(o));
  }
  doc["nodes"] = std::move(nodes);
  doc["edges"] = std::move(edges);
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Traffic state

TrafficState::TrafficState(const RoadNetwork& net, double snapshot_time_s)
    : edges_(net.edge_count()), time_s_(snapshot_time_s) {}

const EdgeTraffic& TrafficState::at(EdgeIndex e) const {
  if (e >= edges_.size()) throw Error(ErrorKind::UnknownEdge, "edge index " + std::to_string(e));
  return edges_[e];
}

namespace {

void check_record(const EdgeTraffic& r, EdgeIndex e) {
  const std::string where = "edge " + std::to_string(e);
  if (!(r.congestion >= 0.0 && r.congestion <= 1.0))
    throw Error(ErrorKind::OutOfRangeValue, "congestion must lie in [0, 1]", where + ".congestion");
  if (!(r.pedestrian_flow >= 0.0) || !std::isfinite(r.pedestrian_flow))
    throw Error(ErrorKind::OutOfRangeValue, "pedestrian_flow must be >= 0", where + ".pedestrian_flow");
  if (r.queued_vehicles < 0)
    throw Error(ErrorKind::OutOfRangeValue, "queued_vehicles must be >= 0", where + ".queued_vehicles");
}

}  // namespace

TrafficState apply_update(const TrafficState& state, const TrafficDelta& delta, double t_s) {
  if (!(t_s >= state.time_s_))
    throw Error(ErrorKind::OutOfRangeValue, "update time precedes snapshot time");
  TrafficState next = state;
  next.time_s_ = t_s;
  for (const EdgeChange& c : delta) {
    if (c.edge >= next.edges_.size())
      throw Error(ErrorKind::UnknownEdge, "edge index " + std::to_string(c.edge));
    EdgeTraffic r = next.edges_[c.edge];
    if (c.congestion) r.congestion = *c.congestion;
    if (c.pedestrian_flow) r.pedestrian_flow = *c.pedestrian_flow;
    if (c.queued_vehicles) r.queued_vehicles = *c.queued_vehicles;
    if (c.halted) r.halted = *c.halted;
    check_record(r, c.edge);
    next.edges_[c.edge] = r;
  }
  return next;
}

TrafficState with_records(const TrafficState& state, std::vector<EdgeTraffic> records, double t_s) {
  if (!(t_s >= state.time_s_))
    throw Error(ErrorKind::OutOfRangeValue, "update time precedes snapshot time");
  if (records.size() != state.edges_.size())
    throw Error(ErrorKind::UnknownEdge, "record count does not match the network");
  for (EdgeIndex e = 0; e < records.size(); ++e) check_record(records[e], e);
  TrafficState next;
  next.edges_ = std::move(records);
  next.time_s_ = t_s;
  return next;
}

// ---------------------------------------------------------------------------
// Overlay

const EdgeOverlay* NetworkOverlay::find(EdgeIndex e) const {
  auto it = entries_.find(e);
  return it == entries_.end() ? nullptr : &it->second;
}

void NetworkOverlay::merge(const NetworkOverlay& other) {
  for (const auto& [e, o] : other.entries_) entries_[e] = o;
}

// ---------------------------------------------------------------------------
// Traversal

std::optional<TraversalBreakdown> traverse(const RoadNetwork& net, EdgeIndex e, double t_enter_s,
                                           const TrafficState& state, const NetworkOverlay& overlay) {
  const Edge& edge = net.edge(e);
  const EdgeTraffic& traffic = state.at(e);
  static const EdgeOverlay kIdentity{};
  const EdgeOverlay* found = overlay.find(e);
  const EdgeOverlay& o = found ? *found : kIdentity;

  const bool reverse = o.reverse_enabled && edge.reverse_twin.has_value();
  double congestion = traffic.congestion;
  double queued = static_cast<double>(traffic.queued_vehicles);
  if (traffic.halted) {
    if (!reverse) return std::nullopt;
    // Contraflow on the twin's lane.
    const EdgeTraffic& twin = state.at(*edge.reverse_twin);
    if (twin.halted) return std::nullopt;
    congestion = twin.congestion;
    queued = 0.0;
  } else {
    if (o.reserved_lane && edge.lanes >= 2) {
      congestion = 0.0;
      queued = 0.0;
    }
    if (reverse) {
      congestion = std::min(congestion, state.at(*edge.reverse_twin).congestion);
      queued = 0.0;
    }
  }

  const Node& head = net.node(edge.to);
  const bool green_forced = o.forced_green && head.signal.has_value();

  TraversalBreakdown b;
  const double v_eff = edge.speed_limit_mps * edge.slope_factor * o.speed_cap_factor;
  b.drive_s = (edge.length_m / v_eff) * (1.0 + kCongestionAlpha * congestion * congestion);
  b.queue_s = kQueueHeadway_s * queued;
  const double stop_line = t_enter_s + (b.drive_s + b.queue_s);
  double depart = stop_line;
  if (head.signal && !green_forced) depart = head.signal->next_green(stop_line);
  b.signal_s = depart - stop_line;
  b.pedestrian_s =
      green_forced ? 0.0 : std::min(kPedestrianDelayCap_s, kPedestrianDelayPerFlow_s * traffic.pedestrian_flow);
  b.exit_s = depart + b.pedestrian_s;
  return b;
}

Eta traversal_time(const RoadNetwork& net, EdgeIndex e, double t_enter_s, const TrafficState& state,
                   const NetworkOverlay& overlay) {
  auto b = traverse(net, e, t_enter_s, state, overlay);
  if (!b) return std::nullopt;
  return b->total();
}

std::optional<double> exit_time(const RoadNetwork& net, EdgeIndex e, double t_enter_s, const TrafficState& state,
                                const NetworkOverlay& overlay) {
  auto b = traverse(net, e, t_enter_s, state, overlay);
  if (!b) return std::nullopt;
  return b->exit_s;
}

}  // namespace mcrts
