#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mcrts {

using NodeIndex = std::size_t;
using EdgeIndex = std::size_t;

/// Seconds of travel, or std::nullopt when the element is blocked.
using Eta = std::optional<double>;

/// Fixed-time signal at a node. The green window is [green_start_s, green_end_s)
/// measured in cycle time, which starts at offset_s.
struct SignalPlan {
  double cycle_s = 60.0;
  double green_start_s = 0.0;
  double green_end_s = 30.0;
  double offset_s = 0.0;

  /// Earliest time >= t at which the signal shows green.
  double next_green(double t) const;
};

struct Node {
  std::string id;
  bool signalized = false;
  std::optional<SignalPlan> signal;
};

struct Edge {
  std::string id;
  NodeIndex from = 0;
  NodeIndex to = 0;
  double length_m = 0.0;
  int lanes = 1;
  double speed_limit_mps = 0.0;
  double slope_factor = 1.0;
  std::optional<EdgeIndex> reverse_twin;

  /// Drive time at the posted limit scaled by slope, no congestion.
  double nominal_time_s() const { return length_m / (speed_limit_mps * slope_factor); }
};

/// Validated, immutable road graph. Construct through load_network or
/// RoadNetwork::build; every invariant is checked there.
class RoadNetwork {
 public:
  struct EdgeSpec {
    std::string id;
    std::string from_node;
    std::string to_node;
    double length_m = 0.0;
    int lanes = 1;
    double speed_limit_mps = 0.0;
    double slope_factor = 1.0;
    std::optional<std::string> reverse_twin;
  };

  static RoadNetwork build(std::vector<Node> nodes, std::vector<EdgeSpec> edges);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }

  const Node& node(NodeIndex n) const;
  const Edge& edge(EdgeIndex e) const;
  const std::vector<EdgeIndex>& out_edges(NodeIndex n) const { return out_.at(n); }
  const std::vector<EdgeIndex>& in_edges(NodeIndex n) const { return in_.at(n); }

  std::optional<NodeIndex> find_node(std::string_view id) const;
  std::optional<EdgeIndex> find_edge(std::string_view id) const;
  NodeIndex node_index(std::string_view id) const;  // throws UnknownNode
  EdgeIndex edge_index(std::string_view id) const;  // throws UnknownEdge

 private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<EdgeIndex>> out_;
  std::vector<std::vector<EdgeIndex>> in_;
  std::unordered_map<std::string, NodeIndex> node_ids_;
  std::unordered_map<std::string, EdgeIndex> edge_ids_;
};

/// Parses and validates a "mcrts-net/1" JSON document.
RoadNetwork load_network(std::string_view document);
RoadNetwork load_network_file(const std::string& path);
std::string network_to_json(const RoadNetwork& net);

struct EdgeTraffic {
  double congestion = 0.0;
  double pedestrian_flow = 0.0;  // pedestrians per minute
  long queued_vehicles = 0;
  bool halted = false;

  friend bool operator==(const EdgeTraffic&, const EdgeTraffic&) = default;
};

/// Partial per-edge change; unset fields keep their previous value.
struct EdgeChange {
  EdgeIndex edge = 0;
  std::optional<double> congestion;
  std::optional<double> pedestrian_flow;
  std::optional<long> queued_vehicles;
  std::optional<bool> halted;
};

using TrafficDelta = std::vector<EdgeChange>;

class TrafficState {
 public:
  TrafficState() = default;
  /// Free-flow state for every edge of `net`.
  explicit TrafficState(const RoadNetwork& net, double snapshot_time_s = 0.0);

  double snapshot_time_s() const { return time_s_; }
  std::size_t size() const { return edges_.size(); }
  const EdgeTraffic& at(EdgeIndex e) const;
  const std::vector<EdgeTraffic>& edges() const { return edges_; }

  friend bool operator==(const TrafficState&, const TrafficState&) = default;

 private:
  friend TrafficState apply_update(const TrafficState&, const TrafficDelta&, double);
  friend TrafficState with_records(const TrafficState&, std::vector<EdgeTraffic>, double);
  std::vector<EdgeTraffic> edges_;
  double time_s_ = 0.0;
};

/// New snapshot with `delta` applied at time t_s. Rejects out-of-range
/// values instead of clamping them.
TrafficState apply_update(const TrafficState& state, const TrafficDelta& delta, double t_s);

/// Replaces all per-edge records at once (validated like apply_update).
TrafficState with_records(const TrafficState& state, std::vector<EdgeTraffic> records, double t_s);

struct EdgeOverlay {
  bool forced_green = false;
  bool reserved_lane = false;
  double speed_cap_factor = 1.0;
  bool reverse_enabled = false;
  double expiry_s = std::numeric_limits<double>::infinity();

  friend bool operator==(const EdgeOverlay&, const EdgeOverlay&) = default;
};

/// EV-only modifications to the network. An empty overlay is the identity.
class NetworkOverlay {
 public:
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const EdgeOverlay* find(EdgeIndex e) const;
  void set(EdgeIndex e, const EdgeOverlay& o) { entries_[e] = o; }
  void erase(EdgeIndex e) { entries_.erase(e); }
  /// Entries of `other` replace ours edge by edge.
  void merge(const NetworkOverlay& other);
  const std::map<EdgeIndex, EdgeOverlay>& entries() const { return entries_; }

  friend bool operator==(const NetworkOverlay&, const NetworkOverlay&) = default;

 private:
  std::map<EdgeIndex, EdgeOverlay> entries_;
};

/// Congestion sensitivity of the BPR-style drive term.
inline constexpr double kCongestionAlpha = 4.0;
inline constexpr double kQueueHeadway_s = 2.0;
inline constexpr double kPedestrianDelayPerFlow_s = 0.05;
inline constexpr double kPedestrianDelayCap_s = 10.0;

struct TraversalBreakdown {
  double drive_s = 0.0;
  double queue_s = 0.0;
  double signal_s = 0.0;
  double pedestrian_s = 0.0;
  double exit_s = 0.0;  // absolute time the edge is left

  double total() const { return drive_s + queue_s + signal_s + pedestrian_s; }
};

/// Component breakdown for entering `e` at t_enter_s; nullopt when blocked.
std::optional<TraversalBreakdown> traverse(const RoadNetwork& net, EdgeIndex e, double t_enter_s,
                                           const TrafficState& state, const NetworkOverlay& overlay);

/// Seconds to traverse `e` when entering at t_enter_s; nullopt when blocked.
Eta traversal_time(const RoadNetwork& net, EdgeIndex e, double t_enter_s, const TrafficState& state,
                   const NetworkOverlay& overlay = {});

/// Absolute exit time. Non-decreasing in t_enter_s for a fixed snapshot.
std::optional<double> exit_time(const RoadNetwork& net, EdgeIndex e, double t_enter_s,
                                const TrafficState& state, const NetworkOverlay& overlay = {});

}  // namespace mcrts
