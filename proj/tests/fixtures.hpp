// Shared test fixtures and brute-force oracles. Test-only; nothing here is
// used by the library.
#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mcrts/network.hpp"
#include "mcrts/router.hpp"

namespace fixtures {

using namespace mcrts;

/// A, B, C with e1 A->B 500 m, e2 B->C 500 m, e3 A->C 1500 m, all 25 m/s,
/// two lanes, no signals.
inline const char* kTriNet = R"({
  "format": "mcrts-net/1",
  "nodes": [{"id": "A"}, {"id": "B"}, {"id": "C"}],
  "edges": [
    {"id": "e1", "from_node": "A", "to_node": "B", "length_m": 500, "lanes": 2, "speed_limit_mps": 25},
    {"id": "e2", "from_node": "B", "to_node": "C", "length_m": 500, "lanes": 2, "speed_limit_mps": 25},
    {"id": "e3", "from_node": "A", "to_node": "C", "length_m": 1500, "lanes": 2, "speed_limit_mps": 25}
  ]
})";

inline RoadNetwork trinet() { return load_network(kTriNet); }

/// One 500 m / 25 m/s edge from "U" into signalized "S" (cycle 60 s, green [0, 30)).
inline RoadNetwork signal_edge(long cross_queue_lanes = 0) {
  std::vector<Node> nodes{{"U", false, std::nullopt}, {"S", true, SignalPlan{60.0, 0.0, 30.0, 0.0}},
                          {"X", false, std::nullopt}};
  std::vector<RoadNetwork::EdgeSpec> edges{{"in", "U", "S", 500.0, 2, 25.0, 1.0, std::nullopt}};
  if (cross_queue_lanes > 0) edges.push_back({"cross", "X", "S", 300.0, 1, 10.0, 1.0, std::nullopt});
  return RoadNetwork::build(std::move(nodes), std::move(edges));
}

/// Random connected-ish network with at most `max_nodes` nodes and
/// `max_edges` edges; some nodes signalized, some edges twinned.
inline RoadNetwork random_network(std::mt19937_64& rng, std::size_t max_nodes = 8, std::size_t max_edges = 16) {
  std::uniform_int_distribution<std::size_t> n_nodes(3, max_nodes);
  const std::size_t n = n_nodes(rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Node> nodes;
  for (std::size_t i = 0; i < n; ++i) {
    Node node{"n" + std::to_string(i), false, std::nullopt};
    if (unit(rng) < 0.4) {
      const double cycle = 30.0 + std::floor(unit(rng) * 60.0);
      const double start = std::floor(unit(rng) * cycle * 0.5);
      const double end = start + 5.0 + std::floor(unit(rng) * (cycle * 0.5 - 5.0));
      node.signalized = true;
      node.signal = SignalPlan{cycle, start, end, std::floor(unit(rng) * cycle)};
    }
    nodes.push_back(node);
  }
  std::vector<RoadNetwork::EdgeSpec> edges;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::uniform_int_distribution<std::size_t> n_edges(n, max_edges);
  const std::size_t m = n_edges(rng);
  std::vector<std::pair<std::size_t, std::size_t>> used;
  for (std::size_t tries = 0; edges.size() < m && tries < 200; ++tries) {
    std::size_t a = pick(rng), b = pick(rng);
    if (a == b) continue;
    bool dup = false;
    for (auto& [x, y] : used) dup = dup || (x == a && y == b);
    if (dup) continue;
    used.emplace_back(a, b);
    RoadNetwork::EdgeSpec s;
    s.id = "e" + std::to_string(edges.size());
    s.from_node = nodes[a].id;
    s.to_node = nodes[b].id;
    s.length_m = 100.0 + std::floor(unit(rng) * 900.0);
    s.lanes = unit(rng) < 0.5 ? 1 : 2;
    s.speed_limit_mps = 8.0 + std::floor(unit(rng) * 20.0);
    s.slope_factor = unit(rng) < 0.7 ? 1.0 : 0.5 + 0.5 * unit(rng);
    edges.push_back(s);
    // Twin some edges for reverse-lane coverage.
    if (edges.size() < m && unit(rng) < 0.4) {
      bool rev_dup = false;
      for (auto& [x, y] : used) rev_dup = rev_dup || (x == b && y == a);
      if (!rev_dup) {
        used.emplace_back(b, a);
        RoadNetwork::EdgeSpec t = s;
        t.id = "e" + std::to_string(edges.size());
        std::swap(t.from_node, t.to_node);
        t.reverse_twin = s.id;
        edges.back().reverse_twin = t.id;
        edges.push_back(t);
      }
    }
  }
  return RoadNetwork::build(std::move(nodes), std::move(edges));
}

inline TrafficState random_state(const RoadNetwork& net, std::mt19937_64& rng, double halt_probability = 0.1) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<EdgeTraffic> records(net.edge_count());
  for (auto& r : records) {
    r.congestion = unit(rng);
    r.pedestrian_flow = std::floor(unit(rng) * 300.0);
    r.queued_vehicles = static_cast<long>(unit(rng) * 12.0);
    r.halted = unit(rng) < halt_probability;
  }
  return with_records(TrafficState(net), std::move(records), 0.0);
}

/// Exhaustive simple-path enumeration; earliest arrival at dst or nullopt.
inline std::optional<double> brute_force_arrival(const RoadNetwork& net, const TrafficState& state,
                                                 const NetworkOverlay& overlay, NodeIndex src, NodeIndex dst,
                                                 double t0) {
  std::optional<double> best;
  std::vector<bool> visited(net.node_count(), false);
  std::function<void(NodeIndex, double)> dfs = [&](NodeIndex u, double t) {
    if (u == dst) {
      if (!best || t < *best) best = t;
      return;
    }
    visited[u] = true;
    for (EdgeIndex e : net.out_edges(u)) {
      const NodeIndex v = net.edge(e).to;
      if (visited[v]) continue;
      auto next = exit_time(net, e, t, state, overlay);
      if (next) dfs(v, *next);
    }
    visited[u] = false;
  };
  dfs(src, t0);
  return best;
}

/// Every simple path from src to dst, as edge lists.
inline std::vector<std::vector<EdgeIndex>> all_simple_paths(const RoadNetwork& net, NodeIndex src, NodeIndex dst) {
  std::vector<std::vector<EdgeIndex>> out;
  std::vector<EdgeIndex> path;
  std::vector<bool> visited(net.node_count(), false);
  std::function<void(NodeIndex)> dfs = [&](NodeIndex u) {
    if (u == dst) {
      out.push_back(path);
      return;
    }
    visited[u] = true;
    for (EdgeIndex e : net.out_edges(u)) {
      const NodeIndex v = net.edge(e).to;
      if (visited[v]) continue;
      path.push_back(e);
      dfs(v);
      path.pop_back();
    }
    visited[u] = false;
  };
  dfs(src);
  return out;
}

}  // namespace fixtures
