#pragma once

#include <cstddef>
#include <vector>

#include "mcrts/network.hpp"

namespace mcrts {

/// A timed path. `entry_s[i]` is when edges[i] is entered and arrival_s is
/// when the last edge is left; total_eta_s = arrival_s - departure_s. An
/// empty route (origin == destination) has zero ETA.
struct Route {
  NodeIndex origin = 0;
  std::vector<EdgeIndex> edges;
  double departure_s = 0.0;
  std::vector<double> entry_s;
  double total_eta_s = 0.0;
  double arrival_s = 0.0;

  NodeIndex destination(const RoadNetwork& net) const;
  bool same_edges(const Route& other) const { return edges == other.edges; }
};

struct RouterOptions {
#ifdef NDEBUG
  bool check_fifo = false;
#else
  bool check_fifo = true;
#endif
};

/// Earliest-arrival path from src to dst departing at t0_s. Ties go to fewer
/// edges, then to the lexicographically smaller edge-id sequence.
/// Throws Error{NoRoute} when dst cannot be reached.
Route fastest_route(const RoadNetwork& net, const TrafficState& state, const NetworkOverlay& overlay,
                    NodeIndex src, NodeIndex dst, double t0_s, const RouterOptions& opts = {});

/// Up to k routes with distinct edge sets, ascending by ETA; the first is
/// always fastest_route. Alternatives come from re-searching with the edges
/// of already found routes penalized.
std::vector<Route> k_routes(const RoadNetwork& net, const TrafficState& state, const NetworkOverlay& overlay,
                            NodeIndex src, NodeIndex dst, double t0_s, std::size_t k,
                            const RouterOptions& opts = {});

/// Folds exit times along `route` departing at t0_s. nullopt if any edge blocks.
Eta route_eta(const RoadNetwork& net, const Route& route, double t0_s, const TrafficState& state,
              const NetworkOverlay& overlay = {});

/// Same path re-timed from t0_s; nullopt if blocked.
std::optional<Route> retime(const RoadNetwork& net, const Route& route, double t0_s, const TrafficState& state,
                            const NetworkOverlay& overlay = {});

/// Builds a timed Route from an edge list (validates contiguity).
std::optional<Route> make_route(const RoadNetwork& net, NodeIndex origin, std::vector<EdgeIndex> edges,
                                double t0_s, const TrafficState& state, const NetworkOverlay& overlay = {});

/// True when edges are head-to-tail contiguous starting at route.origin.
bool is_contiguous(const RoadNetwork& net, const Route& route);

/// Strict weak order used for deterministic tie-breaking: edge count, then
/// edge-id sequence.
bool tiebreak_less(const RoadNetwork& net, const std::vector<EdgeIndex>& a, const std::vector<EdgeIndex>& b);

}  // namespace mcrts
