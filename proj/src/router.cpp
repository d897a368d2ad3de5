#include "mcrts/router.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <set>
#include <stdexcept>
#include <tuple>

#include "mcrts/error.hpp"

namespace mcrts {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPenaltyFactor = 1.5;

struct Label {
  double arrival = kInf;
  std::size_t edges = 0;
  std::optional<EdgeIndex> parent;
  bool settled = false;
};

std::vector<EdgeIndex> path_to(const RoadNetwork& net, const std::vector<Label>& labels, NodeIndex n) {
  std::vector<EdgeIndex> path;
  while (labels[n].parent) {
    path.push_back(*labels[n].parent);
    n = net.edge(*labels[n].parent).from;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

void check_fifo(const RoadNetwork& net, EdgeIndex e, double t, double exit, const TrafficState& state,
                const NetworkOverlay& overlay) {
  for (double dt : {1e-3, 1.0, 17.0}) {
    auto later = exit_time(net, e, t + dt, state, overlay);
    if (later && *later < exit) throw std::logic_error("snapshot FIFO violated on edge " + net.edge(e).id);
  }
}

// Label-setting earliest-arrival search. `penalty` (if non-empty) holds a
// multiplier per edge applied to the time-invariant part of the traversal.
std::vector<EdgeIndex> search(const RoadNetwork& net, const TrafficState& state, const NetworkOverlay& overlay,
                              NodeIndex src, NodeIndex dst, double t0, const std::vector<double>& penalty,
                              const RouterOptions& opts) {
  net.node(src);
  net.node(dst);
  std::vector<Label> labels(net.node_count());
  labels[src].arrival = t0;

  using Entry = std::tuple<double, std::size_t, NodeIndex>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  open.emplace(t0, 0, src);

  while (!open.empty()) {
    auto [t, hops, u] = open.top();
    open.pop();
    if (labels[u].settled || t != labels[u].arrival || hops != labels[u].edges) continue;
    labels[u].settled = true;
    if (u == dst) break;

    for (EdgeIndex e : net.out_edges(u)) {
      const NodeIndex v = net.edge(e).to;
      if (labels[v].settled) continue;
      auto b = traverse(net, e, t, state, overlay);
      if (!b) continue;
      if (opts.check_fifo) check_fifo(net, e, t, b->exit_s, state, overlay);
      double arrival = b->exit_s;
      if (!penalty.empty() && penalty[e] != 1.0)
        arrival += (penalty[e] - 1.0) * (b->drive_s + b->queue_s + b->pedestrian_s);

      Label& lv = labels[v];
      bool better = arrival < lv.arrival;
      if (!better && arrival == lv.arrival) {
        if (hops + 1 < lv.edges) {
          better = true;
        } else if (hops + 1 == lv.edges) {
          auto candidate = path_to(net, labels, u);
          candidate.push_back(e);
          better = tiebreak_less(net, candidate, path_to(net, labels, v));
        }
      }
      if (better) {
        lv.arrival = arrival;
        lv.edges = hops + 1;
        lv.parent = e;
        open.emplace(arrival, lv.edges, v);
      }
    }
  }
  if (!labels[dst].settled) throw Error(ErrorKind::NoRoute, "destination unreachable from source");
  return path_to(net, labels, dst);
}

std::vector<EdgeIndex> sorted_set(std::vector<EdgeIndex> edges) {
  std::sort(edges.begin(), edges.end());
  return edges;
}

}  // namespace

NodeIndex Route::destination(const RoadNetwork& net) const {
  return edges.empty() ? origin : net.edge(edges.back()).to;
}

bool tiebreak_less(const RoadNetwork& net, const std::vector<EdgeIndex>& a, const std::vector<EdgeIndex>& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::string& ia = net.edge(a[i]).id;
    const std::string& ib = net.edge(b[i]).id;
    if (ia != ib) return ia < ib;
  }
  return false;
}

bool is_contiguous(const RoadNetwork& net, const Route& route) {
  NodeIndex at = route.origin;
  for (EdgeIndex e : route.edges) {
    if (e >= net.edge_count()) return false;
    const Edge& edge = net.edge(e);
    if (edge.from != at) return false;
    at = edge.to;
  }
  return true;
}

std::optional<Route> make_route(const RoadNetwork& net, NodeIndex origin, std::vector<EdgeIndex> edges, double t0_s,
                                const TrafficState& state, const NetworkOverlay& overlay) {
  Route r;
  r.origin = origin;
  r.edges = std::move(edges);
  if (!is_contiguous(net, r)) throw Error(ErrorKind::UnknownEdge, "route edges are not contiguous");
  return retime(net, r, t0_s, state, overlay);
}

std::optional<Route> retime(const RoadNetwork& net, const Route& route, double t0_s, const TrafficState& state,
                            const NetworkOverlay& overlay) {
  Route out;
  out.origin = route.origin;
  out.edges = route.edges;
  out.departure_s = t0_s;
  out.entry_s.reserve(route.edges.size());
  double t = t0_s;
  for (EdgeIndex e : route.edges) {
    out.entry_s.push_back(t);
    auto next = exit_time(net, e, t, state, overlay);
    if (!next) return std::nullopt;
    t = *next;
  }
  out.arrival_s = t;
  out.total_eta_s = t - t0_s;
  return out;
}

Eta route_eta(const RoadNetwork& net, const Route& route, double t0_s, const TrafficState& state,
              const NetworkOverlay& overlay) {
  double t = t0_s;
  for (EdgeIndex e : route.edges) {
    auto next = exit_time(net, e, t, state, overlay);
    if (!next) return std::nullopt;
    t = *next;
  }
  return t - t0_s;
}

Route fastest_route(const RoadNetwork& net, const TrafficState& state, const NetworkOverlay& overlay, NodeIndex src,
                    NodeIndex dst, double t0_s, const RouterOptions& opts) {
  auto edges = search(net, state, overlay, src, dst, t0_s, {}, opts);
  auto r = make_route(net, src, std::move(edges), t0_s, state, overlay);
  if (!r) throw Error(ErrorKind::NoRoute, "fastest path became blocked on re-timing");
  return *r;
}

std::vector<Route> k_routes(const RoadNetwork& net, const TrafficState& state, const NetworkOverlay& overlay,
                            NodeIndex src, NodeIndex dst, double t0_s, std::size_t k, const RouterOptions& opts) {
  if (k < 1) throw Error(ErrorKind::InvalidParameter, "k must be >= 1");
  Route best = fastest_route(net, state, overlay, src, dst, t0_s, opts);
  std::vector<Route> out{best};
  if (k == 1) return out;

  std::set<std::vector<EdgeIndex>> seen{sorted_set(best.edges)};
  std::vector<Route> alternatives;
  std::vector<double> penalty(net.edge_count(), 1.0);
  for (EdgeIndex e : best.edges) penalty[e] *= kPenaltyFactor;

  const std::size_t rounds = 2 * k + 2;
  for (std::size_t round = 0; round < rounds; ++round) {
    auto edges = search(net, state, overlay, src, dst, t0_s, penalty, opts);
    for (EdgeIndex e : edges) penalty[e] *= kPenaltyFactor;
    if (!seen.insert(sorted_set(edges)).second) continue;
    if (auto r = make_route(net, src, std::move(edges), t0_s, state, overlay)) alternatives.push_back(std::move(*r));
  }

  std::stable_sort(alternatives.begin(), alternatives.end(), [&](const Route& a, const Route& b) {
    if (a.total_eta_s != b.total_eta_s) return a.total_eta_s < b.total_eta_s;
    return tiebreak_less(net, a.edges, b.edges);
  });
  for (auto& r : alternatives) {
    if (out.size() >= k) break;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace mcrts
