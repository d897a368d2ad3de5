#include "mcrts/kernel.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <tuple>

#include "mcrts/error.hpp"
#include "mcrts/router.hpp"
#include "mcrts/scheduler.hpp"

namespace mcrts {

using nlohmann::json;

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Mcrts: return "mcrts";
    case Variant::NoPreemption: return "no_preemption";
    case Variant::StaticRoute: return "static_route";
  }
  return "";
}

std::optional<Variant> parse_variant(std::string_view s) {
  for (Variant v : {Variant::Mcrts, Variant::NoPreemption, Variant::StaticRoute})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

namespace {

constexpr std::array<std::string_view, 17> kEventNames{
    "RequestArrival", "Queued",           "Dispatch",       "PreemptionActivated", "EdgeEntered",   "EdgeExited",
    "ServiceCompleted", "VehicleReleased", "StateUpdate",   "Reevaluation",        "Reroute",       "EscalationApplied",
    "PredictedMiss",  "DeadlineExtended", "PriorityAltered", "OverlayExpiry",      "HorizonExceeded"};

}  // namespace

std::string_view to_string(EventKind k) { return kEventNames[static_cast<std::size_t>(k)]; }

std::optional<EventKind> parse_event_kind(std::string_view s) {
  for (std::size_t i = 0; i < kEventNames.size(); ++i)
    if (kEventNames[i] == s) return static_cast<EventKind>(i);
  return std::nullopt;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorKind::Io, "SHA-256 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xF]);
  }
  return out;
}

namespace {

std::int64_t to_ms(double s) { return std::llround(s * 1000.0); }
double to_s(std::int64_t ms) { return static_cast<double>(ms) / 1000.0; }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

/// Uniform [0, 1) draw keyed by (seed, edge id, tick); independent of the
/// order in which anything else happens.
double keyed_uniform(std::uint64_t seed, std::string_view edge, std::int64_t tick) {
  std::uint64_t x = splitmix64(seed ^ splitmix64(fnv1a(edge)) ^ splitmix64(static_cast<std::uint64_t>(tick) + 0x51ULL));
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

double reflect_unit(double c) {
  while (c < 0.0 || c > 1.0) c = c < 0.0 ? -c : 2.0 - c;
  return c;
}

// Internal event kinds; rank orders simultaneous events.
enum class Ev { ScriptUpdate, Tick, EdgeExit, OnSceneDone, TransportDone, OverlayExpiry, RequestArrival, Horizon };

struct Pending {
  std::int64_t t_ms;
  int rank;
  std::uint64_t seq;
  Ev kind;
  std::size_t a = 0;
  std::size_t b = 0;
  std::uint64_t gen = 0;

  bool operator>(const Pending& o) const { return std::tie(t_ms, rank, seq) > std::tie(o.t_ms, o.rank, o.seq); }
};

enum class Phase { ToPickup, OnScene, Transport, Done };

struct Service {
  std::size_t request = 0;
  std::size_t vehicle = 0;
  ActiveService active;
  Phase phase = Phase::ToPickup;
  NetworkOverlay overlay;
  std::map<EdgeIndex, std::uint64_t> overlay_gen;
  std::set<std::string> charged;
  Level logged_level = Level::P0;
  bool waiting = false;
};

struct VehicleState {
  Vehicle v;
  std::optional<std::size_t> service;
  std::optional<EdgeIndex> on_edge;
  std::int64_t entered_ms = 0;
  std::int64_t exit_ms = 0;
};

enum class RequestStatus { NotArrived, Pending, Active, Done };

struct RequestState {
  RequestStatus status = RequestStatus::NotArrived;
  std::int64_t arrived_ms = 0;
  bool queued_logged = false;
  bool aged = false;
};

json route_ids(const RoadNetwork& net, const std::vector<EdgeIndex>& edges) {
  json out = json::array();
  for (EdgeIndex e : edges) out.push_back(net.edge(e).id);
  return out;
}

json eta_json(const Eta& e) { return e ? json(*e) : json(nullptr); }

EdgeOverlay combine(EdgeOverlay a, const EdgeOverlay& b) {
  a.forced_green = a.forced_green || b.forced_green;
  a.reserved_lane = a.reserved_lane || b.reserved_lane;
  a.speed_cap_factor = std::max(a.speed_cap_factor, b.speed_cap_factor);
  a.reverse_enabled = a.reverse_enabled || b.reverse_enabled;
  a.expiry_s = std::max(a.expiry_s, b.expiry_s);
  return a;
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

class Simulation {
 public:
  Simulation(const Scenario& sc, std::uint64_t seed, Variant variant)
      : sc_(sc), net_(sc.net), seed_(seed), variant_(variant), state_(sc.initial) {
    max_level_ = variant == Variant::NoPreemption ? Level::P0 : Level::P4;
    task_opts_.k_routes = sc.k_routes;
    task_opts_.preemption = sc.preemption;
    task_opts_.router.check_fifo = false;
    requests_.resize(sc.requests.size());
    for (const Vehicle& v : sc.fleet) fleet_.push_back(VehicleState{v, std::nullopt, std::nullopt, 0, 0});
  }

  Trace run() {
    trace_.seed = seed_;
    trace_.variant = variant_;
    trace_.horizon_s = sc_.horizon_s;
    trace_.config_digest = sha256_hex(sc_.canonical + "\nvariant=" + std::string(to_string(variant_)));
    const std::int64_t horizon_ms = to_ms(sc_.horizon_s);

    place_initial_vehicles();
    for (std::size_t i = 0; i < sc_.requests.size(); ++i)
      if (to_ms(sc_.requests[i].release_s) <= horizon_ms)
        schedule(to_ms(sc_.requests[i].release_s), Ev::RequestArrival, i);
    for (std::size_t i = 0; i < sc_.updates.size(); ++i) schedule(to_ms(sc_.updates[i].t_s), Ev::ScriptUpdate, i);
    const std::int64_t tick_ms = to_ms(sc_.tick_s);
    for (std::int64_t t = tick_ms, k = 1; t <= horizon_ms; t += tick_ms, ++k)
      schedule(t, Ev::Tick, static_cast<std::size_t>(k));
    schedule(horizon_ms, Ev::Horizon);

    while (!queue_.empty()) {
      Pending ev = queue_.top();
      queue_.pop();
      now_ms_ = ev.t_ms;
      if (ev.kind == Ev::Horizon) {
        finish_horizon();
        break;
      }
      dispatch_event(ev);
    }
    trace_.outcomes = derive_outcomes(trace_.events);
    return std::move(trace_);
  }

 private:
  // -- bookkeeping ---------------------------------------------------------

  double now() const { return to_s(now_ms_); }

  void schedule(std::int64_t t_ms, Ev kind, std::size_t a = 0, std::size_t b = 0, std::uint64_t gen = 0) {
    t_ms = std::max(t_ms, now_ms_);
    queue_.push(Pending{t_ms, static_cast<int>(kind), next_seq_++, kind, a, b, gen});
  }

  void log(EventKind kind, json payload) {
    trace_.events.push_back(TraceRecord{now_ms_, trace_.events.size(), kind, std::move(payload)});
  }

  json request_meta(std::size_t i) const {
    const EmergencyRequest& r = sc_.requests[i];
    auto d = deadline_for(r.criticality, sc_.policy);
    return {{"request", r.id},
            {"criticality", to_string(r.criticality)},
            {"mode", to_string(r.mode)},
            {"release_s", r.release_s},
            {"deadline_s", d ? json(*d) : json(nullptr)},
            {"pickup", net_.node(r.pickup).id}};
  }

  std::optional<std::size_t> request_index(const std::string& id) const {
    for (std::size_t i = 0; i < sc_.requests.size(); ++i)
      if (sc_.requests[i].id == id) return i;
    return std::nullopt;
  }

  std::optional<std::size_t> vehicle_index(const std::string& id) const {
    for (std::size_t i = 0; i < fleet_.size(); ++i)
      if (fleet_[i].v.id == id) return i;
    return std::nullopt;
  }

  std::optional<std::size_t> service_of(const std::string& request) const {
    for (std::size_t i = services_.size(); i-- > 0;)
      if (services_[i].active.task_id == request) return i;
    return std::nullopt;
  }

  NetworkOverlay combined() const {
    NetworkOverlay out;
    for (const Service& s : services_)
      for (const auto& [e, o] : s.overlay.entries()) {
        const EdgeOverlay* prev = out.find(e);
        out.set(e, prev ? combine(*prev, o) : o);
      }
    return out;
  }

  // -- vehicles --------------------------------------------------------------

  void place_initial_vehicles() {
    for (std::size_t v = 0; v < fleet_.size(); ++v) {
      VehicleState& vs = fleet_[v];
      if (!vs.v.location.edge) continue;
      const EdgeIndex e = *vs.v.location.edge;
      auto tt = traversal_time(net_, e, 0.0, state_);
      if (!tt) {
        vs.v.location = VehicleLocation{net_.edge(e).to, std::nullopt, 0.0};
        continue;
      }
      const double remaining = (1.0 - vs.v.location.offset) * *tt;
      vs.on_edge = e;
      vs.entered_ms = 0;
      vs.exit_ms = to_ms(remaining);
      log(EventKind::EdgeEntered, {{"vehicle", vs.v.id},
                                   {"edge", net_.edge(e).id},
                                   {"traversal_s", remaining},
                                   {"initial_offset", vs.v.location.offset}});
      schedule(vs.exit_ms, Ev::EdgeExit, v, e);
    }
  }

  /// Snapshot handed to the analogy layer. Vehicles on an edge report the
  /// offset that reproduces their actual remaining time.
  std::vector<Vehicle> fleet_view() const {
    std::vector<Vehicle> out;
    out.reserve(fleet_.size());
    const NetworkOverlay overlay = combined();
    for (const VehicleState& vs : fleet_) {
      Vehicle v = vs.v;
      if (vs.on_edge) {
        const double remaining = to_s(vs.exit_ms - now_ms_);
        auto tt = traversal_time(net_, *vs.on_edge, now(), state_, overlay);
        double offset = 0.0;
        if (tt && *tt > 0.0) offset = std::clamp(1.0 - remaining / *tt, 0.0, 1.0);
        v.location = VehicleLocation{net_.edge(*vs.on_edge).from, vs.on_edge, offset};
      }
      out.push_back(std::move(v));
    }
    return out;
  }

  // -- event handlers --------------------------------------------------------

  void dispatch_event(const Pending& ev) {
    switch (ev.kind) {
      case Ev::RequestArrival: on_request(ev.a); break;
      case Ev::ScriptUpdate: on_script_update(ev.a); break;
      case Ev::Tick: on_tick(static_cast<std::int64_t>(ev.a)); break;
      case Ev::EdgeExit: on_edge_exit(ev.a, ev.b); break;
      case Ev::OnSceneDone: on_scene_done(ev.a); break;
      case Ev::TransportDone: release_vehicle(ev.a, ev.b); break;
      case Ev::OverlayExpiry: on_overlay_expiry(ev.a, ev.b, ev.gen); break;
      case Ev::Horizon: break;
    }
  }

  void on_request(std::size_t i) {
    requests_[i].status = RequestStatus::Pending;
    requests_[i].arrived_ms = now_ms_;
    log(EventKind::RequestArrival, request_meta(i));
    admission_pass();
  }

  void on_script_update(std::size_t k) {
    const ScriptedUpdate& u = sc_.updates[k];
    state_ = apply_update(state_, u.delta, now());
    json changes = json::array();
    for (const EdgeChange& c : u.delta) {
      json o{{"edge", net_.edge(c.edge).id}};
      if (c.congestion) o["congestion"] = *c.congestion;
      if (c.pedestrian_flow) o["pedestrian_flow"] = *c.pedestrian_flow;
      if (c.queued_vehicles) o["queued_vehicles"] = *c.queued_vehicles;
      if (c.halted) o["halted"] = *c.halted;
      changes.push_back(std::move(o));
    }
    log(EventKind::StateUpdate, {{"source", "script"}, {"changes", std::move(changes)}});
    after_state_change("update");
  }

  void on_tick(std::int64_t k) {
    json payload{{"source", "tick"}, {"tick", k}};
    if (sc_.background.enabled && sc_.background.step > 0.0) {
      std::vector<EdgeTraffic> records = state_.edges();
      double sum = 0.0;
      for (EdgeIndex e = 0; e < records.size(); ++e) {
        const double u = keyed_uniform(seed_, net_.edge(e).id, k);
        records[e].congestion = reflect_unit(records[e].congestion + sc_.background.step * (2.0 * u - 1.0));
        sum += records[e].congestion;
      }
      state_ = with_records(state_, std::move(records), now());
      payload["mean_congestion"] = net_.edge_count() ? sum / static_cast<double>(net_.edge_count()) : 0.0;
    }
    log(EventKind::StateUpdate, std::move(payload));
    after_state_change("tick");
  }

  void after_state_change(const char* trigger) {
    reevaluation_pass(trigger);
    for (std::size_t si = 0; si < services_.size(); ++si)
      if (services_[si].phase == Phase::ToPickup && services_[si].waiting) try_advance(si, true);
    admission_pass();
  }

  void on_edge_exit(std::size_t v, EdgeIndex e) {
    VehicleState& vs = fleet_[v];
    vs.on_edge.reset();
    vs.v.location = VehicleLocation{net_.edge(e).to, std::nullopt, 0.0};
    json payload{{"vehicle", vs.v.id}, {"edge", net_.edge(e).id}};
    if (vs.service) payload["request"] = services_[*vs.service].active.task_id;
    log(EventKind::EdgeExited, std::move(payload));
    if (vs.service && services_[*vs.service].phase == Phase::ToPickup) try_advance(*vs.service, true);
  }

  void on_scene_done(std::size_t si) {
    Service& s = services_[si];
    const EmergencyRequest& r = sc_.requests[s.request];
    if (r.destination && *r.destination != r.pickup) {
      try {
        Route leg = fastest_route(net_, state_, {}, r.pickup, *r.destination, now(), task_opts_.router);
        s.phase = Phase::Transport;
        schedule(now_ms_ + to_ms(leg.total_eta_s), Ev::TransportDone, si, *r.destination);
        return;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoRoute) throw;
      }
    }
    release_vehicle(si, r.pickup);
  }

  void release_vehicle(std::size_t si, NodeIndex at) {
    Service& s = services_[si];
    VehicleState& vs = fleet_[s.vehicle];
    s.phase = Phase::Done;
    vs.service.reset();
    vs.v.status = VehicleStatus::Idle;
    vs.v.location = VehicleLocation{at, std::nullopt, 0.0};
    log(EventKind::VehicleReleased, {{"vehicle", vs.v.id}, {"request", s.active.task_id}, {"node", net_.node(at).id}});
    admission_pass();
  }

  void on_overlay_expiry(std::size_t si, EdgeIndex e, std::uint64_t gen) {
    Service& s = services_[si];
    auto it = s.overlay_gen.find(e);
    if (it == s.overlay_gen.end() || it->second != gen) return;
    s.overlay_gen.erase(it);
    s.overlay.erase(e);
    log(EventKind::OverlayExpiry, {{"request", s.active.task_id}, {"edge", net_.edge(e).id}});
  }

  void finish_horizon() {
    for (std::size_t i = 0; i < sc_.requests.size(); ++i) {
      if (requests_[i].status == RequestStatus::Done) continue;
      json meta = request_meta(i);
      meta["arrived"] = requests_[i].status != RequestStatus::NotArrived;
      log(EventKind::HorizonExceeded, std::move(meta));
    }
  }

  // -- admission -------------------------------------------------------------

  void admission_pass() {
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < requests_.size(); ++i)
      if (requests_[i].status == RequestStatus::Pending) pending.push_back(i);
    if (pending.empty()) return;

    std::vector<ScheduleDecision> decisions;
    for (std::size_t i : pending) {
      const EmergencyRequest& r = sc_.requests[i];
      if (!requests_[i].aged && ordinal(r.criticality) <= ordinal(Criticality::C1) &&
          to_s(now_ms_ - requests_[i].arrived_ms) >= sc_.scheduler.aging_s) {
        requests_[i].aged = true;
        decisions.emplace_back(AlterPriority{r.id, ordinal(Criticality::C3)});
      }
    }
    for (const auto& d : decisions) execute(d);
    decisions.clear();

    const std::vector<Vehicle> view = fleet_view();
    const NetworkOverlay base = combined();
    std::vector<MCTask> tasks;
    for (std::size_t i : pending) {
      try {
        tasks.push_back(to_task(sc_.requests[i], view, net_, state_, base, sc_.policy, now(), task_opts_));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoCandidateVehicle && e.kind() != ErrorKind::NoRoute) throw;
        execute(QueueTask{sc_.requests[i].id}, e.kind() == ErrorKind::NoRoute ? "no_route" : "no_vehicle");
      }
    }
    if (tasks.empty()) return;

    AdmitOptions opts;
    opts.max_level = max_level_;
    opts.reserved_vehicles = sc_.scheduler.reserved_vehicles;
    new_services_.clear();
    for (const ScheduleDecision& d : admit(tasks, view, now(), opts, overrides_)) execute(d, "busy");
    for (std::size_t si : new_services_) try_advance(si, true);
    new_services_.clear();
  }

  /// Applies one scheduler decision through its traffic-domain image.
  void execute(const ScheduleDecision& d, const char* queue_reason = "busy") {
    for (const TrafficCommand& c : from_decision(d)) {
      std::visit(overloaded{
                     [&](const DispatchVehicle& x) { on_dispatch_command(x); },
                     [&](const ActivatePreemption& x) { on_activate_command(x); },
                     [&](const ExtendTarget& x) {
                       auto si = service_of(x.request);
                       if (si) services_[*si].active.deadline_abs_s = x.new_deadline_s;
                       log(EventKind::DeadlineExtended, {{"request", x.request}, {"new_deadline_s", x.new_deadline_s}});
                     },
                     [&](const HoldRequest& x) {
                       auto i = request_index(x.request);
                       if (!i || requests_[*i].queued_logged) return;
                       requests_[*i].queued_logged = true;
                       log(EventKind::Queued, {{"request", x.request}, {"reason", queue_reason}});
                     },
                     [&](const Reprioritize& x) {
                       overrides_[x.request] = x.priority;
                       log(EventKind::PriorityAltered, {{"request", x.request}, {"priority", x.priority}});
                     },
                 },
                 c);
    }
  }

  void on_dispatch_command(const DispatchVehicle& cmd) {
    auto existing = service_of(cmd.request);
    if (existing && services_[*existing].phase == Phase::ToPickup) {
      reroute(*existing, cmd.route);
      return;
    }
    const std::size_t ri = *request_index(cmd.request);
    const std::size_t vi = *vehicle_index(cmd.vehicle);
    const EmergencyRequest& r = sc_.requests[ri];
    VehicleState& vs = fleet_[vi];

    Service s;
    s.request = ri;
    s.vehicle = vi;
    ActiveService& a = s.active;
    a.task_id = r.id;
    a.mode = r.mode;
    a.criticality = r.criticality;
    a.release_s = r.release_s;
    auto rel = deadline_for(r.criticality, sc_.policy);
    a.deadline_abs_s = rel ? r.release_s + *rel : std::numeric_limits<double>::infinity();
    a.vehicle = vs.v.id;
    a.route = cmd.route;
    a.resume_node = cmd.route.origin;
    a.resume_s = vs.on_edge ? to_s(vs.exit_ms) : now();
    a.pickup = r.pickup;
    a.level = Level::P0;
    a.dispatch_s = now();
    a.last_advised_eta_s = (a.resume_s - now()) + cmd.route.total_eta_s;

    services_.push_back(std::move(s));
    const std::size_t si = services_.size() - 1;
    vs.service = si;
    vs.v.status = VehicleStatus::EnRoute;
    requests_[ri].status = RequestStatus::Active;

    log(EventKind::Dispatch, {{"request", r.id},
                              {"vehicle", vs.v.id},
                              {"route", route_ids(net_, cmd.route.edges)},
                              {"eta_s", services_[si].active.last_advised_eta_s},
                              {"deadline_s", rel ? json(services_[si].active.deadline_abs_s) : json(nullptr)}});
    new_services_.push_back(si);
  }

  void on_activate_command(const ActivatePreemption& cmd) {
    auto si = service_of(cmd.request);
    if (!si) return;
    Service& s = services_[*si];
    const bool fresh = std::find(new_services_.begin(), new_services_.end(), *si) != new_services_.end();
    if (ordinal(cmd.level) > ordinal(s.active.level) && !fresh) {
      log(EventKind::EscalationApplied,
          {{"request", cmd.request}, {"from", to_string(s.active.level)}, {"to", to_string(cmd.level)}});
    }
    const Level p = ordinal(cmd.level) > ordinal(s.active.level) ? cmd.level : s.active.level;
    refresh_overlay(*si, p, s.active.resume_s);
  }

  /// Re-applies level p to the remaining route from t_s. Every disturbance
  /// item is charged once per service.
  void refresh_overlay(std::size_t si, Level p, double t_s) {
    Service& s = services_[si];
    s.active.level = p;
    if (p == Level::P0) return;
    PreemptionResult pre = apply(p, s.active.route, net_, state_, t_s, sc_.preemption);
    double cost = 0.0;
    json items = json::array();
    for (const DisturbanceItem& item : pre.disturbance.items) {
      if (!s.charged.insert(item.key()).second) continue;
      cost += item.vehicle_seconds;
      items.push_back({{"effect", to_string(item.effect)}, {"element", item.element}, {"vehicle_s", item.vehicle_seconds}});
    }
    for (const RecoveryEvent& ev : release(pre.overlay, now())) {
      s.overlay.set(ev.edge, *pre.overlay.find(ev.edge));
      const std::uint64_t gen = ++overlay_gen_;
      s.overlay_gen[ev.edge] = gen;
      schedule(to_ms(ev.time_s), Ev::OverlayExpiry, si, ev.edge, gen);
    }
    if (!items.empty() || s.logged_level != p) {
      s.logged_level = p;
      log(EventKind::PreemptionActivated, {{"request", s.active.task_id},
                                           {"level", to_string(p)},
                                           {"edges", route_ids(net_, s.active.route.edges)},
                                           {"cost", cost},
                                           {"items", std::move(items)}});
    }
  }

  void reroute(std::size_t si, const Route& route) {
    Service& s = services_[si];
    s.active.route = route;
    s.active.route.origin = s.active.resume_node;
    log(EventKind::Reroute, {{"request", s.active.task_id},
                             {"vehicle", s.active.vehicle},
                             {"route", route_ids(net_, route.edges)},
                             {"level", to_string(s.active.level)}});
  }

  // -- motion ----------------------------------------------------------------

  void try_advance(std::size_t si, bool allow_reroute) {
    Service& s = services_[si];
    VehicleState& vs = fleet_[s.vehicle];
    if (s.phase != Phase::ToPickup || vs.on_edge) return;
    if (s.active.route.edges.empty()) {
      arrive_pickup(si);
      return;
    }
    const EdgeIndex e = s.active.route.edges.front();
    s.active.resume_node = net_.edge(e).from;
    s.active.resume_s = now();
    if (s.active.level != Level::P0) refresh_overlay(si, s.active.level, now());
    const NetworkOverlay overlay = combined();
    auto tt = traversal_time(net_, e, now(), state_, overlay);
    if (!tt) {
      s.waiting = true;
      if (allow_reroute && variant_ != Variant::StaticRoute) {
        reevaluate({si}, "blocked");
        try_advance(si, false);
      }
      return;
    }
    s.waiting = false;
    json payload{{"vehicle", vs.v.id},
                 {"request", s.active.task_id},
                 {"edge", net_.edge(e).id},
                 {"traversal_s", *tt}};
    if (const EdgeOverlay* o = overlay.find(e)) {
      payload["overlay"] = {{"forced_green", o->forced_green},
                            {"reserved_lane", o->reserved_lane},
                            {"speed_cap_factor", o->speed_cap_factor},
                            {"reverse_enabled", o->reverse_enabled}};
    }
    log(EventKind::EdgeEntered, std::move(payload));
    vs.on_edge = e;
    vs.entered_ms = now_ms_;
    vs.exit_ms = now_ms_ + to_ms(*tt);
    s.active.route.edges.erase(s.active.route.edges.begin());
    s.active.route.origin = net_.edge(e).to;
    s.active.resume_node = net_.edge(e).to;
    s.active.resume_s = to_s(vs.exit_ms);
    schedule(vs.exit_ms, Ev::EdgeExit, s.vehicle, e);
  }

  void arrive_pickup(std::size_t si) {
    Service& s = services_[si];
    VehicleState& vs = fleet_[s.vehicle];
    const double response = now() - s.active.release_s;
    log(EventKind::ServiceCompleted, {{"request", s.active.task_id},
                                      {"vehicle", vs.v.id},
                                      {"response_s", response},
                                      {"level", to_string(s.active.level)}});
    s.phase = Phase::OnScene;
    vs.v.status = VehicleStatus::Serving;
    requests_[s.request].status = RequestStatus::Done;
    schedule(now_ms_ + to_ms(sc_.service.on_scene_s), Ev::OnSceneDone, si);
  }

  // -- monitoring ------------------------------------------------------------

  void reevaluation_pass(const char* trigger) {
    if (variant_ == Variant::StaticRoute) return;
    std::vector<std::size_t> active;
    for (std::size_t si = 0; si < services_.size(); ++si)
      if (services_[si].phase == Phase::ToPickup) active.push_back(si);
    reevaluate(active, trigger);
  }

  void reevaluate(const std::vector<std::size_t>& which, const char* trigger) {
    const NetworkOverlay overlay = combined();
    std::vector<Eta> refreshed;
    json entries = json::array();
    for (std::size_t si : which) {
      Service& s = services_[si];
      const VehicleState& vs = fleet_[s.vehicle];
      s.active.resume_s = vs.on_edge ? to_s(vs.exit_ms) : now();
      const double lead = s.active.resume_s - now();
      Eta rest = route_eta(net_, s.active.route, s.active.resume_s, state_, overlay);
      Eta eta = rest ? Eta(lead + *rest) : std::nullopt;
      refreshed.push_back(eta);
      entries.push_back({{"request", s.active.task_id}, {"eta_s", eta_json(eta)}, {"deadline_s", s.active.deadline_abs_s}});
    }
    log(EventKind::Reevaluation, {{"trigger", trigger}, {"services", std::move(entries)}});

    MonitorContext ctx{net_, state_, task_opts_, max_level_};
    for (std::size_t k = 0; k < which.size(); ++k) {
      const std::size_t si = which[k];
      MonitorOutcome out = monitor(services_[si].active, now(), refreshed[k], ctx);
      if (out.action == MonitorAction::NoAction) {
        if (out.eta_s) services_[si].active.last_advised_eta_s = *out.eta_s;
        continue;
      }
      if (out.action == MonitorAction::PredictedMiss)
        log(EventKind::PredictedMiss, {{"request", services_[si].active.task_id}, {"eta_s", eta_json(out.eta_s)}});
      for (const ScheduleDecision& d : out.decisions) execute(d);
      if (out.eta_s) services_[si].active.last_advised_eta_s = *out.eta_s;
    }
  }

  const Scenario& sc_;
  const RoadNetwork& net_;
  std::uint64_t seed_;
  Variant variant_;
  Level max_level_ = Level::P4;
  TaskOptions task_opts_;
  TrafficState state_;
  std::vector<VehicleState> fleet_;
  std::vector<RequestState> requests_;
  std::vector<Service> services_;
  std::vector<std::size_t> new_services_;
  PriorityOverrides overrides_;
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> queue_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t overlay_gen_ = 0;
  std::int64_t now_ms_ = 0;
  Trace trace_;
};

}  // namespace

Trace run(const Scenario& scenario, std::uint64_t seed, Variant variant) {
  return Simulation(scenario, seed, variant).run();
}

std::vector<Outcome> derive_outcomes(const std::vector<TraceRecord>& events) {
  std::vector<Outcome> out;
  std::map<std::string, std::size_t> index;
  auto ensure = [&](const json& p) -> Outcome& {
    const std::string id = p.at("request").get<std::string>();
    auto it = index.find(id);
    if (it != index.end()) return out[it->second];
    Outcome o;
    o.request = id;
    o.criticality = *parse_criticality(p.at("criticality").get<std::string>());
    o.mode = *parse_mode(p.at("mode").get<std::string>());
    o.release_s = p.at("release_s").get<double>();
    if (!p.at("deadline_s").is_null()) o.deadline_s = p.at("deadline_s").get<double>();
    index.emplace(id, out.size());
    out.push_back(std::move(o));
    return out.back();
  };
  auto find = [&](const json& p) -> Outcome* {
    auto it = index.find(p.at("request").get<std::string>());
    return it == index.end() ? nullptr : &out[it->second];
  };
  auto raise = [](Outcome& o, std::string_view level) {
    if (auto p = parse_level(level); p && ordinal(*p) > ordinal(o.final_level)) o.final_level = *p;
  };

  for (const TraceRecord& r : events) {
    switch (r.kind) {
      case EventKind::RequestArrival:
      case EventKind::HorizonExceeded:
        ensure(r.payload);
        break;
      case EventKind::ServiceCompleted:
        if (Outcome* o = find(r.payload)) {
          o->response_s = r.time_s() - o->release_s;
          o->met = !o->deadline_s || *o->response_s <= *o->deadline_s;
        }
        break;
      case EventKind::PreemptionActivated:
        if (Outcome* o = find(r.payload)) {
          o->disturbance += r.payload.at("cost").get<double>();
          raise(*o, r.payload.at("level").get<std::string>());
        }
        break;
      case EventKind::EscalationApplied:
        if (Outcome* o = find(r.payload)) raise(*o, r.payload.at("to").get<std::string>());
        break;
      default:
        break;
    }
  }
  return out;
}

std::optional<double> response_time(const Trace& trace, std::string_view request_id) {
  std::optional<double> release;
  for (const TraceRecord& r : trace.events) {
    const bool about = r.payload.contains("request") && r.payload["request"] == request_id;
    if (!about) continue;
    if ((r.kind == EventKind::RequestArrival || r.kind == EventKind::HorizonExceeded) && !release)
      release = r.payload.at("release_s").get<double>();
    if (r.kind == EventKind::ServiceCompleted && release) return r.time_s() - *release;
  }
  if (!release) throw Error(ErrorKind::UnknownRequest, "no such request in trace", std::string(request_id));
  return std::nullopt;
}

namespace {

std::string event_line(const TraceRecord& r) {
  json j = r.payload.is_object() ? r.payload : json::object();
  j["t_ms"] = r.time_ms;
  j["seq"] = r.seq;
  j["kind"] = to_string(r.kind);
  return j.dump() + "\n";
}

}  // namespace

std::string trace_digest(const Trace& trace) {
  std::string body;
  for (const TraceRecord& r : trace.events) body += event_line(r);
  return sha256_hex(body);
}

std::string trace_ndjson(const Trace& trace) {
  std::string body;
  for (const TraceRecord& r : trace.events) body += event_line(r);
  json outcomes = json::array();
  for (const Outcome& o : trace.outcomes) {
    outcomes.push_back({{"request", o.request},
                        {"criticality", to_string(o.criticality)},
                        {"mode", to_string(o.mode)},
                        {"release_s", o.release_s},
                        {"deadline_s", o.deadline_s ? json(*o.deadline_s) : json(nullptr)},
                        {"response_s", o.response_s ? json(*o.response_s) : json(nullptr)},
                        {"met", o.met},
                        {"final_level", to_string(o.final_level)},
                        {"disturbance", o.disturbance}});
  }
  json footer{{"kind", "Summary"},
              {"seed", trace.seed},
              {"variant", to_string(trace.variant)},
              {"horizon_s", trace.horizon_s},
              {"config_digest", trace.config_digest},
              {"trace_digest", sha256_hex(body)},
              {"outcomes", std::move(outcomes)}};
  return body + footer.dump() + "\n";
}

}  // namespace mcrts
