#include "mcrts/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json_fields.hpp"
#include "mcrts/error.hpp"

namespace mcrts {

using nlohmann::json;

namespace {

constexpr ErrorKind kBad = ErrorKind::InvalidScenario;

[[noreturn]] void fail(const std::string& message, const std::string& path) { throw Error(kBad, message, path); }

double number(const json& o, const char* key, const std::string& path) {
  return detail::number(o, key, path, kBad);
}

std::string text(const json& o, const char* key, const std::string& path) { return detail::text(o, key, path, kBad); }

double optional_number(const json& o, const char* key, const std::string& path, double fallback) {
  return o.contains(key) ? number(o, key, path) : fallback;
}

const json& object_at(const json& v, const std::string& path) {
  if (!v.is_object()) fail("expected an object", path);
  return v;
}

const json& array_of(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) fail(std::string("missing field '") + key + "'", key);
  if (!it->is_array()) fail("expected an array", key);
  return *it;
}

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

NodeIndex node_ref(const RoadNetwork& net, const json& o, const char* key, const std::string& path) {
  const std::string id = text(o, key, path);
  auto n = net.find_node(id);
  if (!n) fail("unknown node '" + id + "'", detail::join(path, key));
  return *n;
}

EdgeIndex edge_ref(const RoadNetwork& net, const json& o, const char* key, const std::string& path) {
  const std::string id = text(o, key, path);
  auto e = net.find_edge(id);
  if (!e) fail("unknown edge '" + id + "'", detail::join(path, key));
  return *e;
}

EdgeChange parse_change(const RoadNetwork& net, const json& o, const std::string& path) {
  object_at(o, path);
  EdgeChange c;
  c.edge = edge_ref(net, o, "edge", path);
  if (o.contains("congestion")) {
    const double v = number(o, "congestion", path);
    if (!(v >= 0.0 && v <= 1.0)) fail("congestion must lie in [0, 1]", path + ".congestion");
    c.congestion = v;
  }
  if (o.contains("pedestrian_flow")) {
    const double v = number(o, "pedestrian_flow", path);
    if (!(v >= 0.0) || !std::isfinite(v)) fail("pedestrian_flow must be >= 0", path + ".pedestrian_flow");
    c.pedestrian_flow = v;
  }
  if (o.contains("queued_vehicles")) {
    const double v = number(o, "queued_vehicles", path);
    if (!(v >= 0.0) || v != std::floor(v)) fail("queued_vehicles must be a non-negative integer", path + ".queued_vehicles");
    c.queued_vehicles = static_cast<long>(v);
  }
  if (o.contains("halted")) {
    if (!o["halted"].is_boolean()) fail("expected a boolean", path + ".halted");
    c.halted = o["halted"].get<bool>();
  }
  return c;
}

Vehicle parse_vehicle(const RoadNetwork& net, const json& o, const std::string& path) {
  object_at(o, path);
  Vehicle v;
  v.id = text(o, "id", path);
  const std::string kind = text(o, "kind", path);
  auto k = parse_vehicle_kind(kind);
  if (!k) fail("unknown vehicle kind '" + kind + "'", path + ".kind");
  v.kind = *k;
  if (o.contains("edge")) {
    const EdgeIndex e = edge_ref(net, o, "edge", path);
    const double offset = optional_number(o, "offset", path, 0.0);
    if (!(offset >= 0.0 && offset < 1.0)) fail("offset must lie in [0, 1)", path + ".offset");
    v.location = VehicleLocation{net.edge(e).from, e, offset};
  } else {
    v.location = VehicleLocation{node_ref(net, o, "node", path), std::nullopt, 0.0};
  }
  return v;
}

EmergencyRequest parse_request(const RoadNetwork& net, const json& o, const std::string& path) {
  object_at(o, path);
  EmergencyRequest r;
  r.id = text(o, "id", path);
  r.release_s = number(o, "release_s", path);
  if (!(r.release_s >= 0.0) || !std::isfinite(r.release_s)) fail("release_s must be >= 0", path + ".release_s");
  const std::string mode = o.contains("mode") ? text(o, "mode", path) : "E1";
  auto m = parse_mode(mode);
  if (!m) fail("unknown mode '" + mode + "'", path + ".mode");
  r.mode = *m;
  const std::string crit = text(o, "criticality", path);
  auto c = parse_criticality(crit);
  if (!c) fail("unknown criticality '" + crit + "'", path + ".criticality");
  r.criticality = *c;
  r.pickup = node_ref(net, o, "pickup", path);
  if (o.contains("destination") && !o["destination"].is_null()) r.destination = node_ref(net, o, "destination", path);
  if (o.contains("vehicle_kind")) {
    const std::string kind = text(o, "vehicle_kind", path);
    auto k = parse_vehicle_kind(kind);
    if (!k) fail("unknown vehicle kind '" + kind + "'", path + ".vehicle_kind");
    r.requested_kind = *k;
  }
  try {
    r.validate();
  } catch (const Error& e) {
    fail(e.what(), path);
  }
  return r;
}

PreemptionConfig parse_preemption(const json& o, const std::string& path) {
  object_at(o, path);
  PreemptionConfig c;
  c.speed_cap_factor = optional_number(o, "speed_cap_factor", path, c.speed_cap_factor);
  c.recovery_s = optional_number(o, "recovery_s", path, c.recovery_s);
  c.green_hold_s = optional_number(o, "green_hold_s", path, c.green_hold_s);
  c.green_cost = optional_number(o, "green_cost", path, c.green_cost);
  c.lane_cost = optional_number(o, "lane_cost", path, c.lane_cost);
  c.reverse_cost = optional_number(o, "reverse_cost", path, c.reverse_cost);
  c.saturation = optional_number(o, "saturation", path, c.saturation);
  if (!(c.speed_cap_factor >= 1.0)) fail("speed_cap_factor must be >= 1", path + ".speed_cap_factor");
  for (auto [v, key] : {std::pair{c.recovery_s, "recovery_s"}, {c.green_hold_s, "green_hold_s"},
                        {c.green_cost, "green_cost"}, {c.lane_cost, "lane_cost"}, {c.reverse_cost, "reverse_cost"}})
    if (!(v >= 0.0) || !std::isfinite(v)) fail("must be a finite value >= 0", path + "." + key);
  if (!(c.saturation > 0.0 && c.saturation <= 1.0)) fail("saturation must lie in (0, 1]", path + ".saturation");
  return c;
}

json policy_json(const DeadlinePolicy& p) {
  json deadlines = json::object(), targets = json::object();
  for (Criticality c : kAllCriticalities) {
    const std::string key(to_string(c));
    const auto& d = p.deadline_s[ordinal(c)];
    deadlines[key] = d ? json(*d) : json(nullptr);
    json t = json::array();
    for (const Target& x : p.targets[ordinal(c)]) t.push_back({{"fraction", x.fraction}, {"seconds", x.seconds}});
    targets[key] = std::move(t);
  }
  return {{"name", p.name}, {"deadlines", deadlines}, {"targets", targets}, {"safety_margin", p.safety_margin}};
}

}  // namespace

DeadlinePolicy parse_policy(const json& value, const std::string& path) {
  DeadlinePolicy p;
  try {
    if (value.is_string()) return DeadlinePolicy::preset(value.get<std::string>());
    object_at(value, path);
    if (value.contains("preset")) p = DeadlinePolicy::preset(text(value, "preset", path));
    if (value.contains("name")) p.name = text(value, "name", path);
    if (auto d = value.find("deadlines"); d != value.end()) {
      object_at(*d, path + ".deadlines");
      for (const auto& [key, v] : d->items()) {
        auto c = parse_criticality(key);
        if (!c) fail("unknown criticality '" + key + "'", path + ".deadlines." + key);
        if (v.is_null()) {
          p.deadline_s[ordinal(*c)] = std::nullopt;
        } else if (v.is_number()) {
          p.deadline_s[ordinal(*c)] = v.get<double>();
        } else {
          fail("expected a number or null", path + ".deadlines." + key);
        }
      }
    }
    if (auto t = value.find("targets"); t != value.end()) {
      object_at(*t, path + ".targets");
      for (const auto& [key, v] : t->items()) {
        const std::string tp = path + ".targets." + key;
        auto c = parse_criticality(key);
        if (!c) fail("unknown criticality '" + key + "'", tp);
        if (!v.is_array()) fail("expected an array", tp);
        std::vector<Target> list;
        for (std::size_t i = 0; i < v.size(); ++i)
          list.push_back(Target{number(v[i], "fraction", detail::at(tp, i)), number(v[i], "seconds", detail::at(tp, i))});
        p.targets[ordinal(*c)] = std::move(list);
      }
    }
    p.safety_margin = optional_number(value, "safety_margin", path, p.safety_margin);
    p.validate();
  } catch (const Error& e) {
    if (e.kind() == kBad) throw;
    throw Error(kBad, e.what(), e.path().empty() ? path : path + "." + e.path());
  }
  return p;
}

DeadlinePolicy load_policy(const std::string& preset_or_path) {
  try {
    return DeadlinePolicy::preset(preset_or_path);
  } catch (const Error&) {
  }
  auto body = read_file(preset_or_path);
  if (!body) fail("not a preset and cannot read policy file '" + preset_or_path + "'", "policy");
  json doc;
  try {
    doc = json::parse(*body);
  } catch (const json::parse_error& e) {
    fail(std::string("malformed policy file: ") + e.what(), "policy");
  }
  return parse_policy(doc);
}

Scenario load_scenario(std::string_view document, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    fail(std::string("malformed document: ") + e.what(), "");
  }
  if (!doc.is_object()) fail("top level must be an object", "");
  if (auto f = doc.find("format"); f != doc.end() && *f != "mcrts-scn/1") fail("unsupported format", "format");

  // Network: inline object or a file path relative to the scenario.
  auto jn = doc.find("network");
  if (jn == doc.end()) fail("missing field 'network'", "network");
  std::string net_text;
  if (jn->is_string()) {
    std::filesystem::path p(jn->get<std::string>());
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    auto body = read_file(p.string());
    if (!body) fail("cannot read network file '" + p.string() + "'", "network");
    net_text = *body;
  } else if (jn->is_object()) {
    net_text = jn->dump();
  } else {
    fail("expected a file path or an inline network object", "network");
  }
  Scenario s;
  try {
    s.net = load_network(net_text);
  } catch (const Error& e) {
    throw Error(kBad, e.what(), e.path().empty() ? "network" : "network." + e.path());
  }
  const RoadNetwork& net = s.net;

  std::set<std::string> ids;
  const json& fleet = array_of(doc, "fleet");
  for (std::size_t i = 0; i < fleet.size(); ++i) {
    Vehicle v = parse_vehicle(net, fleet[i], detail::at("fleet", i));
    if (!ids.insert(v.id).second) fail("duplicate vehicle id '" + v.id + "'", detail::at("fleet", i) + ".id");
    s.fleet.push_back(std::move(v));
  }

  ids.clear();
  const json& requests = array_of(doc, "requests");
  for (std::size_t i = 0; i < requests.size(); ++i) {
    EmergencyRequest r = parse_request(net, requests[i], detail::at("requests", i));
    if (!ids.insert(r.id).second) fail("duplicate request id '" + r.id + "'", detail::at("requests", i) + ".id");
    s.requests.push_back(std::move(r));
  }
  std::stable_sort(s.requests.begin(), s.requests.end(), [](const auto& a, const auto& b) {
    return std::tie(a.release_s, a.id) < std::tie(b.release_s, b.id);
  });

  s.horizon_s = number(doc, "horizon_s", "");
  if (!(s.horizon_s > 0.0) || !std::isfinite(s.horizon_s)) fail("horizon_s must be positive", "horizon_s");
  s.tick_s = optional_number(doc, "tick_s", "", 10.0);
  if (!(s.tick_s > 0.0) || !std::isfinite(s.tick_s)) fail("tick_s must be positive", "tick_s");

  s.initial = TrafficState(net);
  if (auto init = doc.find("initial_state"); init != doc.end()) {
    if (!init->is_array()) fail("expected an array", "initial_state");
    TrafficDelta delta;
    for (std::size_t i = 0; i < init->size(); ++i)
      delta.push_back(parse_change(net, (*init)[i], detail::at("initial_state", i)));
    s.initial = apply_update(s.initial, delta, 0.0);
  }

  if (auto ups = doc.find("updates"); ups != doc.end()) {
    if (!ups->is_array()) fail("expected an array", "updates");
    for (std::size_t i = 0; i < ups->size(); ++i) {
      const std::string path = detail::at("updates", i);
      const json& u = object_at((*ups)[i], path);
      ScriptedUpdate su;
      su.t_s = number(u, "t_s", path);
      if (!(su.t_s >= 0.0 && su.t_s <= s.horizon_s)) fail("t_s must lie in [0, horizon_s]", path + ".t_s");
      const json& ch = detail::require(u, "changes", path, kBad);
      if (!ch.is_array()) fail("expected an array", path + ".changes");
      for (std::size_t j = 0; j < ch.size(); ++j)
        su.delta.push_back(parse_change(net, ch[j], detail::at(path + ".changes", j)));
      s.updates.push_back(std::move(su));
    }
    std::stable_sort(s.updates.begin(), s.updates.end(), [](const auto& a, const auto& b) { return a.t_s < b.t_s; });
  }

  if (auto bg = doc.find("background"); bg != doc.end()) {
    object_at(*bg, "background");
    s.background.enabled = bg->value("enabled", false);
    s.background.step = optional_number(*bg, "step", "background", s.background.step);
    if (!(s.background.step >= 0.0 && s.background.step <= 1.0)) fail("step must lie in [0, 1]", "background.step");
  }

  if (auto p = doc.find("policy"); p != doc.end()) s.policy = parse_policy(*p);
  if (auto p = doc.find("preemption"); p != doc.end()) s.preemption = parse_preemption(*p, "preemption");
  if (auto r = doc.find("routing"); r != doc.end()) {
    object_at(*r, "routing");
    const double k = optional_number(*r, "k_routes", "routing", 3.0);
    if (!(k >= 1.0) || k != std::floor(k) || k > 32.0) fail("k_routes must be an integer in [1, 32]", "routing.k_routes");
    s.k_routes = static_cast<std::size_t>(k);
  }
  if (auto sc = doc.find("scheduler"); sc != doc.end()) {
    object_at(*sc, "scheduler");
    const double reserved = optional_number(*sc, "reserved_vehicles", "scheduler", 0.0);
    if (!(reserved >= 0.0) || reserved != std::floor(reserved))
      fail("reserved_vehicles must be a non-negative integer", "scheduler.reserved_vehicles");
    s.scheduler.reserved_vehicles = static_cast<std::size_t>(reserved);
    s.scheduler.aging_s = optional_number(*sc, "aging_s", "scheduler", s.scheduler.aging_s);
    if (!(s.scheduler.aging_s > 0.0)) fail("aging_s must be positive", "scheduler.aging_s");
  }
  if (auto sv = doc.find("service"); sv != doc.end()) {
    object_at(*sv, "service");
    s.service.on_scene_s = optional_number(*sv, "on_scene_s", "service", s.service.on_scene_s);
    if (!(s.service.on_scene_s >= 0.0) || !std::isfinite(s.service.on_scene_s))
      fail("on_scene_s must be >= 0", "service.on_scene_s");
  }

  json canonical = doc;
  canonical["network"] = json::parse(network_to_json(net));
  canonical["policy"] = policy_json(s.policy);
  s.canonical = canonical.dump();
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  auto body = read_file(path);
  if (!body) fail("cannot read scenario file '" + path + "'", "");
  return load_scenario(*body, std::filesystem::path(path).parent_path().string().empty()
                                  ? std::string(".")
                                  : std::filesystem::path(path).parent_path().string());
}

}  // namespace mcrts
