#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mcrts/analogy.hpp"
#include "mcrts/network.hpp"
#include "mcrts/preemption.hpp"

namespace mcrts {

struct ScriptedUpdate {
  double t_s = 0.0;
  TrafficDelta delta;
};

/// Per-edge congestion random walk sampled at every tick.
struct BackgroundModel {
  bool enabled = false;
  double step = 0.02;
};

struct SchedulerConfig {
  std::size_t reserved_vehicles = 0;
  /// C0/C1 requests queued this long are promoted to the top priority class.
  double aging_s = 900.0;
};

struct ServiceConfig {
  double on_scene_s = 300.0;
};

/// A validated "mcrts-scn/1" document with every reference resolved.
struct Scenario {
  RoadNetwork net;
  std::vector<Vehicle> fleet;
  std::vector<EmergencyRequest> requests;  // sorted by (release_s, id)
  TrafficState initial;
  std::vector<ScriptedUpdate> updates;  // sorted by t_s, stable
  BackgroundModel background;
  DeadlinePolicy policy;
  PreemptionConfig preemption;
  std::size_t k_routes = 3;
  SchedulerConfig scheduler;
  ServiceConfig service;
  double horizon_s = 3600.0;
  double tick_s = 10.0;
  /// Canonical JSON of the scenario with the network inlined; input to the
  /// config digest.
  std::string canonical;
};

/// Parses a scenario document. A string-valued "network" is resolved
/// against base_dir. Every failure is Error{InvalidScenario} naming the
/// offending document path.
Scenario load_scenario(std::string_view document, const std::string& base_dir = ".");
Scenario load_scenario_file(const std::string& path);

/// Parses a "policy" value: a preset key or an object
/// {"preset", "deadlines", "targets", "safety_margin"}.
DeadlinePolicy parse_policy(const nlohmann::json& value, const std::string& path = "policy");

/// Resolves --policy: a preset key, or a path to a JSON file holding a
/// policy object.
DeadlinePolicy load_policy(const std::string& preset_or_path);

}  // namespace mcrts
