#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mcrts/network.hpp"
#include "mcrts/router.hpp"

namespace mcrts {

/// Cumulative pre-emption ladder. Each level includes every effect below it.
enum class Level : int {
  P0 = 0,  // none
  P1 = 1,  // green wave
  P2 = 2,  // lane reservation
  P3 = 3,  // speed cap raise
  P4 = 4,  // reverse lane
};

inline constexpr int kLevelCount = 5;
inline constexpr std::array<Level, kLevelCount> kAllLevels{Level::P0, Level::P1, Level::P2, Level::P3, Level::P4};

constexpr int ordinal(Level p) { return static_cast<int>(p); }
constexpr Level level_from(int p) { return static_cast<Level>(p); }
std::string_view to_string(Level p);
std::optional<Level> parse_level(std::string_view s);
std::string_view describe(Level p);

struct PreemptionConfig {
  double speed_cap_factor = 1.2;
  double recovery_s = 60.0;
  /// Seconds a forced green is held against the cross street.
  double green_hold_s = 30.0;
  double green_cost = 1.0;
  double lane_cost = 0.5;
  double reverse_cost = 2.0;
  /// Congestion at or above which an edge counts as saturated for P4.
  double saturation = 0.9;
};

enum class EffectKind { GreenWave, LaneReservation, SpeedCap, ReverseLane };
std::string_view to_string(EffectKind k);

struct DisturbanceItem {
  EffectKind effect = EffectKind::GreenWave;
  std::string element;  // node id for green waves, edge id otherwise
  double vehicle_seconds = 0.0;

  /// Stable key; the same effect on the same element is charged once per service.
  std::string key() const;
};

struct DisturbanceCost {
  std::vector<DisturbanceItem> items;
  double total() const;
};

struct PreemptionResult {
  NetworkOverlay overlay;
  DisturbanceCost disturbance;
};

/// Overlay and background-traffic cost of running `route` at level p,
/// departing at t_s. Overlay expiry is each edge's exit time plus recovery.
PreemptionResult apply(Level p, const Route& route, const RoadNetwork& net, const TrafficState& state, double t_s,
                       const PreemptionConfig& cfg = {});

/// Overlay with level p effects on every edge of the network. Used to find
/// routes that only pay off under pre-emption; never handed to the kernel.
NetworkOverlay network_wide(Level p, const RoadNetwork& net, const TrafficState& state,
                            const PreemptionConfig& cfg = {});

struct RecoveryEvent {
  EdgeIndex edge = 0;
  double time_s = 0.0;

  friend bool operator==(const RecoveryEvent&, const RecoveryEvent&) = default;
};

/// One expiry per overlaid edge, sorted by time then edge. Expiries earlier
/// than t_s are moved to t_s.
std::vector<RecoveryEvent> release(const NetworkOverlay& overlay, double t_s);

}  // namespace mcrts
