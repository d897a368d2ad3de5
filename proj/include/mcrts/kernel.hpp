#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mcrts/analogy.hpp"
#include "mcrts/scenario.hpp"

namespace mcrts {

enum class Variant {
  Mcrts,
  NoPreemption,  // ladder truncated to P0
  StaticRoute,   // route fixed at dispatch, no monitoring
};
std::string_view to_string(Variant v);
std::optional<Variant> parse_variant(std::string_view s);

enum class EventKind {
  RequestArrival,
  Queued,
  Dispatch,
  PreemptionActivated,
  EdgeEntered,
  EdgeExited,
  ServiceCompleted,
  VehicleReleased,
  StateUpdate,
  Reevaluation,
  Reroute,
  EscalationApplied,
  PredictedMiss,
  DeadlineExtended,
  PriorityAltered,
  OverlayExpiry,
  HorizonExceeded,
};
std::string_view to_string(EventKind k);
std::optional<EventKind> parse_event_kind(std::string_view s);

/// One logged event. `payload` holds the kind-specific fields; times inside
/// it are in seconds.
struct TraceRecord {
  std::int64_t time_ms = 0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::StateUpdate;
  nlohmann::json payload;

  double time_s() const { return static_cast<double>(time_ms) / 1000.0; }
};

/// Per-request result. deadline_s is the policy deadline (relative to
/// release); extensions granted at run time do not change `met`.
struct Outcome {
  std::string request;
  Criticality criticality = Criticality::C3;
  Mode mode = Mode::E1;
  double release_s = 0.0;
  std::optional<double> deadline_s;
  std::optional<double> response_s;  // nullopt = Unserved
  bool met = false;
  Level final_level = Level::P0;
  double disturbance = 0.0;

  friend bool operator==(const Outcome&, const Outcome&) = default;
};

struct Trace {
  std::vector<TraceRecord> events;
  std::vector<Outcome> outcomes;  // scenario request order
  std::uint64_t seed = 0;
  Variant variant = Variant::Mcrts;
  double horizon_s = 0.0;
  std::string config_digest;
};

/// Executes the scenario to its horizon. Single-threaded and bit-for-bit
/// deterministic in (scenario, seed, variant).
Trace run(const Scenario& scenario, std::uint64_t seed, Variant variant = Variant::Mcrts);

/// Recomputes every outcome from the raw event log.
std::vector<Outcome> derive_outcomes(const std::vector<TraceRecord>& events);

/// Pickup arrival minus release, from the event log. nullopt = Unserved.
/// Throws UnknownRequest.
std::optional<double> response_time(const Trace& trace, std::string_view request_id);

/// One JSON object per line, events first, then a "Summary" footer.
std::string trace_ndjson(const Trace& trace);
/// Hex SHA-256 of the event lines (footer excluded).
std::string trace_digest(const Trace& trace);
std::string sha256_hex(std::string_view bytes);

}  // namespace mcrts
