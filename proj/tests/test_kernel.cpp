#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "mcrts/error.hpp"
#include "mcrts/harness.hpp"
#include "mcrts/kernel.hpp"
#include "scenarios.hpp"

using namespace mcrts;
using nlohmann::json;

namespace {

std::vector<const TraceRecord*> of_kind(const Trace& t, EventKind k) {
  std::vector<const TraceRecord*> out;
  for (const auto& r : t.events)
    if (r.kind == k) out.push_back(&r);
  return out;
}

std::string scenario_error_path(const json& doc) {
  try {
    load_scenario(doc.dump());
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidScenario);
    return e.path();
  }
  FAIL("document was accepted");
  return {};
}

/// Straight road A->B of `length_m` at 20 m/s with no delays; one ambulance
/// at A and one C3 request at B.
json straight_road(double length_m, double release_s) {
  json doc = scenarios::empty_doc(2000.0);
  doc["network"]["edges"][0]["length_m"] = length_m;
  doc["fleet"] = json::array({{{"id", "amb1"}, {"kind", "ambulance"}, {"node", "A"}}});
  doc["requests"] = json::array({{{"id", "r1"}, {"release_s", release_s}, {"criticality", "C3"}, {"pickup", "B"}}});
  return doc;
}

json generated(std::uint64_t seed, LoadProfile load = LoadProfile::Default) {
  return json::parse(generate_scenario(6, seed, load));
}

}  // namespace

TEST_CASE("empty scenario logs only ticks and their reevaluation passes") {
  const Scenario s = scenarios::load(scenarios::empty_doc(60.0));
  const Trace t = run(s, 1);
  CHECK(t.outcomes.empty());
  REQUIRE(t.events.size() == 12);  // ticks at 10..60 s
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    CHECK(t.events[i].kind == (i % 2 == 0 ? EventKind::StateUpdate : EventKind::Reevaluation));
    CHECK(t.events[i].time_ms == static_cast<std::int64_t>((i / 2 + 1) * 10000));
    CHECK(t.events[i].seq == i);
  }
}

TEST_CASE("response time is pickup arrival minus release") {
  SUBCASE("simulated: release 50, arrival 530") {
    const Trace t = run(scenarios::load(straight_road(9600.0, 50.0)), 3);
    REQUIRE(response_time(t, "r1").has_value());
    CHECK(*response_time(t, "r1") == doctest::Approx(480.0).epsilon(1e-12));
    REQUIRE(t.outcomes.size() == 1);
    CHECK(t.outcomes[0].met);  // 480 <= 480
    const auto done = of_kind(t, EventKind::ServiceCompleted);
    REQUIRE(done.size() == 1);
    CHECK(done[0]->time_ms == 530000);
  }
  SUBCASE("hand-built trace") {
    Trace t;
    json meta{{"request", "r9"}, {"criticality", "C2"}, {"mode", "E1"}, {"release_s", 50.0},
              {"deadline_s", 480.0}, {"pickup", "B"}};
    t.events.push_back({50000, 0, EventKind::RequestArrival, meta});
    t.events.push_back({530000, 1, EventKind::ServiceCompleted, {{"request", "r9"}, {"vehicle", "v"}, {"response_s", 480.0}, {"level", "P0"}}});
    CHECK(*response_time(t, "r9") == 480.0);
    CHECK_THROWS_AS(response_time(t, "nope"), Error);
    try {
      response_time(t, "nope");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::UnknownRequest);
    }
  }
  SUBCASE("no vehicle: Unserved") {
    json doc = straight_road(500.0, 10.0);
    doc["fleet"] = json::array();
    const Trace t = run(scenarios::load(doc), 1);
    CHECK_FALSE(response_time(t, "r1").has_value());
    REQUIRE(t.outcomes.size() == 1);
    CHECK_FALSE(t.outcomes[0].met);
    CHECK(of_kind(t, EventKind::Queued).size() == 1);
    CHECK(of_kind(t, EventKind::HorizonExceeded).size() == 1);
  }
}

TEST_CASE("same scenario and seed give the same digest; different seeds differ") {
  const Scenario s = scenarios::load(generated(11));
  const Trace a = run(s, 5), b = run(s, 5), c = run(s, 6);
  CHECK(trace_digest(a) == trace_digest(b));
  CHECK(trace_ndjson(a) == trace_ndjson(b));
  CHECK(a.config_digest == b.config_digest);
  CHECK(trace_digest(a) != trace_digest(c));
  CHECK(a.config_digest != run(s, 5, Variant::NoPreemption).config_digest);
}

TEST_CASE("sha256 matches known vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("halt injection: reevaluation and reroute follow the update before the halted edge is entered") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    CAPTURE(seed);
    const auto h = scenarios::halt_injection(seed);
    const Trace t = run(scenarios::load(h.doc), seed);
    const auto halt_ms = static_cast<std::int64_t>(std::llround(h.halt_at_s * 1000.0));
    auto update = std::find_if(t.events.begin(), t.events.end(), [&](const TraceRecord& r) {
      return r.kind == EventKind::StateUpdate && r.payload.value("source", "") == "script";
    });
    REQUIRE(update != t.events.end());
    CHECK(update->time_ms == halt_ms);
    auto reeval = std::find_if(update, t.events.end(), [](const TraceRecord& r) { return r.kind == EventKind::Reevaluation; });
    auto reroute = std::find_if(update, t.events.end(), [](const TraceRecord& r) {
      return r.kind == EventKind::Reroute || r.kind == EventKind::EscalationApplied;
    });
    REQUIRE(reeval != t.events.end());
    REQUIRE(reroute != t.events.end());
    CHECK(reeval->time_ms - halt_ms <= 10000);
    CHECK(reroute->time_ms - halt_ms <= 10000);
    for (const auto& r : t.events)
      if (r.kind == EventKind::EdgeEntered) CHECK(r.payload["edge"] != h.halted_edge);
    CHECK(response_time(t, "r1").has_value());
  }
}

TEST_CASE("static_route never reevaluates, so it waits at the halted edge") {
  const auto h = scenarios::halt_injection(3);
  const Trace t = run(scenarios::load(h.doc), 3, Variant::StaticRoute);
  CHECK(of_kind(t, EventKind::Reroute).empty());
  for (const auto* r : of_kind(t, EventKind::Reevaluation)) CHECK(r->payload["services"].empty());
  CHECK_FALSE(response_time(t, "r1").has_value());
}

TEST_CASE("trace invariants on generated scenarios") {
  for (std::uint64_t seed : {2u, 9u, 21u}) {
    for (Variant v : {Variant::Mcrts, Variant::NoPreemption, Variant::StaticRoute}) {
      CAPTURE(seed);
      CAPTURE(to_string(v));
      const Scenario s = scenarios::load(generated(seed, LoadProfile::Rush));
      const Trace t = run(s, seed, v);

      // Causality: non-decreasing time, dense sequence numbers.
      for (std::size_t i = 0; i < t.events.size(); ++i) {
        CHECK(t.events[i].seq == i);
        if (i) CHECK(t.events[i - 1].time_ms <= t.events[i].time_ms);
      }

      // Motion consistency: every exit lands exactly traversal_s after its entry.
      std::map<std::string, const TraceRecord*> on_edge;
      for (const auto& r : t.events) {
        if (r.kind == EventKind::EdgeEntered) {
          const std::string veh = r.payload["vehicle"];
          CHECK(on_edge.count(veh) == 0);
          on_edge[veh] = &r;
        } else if (r.kind == EventKind::EdgeExited) {
          const std::string veh = r.payload["vehicle"];
          REQUIRE(on_edge.count(veh) == 1);
          const TraceRecord* in = on_edge[veh];
          CHECK(in->payload["edge"] == r.payload["edge"]);
          CHECK(r.time_ms - in->time_ms == std::llround(in->payload["traversal_s"].get<double>() * 1000.0));
          on_edge.erase(veh);
        }
      }

      // Conservation: each request ends exactly once, served or past the horizon.
      std::map<std::string, int> ends, arrivals, dispatches;
      for (const auto& r : t.events) {
        if (r.kind == EventKind::ServiceCompleted || r.kind == EventKind::HorizonExceeded) ++ends[r.payload["request"]];
        if (r.kind == EventKind::RequestArrival) ++arrivals[r.payload["request"]];
        if (r.kind == EventKind::Dispatch) ++dispatches[r.payload["request"]];
      }
      for (const auto& req : s.requests) {
        CAPTURE(req.id);
        CHECK(arrivals[req.id] == (req.release_s <= s.horizon_s ? 1 : 0));
        CHECK(dispatches[req.id] <= 1);
        CHECK(ends[req.id] == 1);
      }

      // A vehicle is never dispatched while busy.
      std::set<std::string> busy;
      for (const auto& r : t.events) {
        if (r.kind == EventKind::Dispatch) CHECK(busy.insert(r.payload["vehicle"].get<std::string>()).second);
        if (r.kind == EventKind::VehicleReleased) busy.erase(r.payload["vehicle"].get<std::string>());
      }

      CHECK(derive_outcomes(t.events) == t.outcomes);
      CHECK(t.outcomes.size() == s.requests.size());
      if (v == Variant::NoPreemption) CHECK(of_kind(t, EventKind::PreemptionActivated).empty());
      for (const auto& o : t.outcomes) {
        CHECK(o.met == (o.response_s && o.deadline_s ? *o.response_s <= *o.deadline_s : o.response_s && !o.deadline_s));
        if (o.response_s) CHECK(*response_time(t, o.request) == *o.response_s);
      }
    }
  }
}

TEST_CASE("trace serialization") {
  const Trace t = run(scenarios::load(straight_road(600.0, 0.0)), 4);
  const std::string nd = trace_ndjson(t);
  std::vector<json> lines;
  std::size_t start = 0;
  for (std::size_t p; (p = nd.find('\n', start)) != std::string::npos; start = p + 1)
    lines.push_back(json::parse(nd.substr(start, p - start)));
  REQUIRE(lines.size() == t.events.size() + 1);
  CHECK(lines.back()["kind"] == "Summary");
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    CHECK(lines[i]["kind"] == to_string(t.events[i].kind));
    CHECK(lines[i]["t_ms"] == t.events[i].time_ms);
    CHECK(parse_event_kind(lines[i]["kind"].get<std::string>()) == t.events[i].kind);
  }
  CHECK(trace_digest(t).size() == 64);
}

TEST_CASE("variant and event names round-trip") {
  for (Variant v : {Variant::Mcrts, Variant::NoPreemption, Variant::StaticRoute}) CHECK(parse_variant(to_string(v)) == v);
  CHECK(parse_variant("turbo") == std::nullopt);
  for (int k = 0; k <= static_cast<int>(EventKind::HorizonExceeded); ++k) {
    const auto kind = static_cast<EventKind>(k);
    CHECK(parse_event_kind(to_string(kind)) == kind);
  }
}

TEST_CASE("scenario loader reports the offending path") {
  json doc = straight_road(500.0, 0.0);
  SUBCASE("unknown pickup") {
    doc["requests"][0]["pickup"] = "Z";
    CHECK(scenario_error_path(doc) == "requests[0].pickup");
  }
  SUBCASE("E0 for a life-threatening request") {
    doc["requests"][0]["mode"] = "E0";
    doc["requests"][0]["destination"] = "A";
    CHECK(scenario_error_path(doc) == "requests[0]");
  }
  SUBCASE("bad edge length in an inline network") {
    doc["network"]["edges"][0]["length_m"] = -1;
    CHECK(scenario_error_path(doc).rfind("network.edges[0]", 0) == 0);
  }
  SUBCASE("unknown vehicle kind") {
    doc["fleet"][0]["kind"] = "hovercraft";
    CHECK(scenario_error_path(doc) == "fleet[0].kind");
  }
  SUBCASE("duplicate request id") {
    doc["requests"].push_back(doc["requests"][0]);
    CHECK(scenario_error_path(doc) == "requests[1].id");
  }
  SUBCASE("update outside the horizon") {
    doc["updates"] = json::array({{{"t_s", 5000}, {"changes", json::array()}}});
    CHECK(scenario_error_path(doc) == "updates[0].t_s");
  }
  SUBCASE("missing network file") {
    doc["network"] = "does-not-exist.net.json";
    CHECK(scenario_error_path(doc) == "network");
  }
  SUBCASE("malformed JSON") {
    CHECK_THROWS_AS(load_scenario("{not json"), Error);
  }
}

TEST_CASE("network file is resolved against the scenario directory") {
  const auto dir = std::filesystem::temp_directory_path() / "mcrts_test_kernel_split";
  std::filesystem::create_directories(dir);
  GenConfig g;
  g.grid_n = 3;
  g.seed = 4;
  g.split_network = true;
  g.out_path = (dir / "tiny.json").string();
  std::ostringstream out, err;
  REQUIRE(cmd_gen(g, out, err) == kExitOk);
  const Scenario split = load_scenario_file(*g.out_path);
  const Scenario inline_doc = load_scenario(generate_scenario(3, 4, LoadProfile::Default));
  CHECK(split.canonical == inline_doc.canonical);
  CHECK(trace_digest(run(split, 1)) == trace_digest(run(inline_doc, 1)));
}
