#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "mcrts/metrics.hpp"

using namespace mcrts;
using nlohmann::json;

namespace {

/// Minimal trace holding only outcomes (and PreemptionActivated records when
/// costs are given).
Trace with_outcomes(const std::vector<std::pair<Criticality, std::optional<double>>>& rows, double horizon_s = 3600.0) {
  Trace t;
  t.horizon_s = horizon_s;
  const DeadlinePolicy nz = DeadlinePolicy::preset("nz");
  int i = 0;
  for (const auto& [c, response] : rows) {
    Outcome o;
    o.request = "r" + std::to_string(++i);
    o.criticality = c;
    o.mode = c == Criticality::C0 ? Mode::E0 : Mode::E1;
    o.deadline_s = deadline_for(c, nz);
    o.response_s = response;
    o.met = response && (!o.deadline_s || *response <= *o.deadline_s);
    t.outcomes.push_back(o);
  }
  return t;
}

void add_activation(Trace& t, double cost) {
  t.events.push_back({0, t.events.size(), EventKind::PreemptionActivated,
                      {{"request", "r1"}, {"level", "P1"}, {"edges", json::array()}, {"cost", cost}, {"items", json::array()}}});
}

}  // namespace

TEST_CASE("C3 responses 300, 400, 500, 700 give 0.5 within 480 s and 1.0 within 1200 s") {
  const Trace t = with_outcomes({{Criticality::C3, 300.0}, {Criticality::C3, 400.0}, {Criticality::C3, 500.0}, {Criticality::C3, 700.0}});
  const auto rep = compliance(t, DeadlinePolicy::preset("nz"));
  const ClassReport& c3 = rep.at("C3");
  REQUIRE(c3.targets.size() == 2);
  CHECK(c3.targets[0].achieved == 0.5);
  CHECK(c3.targets[0].pass);
  CHECK(c3.targets[1].achieved == 1.0);
  CHECK(c3.targets[1].pass);
  CHECK(c3.p50 == 400.0);
  CHECK(c3.p90 == 700.0);
  CHECK(rep.at("C2+C3").count == 4);
  CHECK_FALSE(rep.at("C2").applicable());
}

TEST_CASE("empty trace: every class is not applicable") {
  const auto rep = compliance(Trace{}, DeadlinePolicy::preset("nz"));
  REQUIRE(rep.classes.size() == 5);
  for (const auto& c : rep.classes) {
    CHECK_FALSE(c.applicable());
    CHECK_FALSE(c.p50.has_value());
  }
  CHECK(rep.mortality_delta == 0.0);
  const std::string csv = report_csv(rep);
  CHECK(csv.find("C3,0,0.5,480,NA,NA\n") != std::string::npos);
  const json j = json::parse(report_json(rep));
  CHECK(j["classes"][3]["applicable"] == false);
  CHECK(j["classes"][3]["targets"][0]["achieved"].is_null());
}

TEST_CASE("an unserved request counts as a miss at every target") {
  const Trace t = with_outcomes({{Criticality::C2, 200.0}, {Criticality::C2, std::nullopt}});
  const auto rep = compliance(t, DeadlinePolicy::preset("nz"));
  CHECK(rep.at("C2").targets[0].achieved == 0.5);
  CHECK(rep.at("C2").targets[1].achieved == 0.5);
  CHECK(rep.at("C2").unserved == 1);
  CHECK(rep.unserved == 1);
  CHECK_FALSE(rep.at("C2").p95.has_value());
}

TEST_CASE("mortality delta is 1% per minute past the deadline") {
  const DeadlinePolicy nz = DeadlinePolicy::preset("nz");
  CHECK(mortality_delta(with_outcomes({{Criticality::C3, 600.0}}), nz) == doctest::Approx(0.02).epsilon(1e-15));
  CHECK(mortality_delta(with_outcomes({{Criticality::C3, 480.0}, {Criticality::C2, 100.0}}), nz) == 0.0);
  CHECK(mortality_delta(with_outcomes({{Criticality::C3, 540.0}, {Criticality::C2, 540.0}}), nz) ==
        doctest::Approx(0.02).epsilon(1e-15));
  // C1 and C0 carry no mortality weight.
  CHECK(mortality_delta(with_outcomes({{Criticality::C1, 5000.0}, {Criticality::C0, 5000.0}}), nz) == 0.0);
  // Unserved: lateness runs to the horizon.
  CHECK(mortality_delta(with_outcomes({{Criticality::C3, std::nullopt}}, 600.0), nz) == doctest::Approx(0.02).epsilon(1e-15));
}

TEST_CASE("disturbance totals PreemptionActivated costs") {
  Trace t;
  add_activation(t, 150.0);
  CHECK(disturbance_total(t) == 150.0);
  add_activation(t, 200.0);
  CHECK(disturbance_total(t) == 350.0);
  CHECK(compliance(t, DeadlinePolicy::preset("nz")).disturbance_veh_s == 350.0);
}

TEST_CASE("nearest-rank percentile matches a sorted-index oracle") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1000.0);
  for (int round = 0; round < 200; ++round) {
    const std::size_t n = 1 + rng() % 30;
    std::vector<std::optional<double>> xs;
    std::vector<double> sorted;
    for (std::size_t i = 0; i < n; ++i) {
      const bool unserved = rng() % 7 == 0;
      xs.push_back(unserved ? std::nullopt : std::optional<double>(u(rng)));
      sorted.push_back(unserved ? std::numeric_limits<double>::infinity() : *xs.back());
    }
    std::sort(sorted.begin(), sorted.end());
    for (double q : {0.5, 0.9, 0.95, 1.0}) {
      std::size_t k = 0;  // smallest k with k / n >= q
      while (static_cast<double>(k) < q * static_cast<double>(n)) ++k;
      const double want = sorted[std::max<std::size_t>(k, 1) - 1];
      const auto got = percentile(xs, q);
      if (std::isinf(want)) {
        CHECK_FALSE(got.has_value());
      } else {
        REQUIRE(got.has_value());
        CHECK(*got == want);
      }
    }
  }
  CHECK_FALSE(percentile({}, 0.5).has_value());
}

TEST_CASE("report formats") {
  Trace t = with_outcomes({{Criticality::C3, 300.0}, {Criticality::C3, 700.0}, {Criticality::C2, 100.0}, {Criticality::C1, 900.0}});
  add_activation(t, 150.0);
  const DeadlinePolicy nz = DeadlinePolicy::preset("nz");
  const auto rep = compliance(t, nz);
  const std::string csv = report_csv(rep);
  CHECK(csv.rfind("criticality,count,target_fraction,target_s,achieved,pass\n", 0) == 0);
  CHECK(csv.find("C3,2,0.5,480,0.5000,true\n") != std::string::npos);
  CHECK(csv.find("C3,2,0.95,1200,1.0000,true\n") != std::string::npos);
  CHECK(csv.find("C2+C3,3,0.5,480,0.6667,true\n") != std::string::npos);
  CHECK(summary_line(t, rep, nz) == "C3: 1/2 within 480s | mortality_delta=0.037 | disturbance=150 veh-s");
  const json j = json::parse(report_json(rep));
  CHECK(j["format"] == "mcrts-report/1");
  CHECK(j["policy"] == "nz");
  CHECK(j["totals"]["disturbance_veh_s"] == 150.0);
  CHECK(j["classes"].size() == 5);
  CHECK(j["classes"][4]["criticality"] == "C2+C3");
}
