#include "mcrts/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "mcrts/error.hpp"

namespace mcrts {

using nlohmann::json;

namespace {

constexpr double kMortalityPerMinute = 0.01;

bool life_threatening(Criticality c) { return c == Criticality::C2 || c == Criticality::C3; }

ClassReport class_report(std::string name, const std::vector<const Outcome*>& members, const std::vector<Target>& targets) {
  ClassReport r;
  r.name = std::move(name);
  r.count = members.size();
  std::vector<std::optional<double>> responses;
  for (const Outcome* o : members) {
    responses.push_back(o->response_s);
    if (!o->response_s) ++r.unserved;
  }
  if (r.count == 0) {
    for (const Target& t : targets) r.targets.push_back(TargetResult{t, 0.0, false});
    return r;
  }
  r.p50 = percentile(responses, 0.50);
  r.p90 = percentile(responses, 0.90);
  r.p95 = percentile(responses, 0.95);
  for (const Target& t : targets) {
    const auto hits = std::count_if(responses.begin(), responses.end(),
                                    [&](const std::optional<double>& x) { return x && *x <= t.seconds; });
    const double achieved = static_cast<double>(hits) / static_cast<double>(r.count);
    r.targets.push_back(TargetResult{t, achieved, achieved >= t.fraction});
  }
  return r;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string compact(double v) {
  if (v == std::floor(v) && std::fabs(v) < 1e15) return fixed(v, 0);
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

const ClassReport& ComplianceReport::at(std::string_view name) const {
  for (const ClassReport& c : classes)
    if (c.name == name) return c;
  throw Error(ErrorKind::InvalidParameter, "no class '" + std::string(name) + "' in report");
}

std::optional<double> percentile(std::vector<std::optional<double>> responses, double q) {
  if (responses.empty()) return std::nullopt;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> v;
  for (const auto& r : responses) v.push_back(r.value_or(inf));
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  const double x = v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
  if (std::isinf(x)) return std::nullopt;
  return x;
}

double mortality_delta(const Trace& trace, const DeadlinePolicy& policy) {
  double total = 0.0;
  for (const Outcome& o : trace.outcomes) {
    if (!life_threatening(o.criticality)) continue;
    auto d = deadline_for(o.criticality, policy);
    if (!d) continue;
    const double late = o.response_s ? *o.response_s - *d : trace.horizon_s - o.release_s - *d;
    if (late > 0.0) total += kMortalityPerMinute * (late / 60.0);
  }
  return total;
}

double disturbance_total(const Trace& trace) {
  double total = 0.0;
  for (const TraceRecord& r : trace.events)
    if (r.kind == EventKind::PreemptionActivated) total += r.payload.at("cost").get<double>();
  return total;
}

ComplianceReport compliance(const Trace& trace, const DeadlinePolicy& policy) {
  ComplianceReport rep;
  rep.policy = policy.name;
  std::vector<const Outcome*> pooled;
  for (Criticality c : kAllCriticalities) {
    std::vector<const Outcome*> members;
    for (const Outcome& o : trace.outcomes)
      if (o.criticality == c) members.push_back(&o);
    if (life_threatening(c)) pooled.insert(pooled.end(), members.begin(), members.end());
    rep.classes.push_back(class_report(std::string(to_string(c)), members, policy.targets[ordinal(c)]));
    rep.unserved += rep.classes.back().unserved;
  }
  rep.classes.push_back(class_report("C2+C3", pooled, policy.targets[ordinal(Criticality::C3)]));
  rep.mortality_delta = mortality_delta(trace, policy);
  rep.disturbance_veh_s = disturbance_total(trace);
  return rep;
}

std::string report_json(const ComplianceReport& report) {
  json classes = json::array();
  for (const ClassReport& c : report.classes) {
    json targets = json::array();
    for (const TargetResult& t : c.targets) {
      targets.push_back({{"fraction", t.target.fraction},
                         {"seconds", t.target.seconds},
                         {"achieved", c.applicable() ? json(t.achieved) : json(nullptr)},
                         {"pass", c.applicable() ? json(t.pass) : json(nullptr)}});
    }
    classes.push_back({{"criticality", c.name},
                       {"count", c.count},
                       {"applicable", c.applicable()},
                       {"unserved", c.unserved},
                       {"p50_s", opt(c.p50)},
                       {"p90_s", opt(c.p90)},
                       {"p95_s", opt(c.p95)},
                       {"targets", std::move(targets)}});
  }
  json doc{{"format", "mcrts-report/1"},
           {"policy", report.policy},
           {"notes",
            {"mortality_delta applies 1% per minute to delay beyond the contractual deadline, C2/C3 only",
             "unserved requests count as misses at every target"}},
           {"classes", std::move(classes)},
           {"totals",
            {{"mortality_delta", report.mortality_delta},
             {"disturbance_veh_s", report.disturbance_veh_s},
             {"unserved", report.unserved}}}};
  return doc.dump(2) + "\n";
}

std::string report_csv(const ComplianceReport& report) {
  std::string out = "criticality,count,target_fraction,target_s,achieved,pass\n";
  for (const ClassReport& c : report.classes) {
    for (const TargetResult& t : c.targets) {
      out += c.name + "," + std::to_string(c.count) + "," + compact(t.target.fraction) + "," + compact(t.target.seconds) +
             ",";
      out += c.applicable() ? fixed(t.achieved, 4) + "," + (t.pass ? "true" : "false") : std::string("NA,NA");
      out += "\n";
    }
  }
  return out;
}

std::string summary_line(const Trace& trace, const ComplianceReport& report, const DeadlinePolicy& policy) {
  const ClassReport& c3 = report.at("C3");
  const auto& targets = policy.targets[ordinal(Criticality::C3)];
  const double t = !targets.empty() ? targets.front().seconds
                                    : deadline_for(Criticality::C3, policy).value_or(std::numeric_limits<double>::infinity());
  const auto within = std::count_if(trace.outcomes.begin(), trace.outcomes.end(), [&](const Outcome& o) {
    return o.criticality == Criticality::C3 && o.response_s && *o.response_s <= t;
  });
  return "C3: " + std::to_string(within) + "/" + std::to_string(c3.count) + " within " + compact(t) +
         "s | mortality_delta=" + fixed(report.mortality_delta, 3) +
         " | disturbance=" + compact(std::round(report.disturbance_veh_s)) + " veh-s";
}

}  // namespace mcrts
