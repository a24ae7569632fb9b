#pragma once

// The incident catalogue and the partial-order checks each trace must meet.

#include <algorithm>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "tim/netsim.hpp"
#include "tim/script.hpp"
#include "tim/trace.hpp"

namespace tim {

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{
      "accident", "accident-police", "traffic-jam", "congestion",   "obstacle",   "diversion",
      "stranded-vehicle", "debris", "service-discovery", "road-defect", "flood", "signal-malfunction"};
  return names;
}

namespace detail {

inline ScenarioScript ta_service(std::string name, MessageKind kind, int figure) {
  ScenarioScript s;
  s.name = std::move(name);
  s.incident = kind;
  s.resolver = Resolver::TaService;
  s.perturbation = Perturbation::None;
  s.figure = figure;
  return s;
}

inline ScenarioScript attended(std::string name, MessageKind kind, int figure) {
  ScenarioScript s;
  s.name = std::move(name);
  s.incident = kind;
  s.resolver = Resolver::Official;
  s.default_police = 1;
  s.figure = figure;
  return s;
}

inline ScenarioScript detected(std::string name, MessageKind kind, Perturbation p, int figure) {
  ScenarioScript s;
  s.name = std::move(name);
  s.reporter.reset();
  s.incident = kind;
  s.resolver = Resolver::VehicleClear;
  s.perturbation = p;
  s.perturb_lane = 1;
  s.perturb_position = 500.0;
  s.perturb_from = 505.0;
  s.perturb_until = 800.0;
  s.report_time = 505.0;
  s.detectors = true;
  s.figure = figure;
  return s;
}

}  // namespace detail

/// Catalogue entry by name. Unknown names raise ConfigError listing the
/// valid ones.
inline ScenarioScript build_scenario(const std::string& name) {
  if (name == "accident") {
    ScenarioScript s;
    s.name = name;
    s.placement = Placement::Far;
    return s;
  }
  if (name == "accident-police") {
    ScenarioScript s = detail::attended(name, MessageKind::Accident, 5);
    s.default_police = 2;
    return s;
  }
  if (name == "traffic-jam") {
    return detail::detected(name, MessageKind::TrafficJam, Perturbation::LaneBlockage, 8);
  }
  if (name == "congestion") {
    return detail::detected(name, MessageKind::Congestion, Perturbation::SlowZone, 9);
  }
  if (name == "obstacle") return detail::attended(name, MessageKind::Obstacle, 12);
  if (name == "diversion") {
    ScenarioScript s;
    s.name = name;
    s.reporter.reset();
    s.reporter_is_official = true;
    s.incident = MessageKind::Diversion;
    s.road = RoadId("Y");
    s.resolver = Resolver::None;
    s.default_police = 1;
    s.perturbation = Perturbation::None;
    s.figure = 15;
    return s;
  }
  if (name == "stranded-vehicle") return detail::attended(name, MessageKind::StrandedVehicle, 17);
  if (name == "debris") return detail::ta_service(name, MessageKind::Debris, 20);
  if (name == "service-discovery") {
    ScenarioScript s;
    s.name = name;
    s.incident = MessageKind::ServiceQuery;
    s.resolver = Resolver::None;
    s.perturbation = Perturbation::None;
    s.service_category = "petrol-pump";
    s.services = {{"petrol-pump", RoadId("Y"), 1500.0},
                  {"petrol-pump", RoadId("W"), 3600.0},
                  {"restaurant", RoadId("Z"), 2500.0}};
    s.figure = 23;
    return s;
  }
  if (name == "road-defect") return detail::ta_service(name, MessageKind::RoadDefect, 25);
  if (name == "flood") return detail::ta_service(name, MessageKind::Flood, 27);
  if (name == "signal-malfunction") {
    return detail::ta_service(name, MessageKind::SignalMalfunction, 29);
  }
  std::string valid;
  for (const auto& n : scenario_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("scenario: unknown name '" + name + "' (valid: " + valid + ")");
}

// ---------------------------------------------------------------------------
// Sequence specs

struct Pattern {
  std::vector<MessageKind> kinds;
  std::optional<SenderClass> from;
  std::optional<ActionSource> source;
  std::optional<SenderClass> to;  // wired receiver class

  bool matches(const TraceRecord& r) const {
    if (std::find(kinds.begin(), kinds.end(), r.msg.kind) == kinds.end()) return false;
    if (from && sender_class(r.sender.role) != *from) return false;
    if (source && r.source != *source) return false;
    if (to && (!r.receiver || sender_class(r.receiver->role) != *to)) return false;
    return true;
  }

  std::string describe() const {
    std::string s;
    for (std::size_t i = 0; i < kinds.size(); ++i) s += (i ? "|" : "") + std::string(to_string(kinds[i]));
    if (from) s += " from " + std::string(to_string(*from));
    if (to) s += " to " + std::string(to_string(*to));
    if (source) s += " [" + std::string(to_string(*source)) + "]";
    return s;
  }
};

struct Occurs {
  Pattern what;
  std::size_t min{1};
  std::optional<std::size_t> max;
};

/// The first `after` record comes later than some `before` record.
struct Precedes {
  Pattern before;
  Pattern after;
};

/// The patterns occur as a subsequence of the trace.
struct Sequence {
  std::vector<Pattern> steps;
};

/// Every burst of `kind` fired by one rule on one message has exactly `n`
/// copies. A missing rule matches any rule.
struct BurstCount {
  MessageKind kind{MessageKind::Accident};
  std::optional<RuleKey> rule;
  std::uint32_t n{0};
};

using Constraint = std::variant<Occurs, Precedes, Sequence, BurstCount>;

struct SequenceSpec {
  int figure{0};
  std::string title;
  std::vector<Constraint> constraints;
};

struct ConstraintResult {
  std::string description;
  bool satisfied{true};
  std::optional<std::size_t> offending_index;
};

struct ConformanceReport {
  int figure{0};
  std::vector<ConstraintResult> results;

  bool pass() const {
    return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.satisfied; });
  }

  std::string text() const {
    std::ostringstream os;
    os << "conformance figure " << figure << ": " << (pass() ? "PASS" : "FAIL") << '\n';
    for (const auto& r : results) {
      os << (r.satisfied ? "  ok   " : "  FAIL ") << r.description;
      if (r.offending_index) os << " (record " << *r.offending_index << ")";
      os << '\n';
    }
    return os.str();
  }
};

namespace spec_dsl {

inline Pattern P(MessageKind k, std::optional<SenderClass> from = {},
                 std::optional<ActionSource> src = {}, std::optional<SenderClass> to = {}) {
  return {{k}, from, src, to};
}
inline Pattern P2(MessageKind a, MessageKind b, std::optional<SenderClass> from = {},
                  std::optional<ActionSource> src = {}) {
  return {{a, b}, from, src, {}};
}
inline constexpr auto V = SenderClass::Vehicle;
inline constexpr auto R = SenderClass::Rsu;
inline constexpr auto O = SenderClass::Official;
inline constexpr auto T = SenderClass::Ta;
inline constexpr auto Org = ActionSource::Origin;
inline constexpr auto Bur = ActionSource::RuleTableBurst;
inline constexpr auto Wir = ActionSource::Wired;

inline std::vector<Constraint> accident_bursts() {
  using K = MessageKind;
  return {BurstCount{K::Accident, RuleKey{K::Accident, V, true}, 3},
          BurstCount{K::AvoidRoad, RuleKey{K::Accident, V, true}, 3},
          BurstCount{K::Accident, RuleKey{K::Accident, R, true}, 2},
          BurstCount{K::AvoidRoad, RuleKey{K::Accident, R, true}, 2},
          BurstCount{K::Accident, RuleKey{K::Accident, V, false}, 2},
          BurstCount{K::Accident, RuleKey{K::Accident, O, true}, 3},
          BurstCount{K::AvoidRoad, RuleKey{K::Accident, O, true}, 3},
          BurstCount{K::AvoidRoad, RuleKey{K::AvoidRoad, R, true}, 3},
          BurstCount{K::AvoidRoad, RuleKey{K::AvoidRoad, V, true}, 2},
          BurstCount{K::ClearedRoad, std::nullopt, 3}};
}

inline SequenceSpec detector_spec(int figure, MessageKind kind, std::string title) {
  using K = MessageKind;
  return {figure,
          std::move(title),
          {Occurs{P(kind, V, Org), 1, {}}, Occurs{P(kind, R, Bur), 3, {}},
           Occurs{P(K::ClearedRoad, V, Org), 1, {}}, Occurs{P(K::ClearedRoad, R, Bur), 3, {}},
           Precedes{P(kind, V, Org), P(kind, R, Bur)},
           Precedes{P(kind, V, Org), P(K::ClearedRoad, V, Org)},
           Precedes{P(K::ClearedRoad, V, Org), P(K::ClearedRoad, R, Bur)},
           BurstCount{kind, std::nullopt, 3}, BurstCount{K::ClearedRoad, std::nullopt, 3}}};
}

inline SequenceSpec attended_spec(int figure, MessageKind kind, MessageKind cleared,
                                  std::string title) {
  using K = MessageKind;
  return {figure,
          std::move(title),
          {Occurs{P(kind, V, Org), 1, 1}, Occurs{P(kind, R, Bur), 3, {}},
           Occurs{P(K::Attending, O, Org), 1, {}}, Occurs{P(cleared, O, Org), 1, 1},
           Occurs{P(cleared, R, Bur), 3, {}},
           Sequence{{P(kind, V, Org), P(K::Attending, O, Org), P(cleared, O, Org), P(cleared, R, Bur)}},
           Precedes{P(kind, V, Org), P(K::Attending, O, Org)},
           Precedes{P(cleared, O, Org), P(cleared, R, Bur)},
           BurstCount{kind, std::nullopt, 3}, BurstCount{cleared, std::nullopt, 3}}};
}

inline SequenceSpec ta_spec(int figure, MessageKind kind, std::string title) {
  using K = MessageKind;
  const MessageKind resolved = *ta_resolution_for(kind);
  (void)K::Accident;
  return {figure,
          std::move(title),
          {Occurs{P(kind, V, Org), 1, 1}, Occurs{P(kind, R, Bur), 3, {}},
           Occurs{P(kind, R, Wir, T), 1, {}}, Occurs{P(resolved, T, Wir, R), 1, {}},
           Occurs{P(resolved, R, Bur), 3, {}},
           Precedes{P(kind, V, Org), P(kind, R, Wir, T)},
           Precedes{P(kind, R, Wir, T), P(resolved, T, Wir, R)},
           Precedes{P(resolved, T, Wir, R), P(resolved, R, Bur)},
           BurstCount{kind, std::nullopt, 3}, BurstCount{resolved, std::nullopt, 3}}};
}

}  // namespace spec_dsl

/// Encoded sequence diagram for a figure id.
inline SequenceSpec sequence_spec(int figure) {
  using namespace spec_dsl;
  using K = MessageKind;
  switch (figure) {
    case 2: {
      SequenceSpec s{2, "announcing an accident", {}};
      s.constraints = {Occurs{P(K::Accident, V, Org), 1, 1},
                       Occurs{P(K::Accident, R, Bur), 3, {}},
                       Occurs{P(K::AvoidRoad, R, Bur), 3, {}},
                       Occurs{P(K::Accident, R, Wir, R), 1, {}},
                       Occurs{P(K::ClearedRoad, T, Wir, R), 1, 1},
                       Occurs{P(K::ClearedRoad, R, Bur), 3, {}},
                       Precedes{P(K::Accident, V, Org), P(K::AvoidRoad, R, Bur)},
                       Precedes{P(K::Accident, V, Org), P(K::Accident, R, Wir, R)},
                       Precedes{P(K::AvoidRoad, R, Bur), P(K::ClearedRoad, T, Wir, R)},
                       Precedes{P(K::ClearedRoad, T, Wir, R), P(K::ClearedRoad, R, Bur)}};
      for (auto& c : accident_bursts()) s.constraints.push_back(c);
      return s;
    }
    case 5: {
      SequenceSpec s{5, "accident handled by a police car", {}};
      s.constraints = {
          Occurs{P(K::Accident, V, Org), 1, 1},
          Occurs{P(K::AddressingIncident, O, Org), 1, {}},
          Occurs{P(K::Ack, R, Org), 1, {}},
          Occurs{P(K::FreeRoad, O, Org), 1, {}},
          Occurs{P(K::Attending, O, Org), 1, {}},
          Occurs{P(K::RestrictedMovement, R), 1, {}},
          Occurs{P2(K::SortedRoad, K::ClearedRoad, O, Org), 1, 1},
          Occurs{P(K::ClearedRoad, R, Bur), 3, {}},
          Sequence{{P(K::Accident, V, Org), P(K::AddressingIncident, O, Org), P(K::Ack, R, Org),
                    P(K::FreeRoad, O, Org), P2(K::SortedRoad, K::ClearedRoad, O, Org),
                    P(K::ClearedRoad, R, Bur)}},
          Precedes{P(K::Accident, V, Org), P(K::AddressingIncident, O, Org)},
          Precedes{P(K::AddressingIncident, O, Org), P(K::Ack, R, Org)},
          Precedes{P(K::AddressingIncident, O, Org), P(K::RestrictedMovement, R)},
          Precedes{P2(K::SortedRoad, K::ClearedRoad, O, Org), P(K::ClearedRoad, R, Bur)}};
      for (auto& c : accident_bursts()) s.constraints.push_back(c);
      return s;
    }
    case 8: return detector_spec(8, K::TrafficJam, "traffic jam");
    case 9: return detector_spec(9, K::Congestion, "congestion");
    case 12: return attended_spec(12, K::Obstacle, K::ObstacleCleared, "obstacle");
    case 15:
      return {15,
              "diversion",
              {Occurs{P(K::Diversion, O, Org), 1, 1}, Occurs{P(K::Diversion, R, Bur), 3, {}},
               Occurs{P(K::Diversion, R, Wir, R), 1, {}},
               Precedes{P(K::Diversion, O, Org), P(K::Diversion, R, Bur)},
               BurstCount{K::Diversion, std::nullopt, 3}}};
    case 17: return attended_spec(17, K::StrandedVehicle, K::ClearedRoad, "stranded vehicle");
    case 20: return ta_spec(20, K::Debris, "debris");
    case 22:
    case 23:
      return {figure,
              "service discovery",
              {Occurs{P(K::ServiceQuery, V, Org), 1, 1}, Occurs{P(K::ServiceReply, R, Org), 1, {}},
               Precedes{P(K::ServiceQuery, V, Org), P(K::ServiceReply, R, Org)}}};
    case 25: return ta_spec(25, K::RoadDefect, "road defect");
    case 27: return ta_spec(27, K::Flood, "flood");
    case 29: return ta_spec(29, K::SignalMalfunction, "signal malfunction");
    default:
      throw ConfigError("no sequence spec for figure " + std::to_string(figure));
  }
}

inline const std::vector<int>& spec_figures() {
  static const std::vector<int> ids{2, 5, 8, 9, 12, 15, 17, 20, 22, 23, 25, 27, 29};
  return ids;
}

namespace detail {

inline ConstraintResult check(const std::vector<TraceRecord>& tr, const Occurs& c) {
  ConstraintResult r;
  std::size_t n = 0;
  std::optional<std::size_t> over;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    if (!c.what.matches(tr[i])) continue;
    ++n;
    if (c.max && n > *c.max && !over) over = i;
  }
  r.description = "occurs " + c.what.describe() + " " + std::to_string(n) + "x, need >= " +
                  std::to_string(c.min) + (c.max ? " and <= " + std::to_string(*c.max) : "");
  r.satisfied = n >= c.min && !over;
  r.offending_index = over;
  return r;
}

inline ConstraintResult check(const std::vector<TraceRecord>& tr, const Precedes& c) {
  ConstraintResult r;
  r.description = c.before.describe() + " precedes " + c.after.describe();
  std::optional<std::size_t> first_before, first_after;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    if (!first_before && c.before.matches(tr[i])) first_before = i;
    if (!first_after && c.after.matches(tr[i])) first_after = i;
  }
  if (!first_after) {
    r.satisfied = false;
    r.description += " (no " + c.after.describe() + ")";
  } else if (!first_before || *first_before >= *first_after ||
             tr[*first_before].time > tr[*first_after].time) {
    r.satisfied = false;
    r.offending_index = first_after;
  }
  return r;
}

inline ConstraintResult check(const std::vector<TraceRecord>& tr, const Sequence& c) {
  ConstraintResult r;
  r.description = "sequence";
  for (const auto& p : c.steps) r.description += " > " + p.describe();
  std::size_t step = 0;
  for (std::size_t i = 0; i < tr.size() && step < c.steps.size(); ++i) {
    if (c.steps[step].matches(tr[i])) ++step;
  }
  r.satisfied = step == c.steps.size();
  if (!r.satisfied) r.description += " (stuck at step " + std::to_string(step + 1) + ")";
  return r;
}

inline ConstraintResult check(const std::vector<TraceRecord>& tr, const BurstCount& c) {
  ConstraintResult r;
  r.description = "each " + std::string(to_string(c.kind)) + " burst";
  if (c.rule) {
    r.description += " for (" + std::string(to_string(c.rule->kind)) + ", " +
                     std::string(to_string(c.rule->sender)) + ", " +
                     (c.rule->first ? "first" : "repeat") + ")";
  }
  r.description += " has " + std::to_string(c.n) + " copies";
  using Group = std::tuple<std::uint32_t, std::uint64_t, RuleKey>;
  std::map<Group, std::pair<std::uint32_t, std::size_t>> groups;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const auto& rec = tr[i];
    if (rec.source != ActionSource::RuleTableBurst || !rec.rule || rec.msg.kind != c.kind) continue;
    if (c.rule && *rec.rule != *c.rule) continue;
    auto& g = groups[{rec.sender.index, rec.msg.id.value, *rec.rule}];
    if (g.first == 0) g.second = i;
    ++g.first;
    if (g.first > c.n && r.satisfied) {
      r.satisfied = false;
      r.offending_index = i;
    }
  }
  for (const auto& [key, g] : groups) {
    if (g.first < c.n && r.satisfied) {
      r.satisfied = false;
      r.offending_index = g.second;
    }
  }
  return r;
}

}  // namespace detail

/// Checks a finished trace against a spec. Violations are reported, never
/// thrown.
inline ConformanceReport check_conformance(const Trace& trace, const SequenceSpec& spec) {
  ConformanceReport rep;
  rep.figure = spec.figure;
  for (const auto& c : spec.constraints) {
    rep.results.push_back(std::visit([&](const auto& x) { return detail::check(trace.records, x); }, c));
  }
  return rep;
}

}  // namespace tim
