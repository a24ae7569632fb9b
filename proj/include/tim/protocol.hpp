#pragma once

// Per-role message handlers. Each handler takes the entity's state and one
// event and returns the transmissions and timers the engine should carry
// out. Handlers never touch the network or the clock themselves.

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "tim/domain.hpp"
#include "tim/relay.hpp"

namespace tim {

enum class ActionSource : std::uint8_t { Origin, Relay, RuleTableBurst, Wired };

inline std::string_view to_string(ActionSource s) {
  switch (s) {
    case ActionSource::Origin: return "Origin";
    case ActionSource::Relay: return "Relay";
    case ActionSource::RuleTableBurst: return "RuleTableBurst";
    case ActionSource::Wired: return "Wired";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// RSU rebroadcast rule table

struct RuleKey {
  MessageKind kind{MessageKind::Accident};
  SenderClass sender{SenderClass::Vehicle};
  bool first{true};

  friend bool operator==(const RuleKey&, const RuleKey&) = default;
  friend auto operator<=>(const RuleKey&, const RuleKey&) = default;
};

struct RuleEntry {
  std::uint32_t same{0};
  std::uint32_t derived{0};
  MessageKind derived_kind{MessageKind::AvoidRoad};

  friend bool operator==(const RuleEntry&, const RuleEntry&) = default;
};

class RsuRuleTable {
 public:
  /// Burst counts for the accident lifecycle.
  static RsuRuleTable accident_defaults(std::uint32_t cleared_repeats = 3) {
    using K = MessageKind;
    using S = SenderClass;
    RsuRuleTable t;
    t.set({K::Accident, S::Vehicle, true}, {3, 3, K::AvoidRoad});
    t.set({K::Accident, S::Rsu, true}, {2, 2, K::AvoidRoad});
    t.set({K::Accident, S::Vehicle, false}, {2, 0, K::AvoidRoad});
    t.set({K::Accident, S::Official, true}, {3, 3, K::AvoidRoad});
    t.set({K::AvoidRoad, S::Rsu, true}, {3, 0, K::AvoidRoad});
    t.set({K::AvoidRoad, S::Vehicle, true}, {2, 0, K::AvoidRoad});
    t.set({K::ClearedRoad, S::Rsu, true}, {cleared_repeats, 0, K::ClearedRoad});
    t.set({K::ClearedRoad, S::Official, true}, {cleared_repeats, 0, K::ClearedRoad});
    t.set({K::SortedRoad, S::Official, true}, {0, cleared_repeats, K::ClearedRoad});
    return t;
  }

  void set(const RuleKey& key, const RuleEntry& entry) { rows_[key] = entry; }

  RuleEntry lookup(const RuleKey& key) const {
    auto it = rows_.find(key);
    return it == rows_.end() ? RuleEntry{} : it->second;
  }

  bool contains(const RuleKey& key) const { return rows_.contains(key); }
  std::size_t size() const { return rows_.size(); }
  const std::map<RuleKey, RuleEntry>& rows() const { return rows_; }

 private:
  std::map<RuleKey, RuleEntry> rows_;
};

// ---------------------------------------------------------------------------
// Speed history and incident detectors

struct SpeedSample {
  Timestamp time{0.0};
  double speed{0.0};
};

/// Trailing window of speed samples, oldest first.
class SpeedHistory {
 public:
  explicit SpeedHistory(double window = 120.0) : window_(window) {
    if (window < 90.0) throw DomainError("speed history window must cover 90 s");
  }

  void push(Timestamp t, double speed) {
    if (!samples_.empty() && t <= samples_.back().time) {
      throw DomainError("speed samples must be strictly increasing in time");
    }
    samples_.push_back({t, speed});
    while (samples_.size() > 1 && t - samples_.front().time > window_) samples_.pop_front();
  }

  bool empty() const { return samples_.empty(); }
  std::size_t size() const { return samples_.size(); }
  double window() const { return window_; }
  const SpeedSample& latest() const { return samples_.back(); }
  double span() const { return empty() ? 0.0 : samples_.back().time - samples_.front().time; }

  struct Run {
    double duration{0.0};
    // The run reaches back to the oldest retained sample, so it may be longer.
    bool truncated{false};
  };

  /// Length of the most recent unbroken run of samples matching `pred`,
  /// measured from the first sample of the run to the latest one.
  template <class Pred>
  Run trailing_run(Pred pred) const {
    if (samples_.empty() || !pred(samples_.back().speed)) return {};
    std::size_t i = samples_.size() - 1;
    while (i > 0 && pred(samples_[i - 1].speed)) --i;
    return {samples_.back().time - samples_[i].time, i == 0};
  }

 private:
  double window_;
  std::deque<SpeedSample> samples_;
};

inline constexpr double kJamSpeed = 0.1;        // m/s
inline constexpr double kJamHold = 30.0;        // s, strictly exceeded
inline constexpr double kCongestionLow = 1.0;   // m/s, inclusive
inline constexpr double kCongestionHigh = 13.0; // m/s, exclusive
inline constexpr double kCongestionMin = 60.0;  // s
inline constexpr double kCongestionMax = 90.0;  // s

/// Episode bookkeeping so one stop or one slow stretch reports once.
struct DetectorState {
  bool jam_reported{false};
  bool congestion_reported{false};
};

inline bool in_congestion_band(double v) { return v >= kCongestionLow && v < kCongestionHigh; }

inline bool jam_condition(const SpeedHistory& h) {
  if (h.empty() || h.latest().speed >= kJamSpeed) return false;
  return h.trailing_run([](double v) { return v < kJamSpeed; }).duration > kJamHold;
}

inline bool congestion_condition(const SpeedHistory& h) {
  if (h.empty() || !in_congestion_band(h.latest().speed)) return false;
  const auto run = h.trailing_run(in_congestion_band);
  if (run.truncated && h.span() >= h.window()) return false;
  return run.duration >= kCongestionMin && run.duration <= kCongestionMax;
}

/// Returns TrafficJam when the vehicle has been stationary for more than
/// 30 s behind a queue and has not reported this stop yet.
inline std::optional<MessageKind> detect_jam(const SpeedHistory& h, bool queue_ahead,
                                             Timestamp /*now*/, DetectorState& ep) {
  if (h.empty()) return std::nullopt;
  if (h.latest().speed >= kJamSpeed) {
    ep.jam_reported = false;
    return std::nullopt;
  }
  if (ep.jam_reported || !queue_ahead || !jam_condition(h)) return std::nullopt;
  ep.jam_reported = true;
  return MessageKind::TrafficJam;
}

/// Returns Congestion when speed has stayed in [1, 13) m/s for 60 to 90 s.
inline std::optional<MessageKind> detect_congestion(const SpeedHistory& h, Timestamp /*now*/,
                                                    DetectorState& ep) {
  if (h.empty()) return std::nullopt;
  if (!in_congestion_band(h.latest().speed)) {
    ep.congestion_reported = false;
    return std::nullopt;
  }
  if (ep.congestion_reported || !congestion_condition(h)) return std::nullopt;
  ep.congestion_reported = true;
  return MessageKind::Congestion;
}

// ---------------------------------------------------------------------------
// Incident ledger

enum class IncidentStatus : std::uint8_t { Open, BeingAttended, Resolved };

inline std::string_view to_string(IncidentStatus s) {
  switch (s) {
    case IncidentStatus::Open: return "open";
    case IncidentStatus::BeingAttended: return "attended";
    case IncidentStatus::Resolved: return "resolved";
  }
  return "?";
}

struct IncidentRecord {
  MessageKind kind{MessageKind::Accident};
  MessageId report;
  IncidentStatus status{IncidentStatus::Open};
  Timestamp opened_at{0.0};
  std::optional<Timestamp> attended_at;
  std::optional<Timestamp> resolved_at;
};

/// Per-road incident lifecycle. Transitions only move forward.
class IncidentLedger {
 public:
  bool open(const RoadId& road, MessageKind kind, MessageId report, Timestamp now) {
    return records_.try_emplace(road, IncidentRecord{kind, report, IncidentStatus::Open, now, {}, {}})
        .second;
  }

  bool attend(const RoadId& road, Timestamp now) {
    auto it = records_.find(road);
    if (it == records_.end() || it->second.status != IncidentStatus::Open) return false;
    it->second.status = IncidentStatus::BeingAttended;
    it->second.attended_at = now;
    return true;
  }

  bool resolve(const RoadId& road, Timestamp now) {
    auto it = records_.find(road);
    if (it == records_.end() || it->second.status == IncidentStatus::Resolved) return false;
    it->second.status = IncidentStatus::Resolved;
    it->second.resolved_at = now;
    return true;
  }

  std::optional<IncidentStatus> status(const RoadId& road) const {
    auto it = records_.find(road);
    if (it == records_.end()) return std::nullopt;
    return it->second.status;
  }

  const IncidentRecord* find(const RoadId& road) const {
    auto it = records_.find(road);
    return it == records_.end() ? nullptr : &it->second;
  }

  const std::map<RoadId, IncidentRecord>& records() const { return records_; }

 private:
  std::map<RoadId, IncidentRecord> records_;
};

// ---------------------------------------------------------------------------
// Actions

struct Broadcast {
  Message msg;
  Timestamp at{0.0};
  ActionSource source{ActionSource::Origin};
  std::optional<RuleKey> rule;
};

struct WiredSend {
  Message msg;
  EntityId to;
  Timestamp at{0.0};
};

/// Ask the infrastructure to reach an official vehicle: the engine hands the
/// message to the RSU currently nearest that vehicle.
struct DispatchOfficial {
  Message msg;
  EntityId official;
  Timestamp at{0.0};
};

enum class TimerKind : std::uint8_t { OfficialPeriodic, RestrictedMovement };

struct TimerToken {
  TimerKind kind{TimerKind::OfficialPeriodic};
  RoadId road;
  friend bool operator==(const TimerToken&, const TimerToken&) = default;
};

struct ArmTimer {
  TimerToken token;
  Timestamp at{0.0};
};

using OutgoingAction = std::variant<Broadcast, WiredSend, DispatchOfficial, ArmTimer>;
using Actions = std::vector<OutgoingAction>;

/// Number of wireless broadcasts of `kind` among `actions`.
inline std::size_t count_broadcasts(const Actions& actions, MessageKind kind) {
  return static_cast<std::size_t>(std::count_if(actions.begin(), actions.end(), [&](const auto& a) {
    const auto* b = std::get_if<Broadcast>(&a);
    return b && b->msg.kind == kind;
  }));
}

inline std::size_t count_wired(const Actions& actions, MessageKind kind) {
  return static_cast<std::size_t>(std::count_if(actions.begin(), actions.end(), [&](const auto& a) {
    const auto* w = std::get_if<WiredSend>(&a);
    return w && w->msg.kind == kind;
  }));
}

// ---------------------------------------------------------------------------
// State

struct ServiceEntry {
  std::string category;
  RoadId road;
  double position{0.0};  // arc length along the route
};

struct ProtocolConfig {
  RsuRuleTable rules{RsuRuleTable::accident_defaults()};
  std::uint32_t report_repeats{3};
  std::uint32_t cleared_repeats{3};
  double burst_spacing{2.0};
  double official_period{5.0};
  double restricted_period{10.0};
  double ta_delay{60.0};
  double clear_speed{12.0};
  double clear_hold{10.0};
};

struct ProtocolContext {
  const ProtocolConfig& config;
  MessageFactory& factory;
  const RelayPolicy& policy;
};

struct VehicleKnowledge {
  // Reports heard or sent and not yet known to be cleared, by road.
  std::map<RoadId, std::set<MessageKind>> open_reports;
  std::map<RoadId, MessageId> report_ids;
  std::set<RoadId> cleared;
  // Roads on which this vehicle itself met a jam or congestion condition.
  std::set<RoadId> experienced;
  std::optional<Timestamp> fast_since;
  std::vector<MessageId> replies;
  DetectorState detector;
};

struct OfficialDuty {
  std::optional<RoadId> road;
  MessageKind incident{MessageKind::Accident};
  MessageId report;
  std::optional<MessageId> addressing;
  bool acked{false};
  bool arrived{false};
  bool finished{false};
};

struct RsuSetup {
  double position{0.0};
  double route_length{0.0};
  std::vector<EntityId> neighbours;
  std::optional<EntityId> ta;
  std::vector<EntityId> officials;
  std::vector<ServiceEntry> services;
  std::set<RoadId> roads;
};

struct RsuMemory {
  std::set<std::pair<MessageId, RuleKey>> fired;
  std::map<RoadId, Message> restricted;
};

struct TaMemory {
  std::set<std::pair<MessageId, std::uint32_t>> handled;
};

struct EntityState {
  EntityId self;
  SeenStore seen;
  IncidentLedger ledger;
  SpeedHistory history;
  VehicleKnowledge vehicle;
  OfficialDuty duty;
  RsuSetup rsu;
  RsuMemory rsu_memory;
  TaMemory ta;
  std::vector<std::string> log;

  EntityState() = default;
  explicit EntityState(EntityId id) : self(id) {}
  Role role() const { return self.role; }
};

// ---------------------------------------------------------------------------
// Helpers

namespace detail {

inline void require_role(const EntityState& s, bool ok, const char* what) {
  if (!ok) throw DomainError(std::string(what) + ": wrong role for " + s.self.label());
}

inline void burst(Actions& out, const Message& msg, std::uint32_t repeats, Timestamp now,
                  double spacing, std::optional<RuleKey> rule) {
  for (std::uint32_t i = 0; i < repeats; ++i) {
    out.push_back(Broadcast{msg, now + spacing * i, ActionSource::RuleTableBurst, rule});
  }
}

/// Rule-table class of a received copy. Messages that originate with or are
/// carried by an official vehicle are treated as official.
inline SenderClass classify(Role sender, const Message& msg) {
  if (msg.priority == Priority::Official || sender.is_official()) return SenderClass::Official;
  return sender_class(sender);
}

inline void learn(VehicleKnowledge& k, const Message& msg) {
  if (is_incident_report(msg.kind)) {
    if (!k.cleared.contains(msg.road)) {
      k.open_reports[msg.road].insert(msg.kind);
      k.report_ids.try_emplace(msg.road, msg.id);
    }
  } else if (is_resolution(msg.kind)) {
    k.cleared.insert(msg.road);
    k.open_reports.erase(msg.road);
  } else if (msg.kind == MessageKind::ServiceReply) {
    k.replies.push_back(msg.id);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Vehicles

struct ReceiveInfo {
  Role sender{kRegular};
  // False when a FreeRoad message comes from an official vehicle that is
  // ahead of the receiver, i.e. the receiver is not in front of it.
  bool in_front_of_origin{true};
};

/// A regular vehicle receiving a message: forward once if the policy allows.
inline Actions handle_vehicle(EntityState& state, const Message& msg, const RelayPolicy& policy,
                              Timestamp now, const ReceiveInfo& info = {}) {
  detail::require_role(state, state.role().kind == RoleKind::RegularVehicle, "handle_vehicle");
  bool relay = should_relay(policy, msg, now, state.seen, state.role());
  state.seen.record(msg.id, now);
  detail::learn(state.vehicle, msg);
  if (msg.kind == MessageKind::FreeRoad && !info.in_front_of_origin) relay = false;
  if (!relay) return {};
  return {Broadcast{msg, now, ActionSource::Relay, std::nullopt}};
}

/// A vehicle (regular or official) announcing something it observed.
inline Actions originate(EntityState& state, ProtocolContext& ctx, MessageKind kind,
                         const RoadId& road, Timestamp now, std::string detail_text = {},
                         std::optional<MessageId> correlation = {}) {
  Message m = ctx.factory.make(kind, road, state.self, now, correlation, std::move(detail_text));
  state.seen.record(m.id, now);
  detail::learn(state.vehicle, m);
  return {Broadcast{m, now, ActionSource::Origin, std::nullopt}};
}

/// Observation of a vehicle's own motion, fed once per mobility step.
struct MotionSample {
  double speed{0.0};
  bool queue_ahead{false};
  RoadId road;
};

/// Runs the jam and congestion detectors and the road-clear check. The
/// speed sample must already be in `state.history`.
inline Actions vehicle_tick(EntityState& state, ProtocolContext& ctx, const MotionSample& m,
                            Timestamp now) {
  auto& k = state.vehicle;
  Actions out;
  const auto known = [&](MessageKind kind) {
    auto it = k.open_reports.find(m.road);
    return it != k.open_reports.end() && it->second.contains(kind);
  };
  auto report = [&](MessageKind kind) {
    k.experienced.insert(m.road);
    if (known(kind)) return;
    auto a = originate(state, ctx, kind, m.road, now);
    out.insert(out.end(), a.begin(), a.end());
  };
  if (auto kind = detect_jam(state.history, m.queue_ahead, now, k.detector)) report(*kind);
  if (auto kind = detect_congestion(state.history, now, k.detector)) report(*kind);

  if (m.speed >= ctx.config.clear_speed) {
    if (!k.fast_since) k.fast_since = now;
  } else {
    k.fast_since.reset();
  }
  if (k.experienced.contains(m.road) && !k.cleared.contains(m.road) && k.fast_since &&
      now - *k.fast_since >= ctx.config.clear_hold) {
    std::optional<MessageId> corr;
    if (auto it = k.report_ids.find(m.road); it != k.report_ids.end()) corr = it->second;
    auto a = originate(state, ctx, MessageKind::ClearedRoad, m.road, now, {}, corr);
    out.insert(out.end(), a.begin(), a.end());
    k.experienced.erase(m.road);
  }
  return out;
}

// ---------------------------------------------------------------------------
// RSU

/// Resolution (ClearedRoad, SortedRoad, ObstacleCleared, *Resolved) arriving
/// at an RSU. Marks the incident resolved, announces the clearance and, when
/// the news did not come from another RSU, forwards it to the neighbours.
inline Actions handle_rsu_resolution(EntityState& state, const Message& msg, Role sender,
                                     Timestamp now, ProtocolContext& ctx) {
  detail::require_role(state, state.role().kind == RoleKind::Rsu, "handle_rsu_resolution");
  if (!is_resolution(msg.kind)) throw DomainError("handle_rsu_resolution: not a resolution");
  const auto status = state.ledger.status(msg.road);
  if (!status || *status == IncidentStatus::Resolved) {
    state.log.push_back("no open incident on road " + msg.road.name + "; " +
                        std::string(to_string(msg.kind)) + " ignored");
    return {};
  }
  const IncidentRecord rec = *state.ledger.find(msg.road);
  state.ledger.resolve(msg.road, now);
  state.rsu_memory.restricted.erase(msg.road);

  const SenderClass cls = detail::classify(sender, msg);
  const RuleKey rule{msg.kind, cls, true};
  Message announce = msg;
  if (msg.kind == MessageKind::SortedRoad) {
    announce = ctx.factory.make(MessageKind::ClearedRoad, msg.road, state.self, now, rec.report);
  }
  Actions out;
  detail::burst(out, announce, ctx.config.cleared_repeats, now, ctx.config.burst_spacing, rule);
  if (cls != SenderClass::Rsu) {
    for (const auto& n : state.rsu.neighbours) out.push_back(WiredSend{announce, n, now});
  }
  return out;
}

/// Answers a service lookup with the registered entry closest ahead along
/// the route; an empty detail means nothing is registered for the category.
inline Actions handle_service_query(EntityState& state, const Message& msg,
                                    const std::vector<ServiceEntry>& registry, Timestamp now,
                                    ProtocolContext& ctx) {
  detail::require_role(state, state.role().kind == RoleKind::Rsu, "handle_service_query");
  const ServiceEntry* best = nullptr;
  double best_d = 0.0;
  const double L = state.rsu.route_length;
  for (const auto& e : registry) {
    if (e.category != msg.detail) continue;
    double d = e.position - state.rsu.position;
    if (L > 0.0) {
      d = std::fmod(d, L);
      if (d < 0.0) d += L;
    } else {
      d = std::abs(d);
    }
    if (!best || d < best_d) {
      best = &e;
      best_d = d;
    }
  }
  Message reply = ctx.factory.make(MessageKind::ServiceReply, msg.road, state.self, now, msg.id,
                                   best ? best->road.name : std::string{});
  return {Broadcast{reply, now, ActionSource::Origin, std::nullopt}};
}

namespace detail {

inline Actions rsu_accident(EntityState& state, const Message& msg, SenderClass cls, bool first,
                            Timestamp now, ProtocolContext& ctx) {
  const auto status = state.ledger.status(msg.road);
  if (status == IncidentStatus::Resolved) return {};
  if (first) state.ledger.open(msg.road, msg.kind, msg.id, now);
  const RuleKey rule{MessageKind::Accident, cls, first};
  if (!ctx.config.rules.contains(rule)) return {};
  if (!state.rsu_memory.fired.emplace(msg.id, rule).second) return {};
  const RuleEntry entry = ctx.config.rules.lookup(rule);
  Actions out;
  burst(out, msg, entry.same, now, ctx.config.burst_spacing, rule);
  if (entry.derived > 0) {
    Message derived = ctx.factory.make(entry.derived_kind, msg.road, state.self, now, msg.id);
    state.seen.record(derived.id, now);
    burst(out, derived, entry.derived, now, ctx.config.burst_spacing, rule);
  }
  if (first && cls != SenderClass::Rsu) {
    for (const auto& n : state.rsu.neighbours) out.push_back(WiredSend{msg, n, now});
    if (cls != SenderClass::Official) {
      for (const auto& o : state.rsu.officials) out.push_back(DispatchOfficial{msg, o, now});
    }
  }
  return out;
}

inline Actions rsu_report(EntityState& state, const Message& msg, SenderClass cls, bool first,
                          Timestamp now, ProtocolContext& ctx) {
  if (!first || state.ledger.status(msg.road) == IncidentStatus::Resolved) return {};
  state.ledger.open(msg.road, msg.kind, msg.id, now);
  const RuleKey rule{msg.kind, cls, true};
  Actions out;
  burst(out, msg, ctx.config.report_repeats, now, ctx.config.burst_spacing, rule);
  if (cls != SenderClass::Rsu) {
    for (const auto& n : state.rsu.neighbours) out.push_back(WiredSend{msg, n, now});
    if (ta_resolution_for(msg.kind) && state.rsu.ta) out.push_back(WiredSend{msg, *state.rsu.ta, now});
    if (needs_official(msg.kind) && cls != SenderClass::Official) {
      for (const auto& o : state.rsu.officials) out.push_back(DispatchOfficial{msg, o, now});
    }
  }
  return out;
}

inline Actions rsu_official_contact(EntityState& state, const Message& msg, bool first,
                                    Timestamp now, ProtocolContext& ctx) {
  if (!first) return {};
  Actions out;
  if (msg.kind == MessageKind::AddressingIncident) {
    Message ack = ctx.factory.make(MessageKind::Ack, msg.road, state.self, now, msg.id);
    state.seen.record(ack.id, now);
    out.push_back(Broadcast{ack, now, ActionSource::Origin, std::nullopt});
    if (!state.ledger.status(msg.road)) {
      state.ledger.open(msg.road, MessageKind::Accident, msg.correlation.value_or(msg.id), now);
    }
  }
  const auto* rec = state.ledger.find(msg.road);
  if (rec && state.ledger.attend(msg.road, now) && rec->kind == MessageKind::Accident) {
    Message restricted =
        ctx.factory.make(MessageKind::RestrictedMovement, msg.road, state.self, now, rec->report);
    state.seen.record(restricted.id, now);
    state.rsu_memory.restricted.insert_or_assign(msg.road, restricted);
    out.push_back(Broadcast{restricted, now, ActionSource::Origin, std::nullopt});
    out.push_back(ArmTimer{{TimerKind::RestrictedMovement, msg.road}, now + ctx.config.restricted_period});
  }
  return out;
}

}  // namespace detail

/// An RSU receiving a wireless or wired message from `sender`.
inline Actions handle_rsu(EntityState& state, const Message& msg, Role sender, Timestamp now,
                          ProtocolContext& ctx) {
  detail::require_role(state, state.role().kind == RoleKind::Rsu, "handle_rsu");
  if (!state.rsu.roads.empty() && !state.rsu.roads.contains(msg.road)) {
    state.log.push_back("message " + std::to_string(msg.id.value) + " for unknown road " +
                        msg.road.name + " dropped");
    return {};
  }
  const bool first = state.seen.record(msg.id, now);
  const SenderClass cls = detail::classify(sender, msg);

  if (msg.kind == MessageKind::Accident) return detail::rsu_accident(state, msg, cls, first, now, ctx);
  if (is_incident_report(msg.kind)) return detail::rsu_report(state, msg, cls, first, now, ctx);
  if (is_resolution(msg.kind)) {
    if (!first) return {};
    return handle_rsu_resolution(state, msg, sender, now, ctx);
  }
  switch (msg.kind) {
    case MessageKind::AvoidRoad: {
      if (!first || state.ledger.status(msg.road) == IncidentStatus::Resolved) return {};
      const RuleKey rule{MessageKind::AvoidRoad, cls, true};
      Actions out;
      detail::burst(out, msg, ctx.config.rules.lookup(rule).same, now, ctx.config.burst_spacing, rule);
      return out;
    }
    case MessageKind::ServiceQuery:
      if (!first) return {};
      return handle_service_query(state, msg, state.rsu.services, now, ctx);
    case MessageKind::AddressingIncident:
    case MessageKind::Attending:
      if (cls != SenderClass::Official) return {};
      return detail::rsu_official_contact(state, msg, first, now, ctx);
    default:
      return {};
  }
}

/// Periodic restricted-movement announcement while officials attend.
inline Actions rsu_timer(EntityState& state, const TimerToken& token, Timestamp now,
                         ProtocolContext& ctx) {
  if (token.kind != TimerKind::RestrictedMovement) return {};
  if (state.ledger.status(token.road) != IncidentStatus::BeingAttended) return {};
  auto it = state.rsu_memory.restricted.find(token.road);
  if (it == state.rsu_memory.restricted.end()) return {};
  return {Broadcast{it->second, now, ActionSource::RuleTableBurst, std::nullopt},
          ArmTimer{token, now + ctx.config.restricted_period}};
}

// ---------------------------------------------------------------------------
// Traffic authority

/// Debris, road defects, floods and signal faults reported by an RSU are
/// resolved after the service delay and the resolution is wired back.
inline Actions handle_ta(EntityState& state, const Message& msg, const EntityId& from_rsu,
                         Timestamp now, ProtocolContext& ctx) {
  detail::require_role(state, state.role().kind == RoleKind::Ta, "handle_ta");
  const auto resolution = ta_resolution_for(msg.kind);
  if (!resolution) return {};
  if (!state.ta.handled.emplace(msg.id, from_rsu.index).second) return {};
  const Timestamp when = now + ctx.config.ta_delay;
  Message m = ctx.factory.make(*resolution, msg.road, state.self, when, msg.id);
  return {WiredSend{m, from_rsu, when}};
}

/// A timed resolution issued by the authority for an incident no official
/// vehicle handles.
inline Actions ta_resolve_incident(EntityState& state, const RoadId& road, MessageId report,
                                   const EntityId& coordinator, Timestamp now,
                                   ProtocolContext& ctx) {
  detail::require_role(state, state.role().kind == RoleKind::Ta, "ta_resolve_incident");
  Message m = ctx.factory.make(MessageKind::ClearedRoad, road, state.self, now, report);
  return {WiredSend{m, coordinator, now}};
}

// ---------------------------------------------------------------------------
// Official vehicles

struct ReceivedMessage {
  Message msg;
  Role sender{kRegular};
};
struct ArrivalAtIncident {
  RoadId road;
};
struct IncidentResolved {
  RoadId road;
};
struct TimerFired {
  TimerToken token;
};

using OfficialEvent = std::variant<ReceivedMessage, ArrivalAtIncident, IncidentResolved, TimerFired>;

namespace detail {

inline void official_announce(EntityState& state, ProtocolContext& ctx, Actions& out,
                              MessageKind kind, Timestamp now) {
  Message m = ctx.factory.make(kind, *state.duty.road, state.self, now, state.duty.report);
  state.seen.record(m.id, now);
  if (kind == MessageKind::AddressingIncident) state.duty.addressing = m.id;
  out.push_back(Broadcast{m, now, ActionSource::Origin, std::nullopt});
}

}  // namespace detail

inline Actions handle_official(EntityState& state, const OfficialEvent& event, Timestamp now,
                               ProtocolContext& ctx) {
  detail::require_role(state, state.role().is_official(), "handle_official");
  auto& duty = state.duty;
  Actions out;

  if (const auto* rx = std::get_if<ReceivedMessage>(&event)) {
    const Message& msg = rx->msg;
    const bool relay = should_relay(ctx.policy, msg, now, state.seen, state.role());
    state.seen.record(msg.id, now);
    detail::learn(state.vehicle, msg);
    if (relay) out.push_back(Broadcast{msg, now, ActionSource::Relay, std::nullopt});

    if (needs_official(msg.kind) && !duty.road && !state.vehicle.cleared.contains(msg.road)) {
      duty.road = msg.road;
      duty.incident = msg.kind;
      duty.report = msg.id;
      if (msg.kind == MessageKind::Accident) {
        detail::official_announce(state, ctx, out, MessageKind::AddressingIncident, now);
        detail::official_announce(state, ctx, out, MessageKind::FreeRoad, now);
      }
      detail::official_announce(state, ctx, out, MessageKind::Attending, now);
      out.push_back(ArmTimer{{TimerKind::OfficialPeriodic, msg.road}, now + ctx.config.official_period});
    } else if (msg.kind == MessageKind::Ack && duty.addressing && msg.correlation == duty.addressing) {
      duty.acked = true;
    } else if (is_resolution(msg.kind) && duty.road == msg.road && msg.origin.index != state.self.index) {
      duty.finished = true;
    }
    return out;
  }

  if (const auto* t = std::get_if<TimerFired>(&event)) {
    if (!duty.road || duty.arrived || duty.finished || t->token.road != *duty.road) return out;
    if (duty.incident == MessageKind::Accident) {
      detail::official_announce(state, ctx, out, MessageKind::FreeRoad, now);
    }
    detail::official_announce(state, ctx, out, MessageKind::Attending, now);
    out.push_back(ArmTimer{t->token, now + ctx.config.official_period});
    return out;
  }

  if (const auto* a = std::get_if<ArrivalAtIncident>(&event)) {
    if (!duty.road || *duty.road != a->road || duty.arrived) return out;
    duty.arrived = true;
    if (duty.incident == MessageKind::Accident && !duty.finished) {
      detail::official_announce(state, ctx, out, MessageKind::FreeRoad, now);
    }
    return out;
  }

  const auto& r = std::get<IncidentResolved>(event);
  if (!duty.road || *duty.road != r.road) {
    throw ProtocolOrderError(state.self.label() + ": resolution of road " + r.road.name +
                             " without a prior incident report");
  }
  if (duty.finished) return out;
  duty.finished = true;
  MessageKind kind = MessageKind::ClearedRoad;
  if (duty.incident == MessageKind::Obstacle) {
    kind = MessageKind::ObstacleCleared;
  } else if (duty.incident == MessageKind::Accident && duty.acked) {
    kind = MessageKind::SortedRoad;
  }
  detail::official_announce(state, ctx, out, kind, now);
  state.vehicle.cleared.insert(r.road);
  return out;
}

}  // namespace tim
