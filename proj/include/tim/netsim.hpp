#pragma once

// Discrete-event engine: event queue, radio broadcast within range, wired
// infrastructure links, mobility stepping and scenario execution.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "tim/metrics.hpp"
#include "tim/mobility.hpp"
#include "tim/protocol.hpp"
#include "tim/relay.hpp"
#include "tim/script.hpp"
#include "tim/trace.hpp"

namespace tim {

struct NetParams {
  double range{300.0};
  double hop_latency{0.01};
  double wired_latency{0.005};
  double loss{0.0};
};

/// Portable uniform doubles from a 64-bit Mersenne Twister.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 gen_;
};

namespace events {
struct Deliver {
  Message msg;
  EntityId to;
  EntityId from;
  bool wired{false};
};
struct Transmit {
  Broadcast send;
  EntityId from;
};
struct WiredTransmit {
  WiredSend send;
  EntityId from;
};
struct MobilityStep {
  std::uint64_t step{0};
};
struct Scripted {
  std::size_t index{0};
};
struct TimerFire {
  EntityId entity;
  TimerToken token;
};
}  // namespace events

using EventPayload = std::variant<events::Deliver, events::Transmit, events::WiredTransmit,
                                  events::MobilityStep, events::Scripted, events::TimerFire>;

struct Event {
  Timestamp time{0.0};
  std::uint64_t sequence{0};
  EventPayload payload;
};

class Engine {
 public:
  using Script = std::function<void(Engine&, Timestamp)>;

  Engine(MobilityWorld world, NetParams net, ProtocolConfig protocol, RelayPolicy policy,
         std::uint64_t seed)
      : world_(std::move(world)),
        net_(net),
        protocol_(std::move(protocol)),
        policy_(policy),
        rng_(seed),
        ctx_{protocol_, factory_, policy_} {}

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  EntityId add_entity(Role role, std::uint32_t ordinal) {
    EntityId id{static_cast<std::uint32_t>(states_.size()), role, ordinal};
    states_.emplace_back(id);
    factory_.register_entity(id);
    return id;
  }

  EntityState& state(const EntityId& id) { return states_.at(id.index); }
  const EntityState& state(const EntityId& id) const { return states_.at(id.index); }
  std::vector<EntityState>& states() { return states_; }
  const std::vector<EntityState>& states() const { return states_; }
  MobilityWorld& world() { return world_; }
  const MobilityWorld& world() const { return world_; }
  MessageFactory& factory() { return factory_; }
  ProtocolContext& context() { return ctx_; }
  const Trace& trace() const { return trace_; }
  Trace& trace() { return trace_; }
  const TrialMetrics& metrics() const { return metrics_; }
  Rng& rng() { return rng_; }
  Timestamp now() const { return now_; }
  std::vector<std::string>& notes() { return notes_; }
  const std::vector<std::string>& notes() const { return notes_; }

  /// Sends `msg` over the air from `from`; every entity in range receives a
  /// copy one hop later. Counts as one transmission.
  void broadcast(const Message& msg, const EntityId& from, Timestamp now, ActionSource source,
                 std::optional<RuleKey> rule = {}) {
    record({now, from, std::nullopt, msg, source, rule});
    for (const auto& to : neighbours_within(world_, from, net_.range)) {
      if (net_.loss > 0.0 && rng_.uniform() < net_.loss) continue;
      Message copy = msg;
      ++copy.hops;
      push(now + net_.hop_latency, events::Deliver{std::move(copy), to, from, false});
    }
  }

  /// Point-to-point link between infrastructure nodes.
  void wired_send(const Message& msg, const EntityId& from, const EntityId& to, Timestamp now) {
    if (!from.role.is_infrastructure() || !to.role.is_infrastructure()) {
      throw DomainError("wired link " + from.label() + " -> " + to.label() +
                        " needs infrastructure at both ends");
    }
    record({now, from, to, msg, ActionSource::Wired, std::nullopt});
    push(now + net_.wired_latency, events::Deliver{msg, to, from, true});
  }

  void apply(const EntityId& actor, const Actions& actions, Timestamp now) {
    for (const auto& action : actions) {
      std::visit([&](const auto& a) { apply_one(actor, a, now); }, action);
    }
  }

  void at(Timestamp t, Script fn) {
    scripts_.push_back(std::move(fn));
    push(t, events::Scripted{scripts_.size() - 1});
  }

  /// Steps mobility every dt from t = 0. Detectors run from `detectors_from`
  /// when enabled.
  void enable_mobility(bool detectors, Timestamp detectors_from) {
    detectors_ = detectors;
    detectors_from_ = detectors_from;
    push(0.0, events::MobilityStep{0});
  }

  /// Where an incident physically sits, for official arrival checks.
  void set_site(const RoadId& road, double position) { sites_[road] = position; }
  std::optional<double> site(const RoadId& road) const {
    auto it = sites_.find(road);
    if (it == sites_.end()) return std::nullopt;
    return it->second;
  }
  void set_on_site(double seconds, double radius) {
    on_site_time_ = seconds;
    arrival_radius_ = radius;
  }

  void run_until(Timestamp end) {
    end_ = end;
    while (!queue_.empty() && queue_.top().time <= end) {
      Event e = queue_.top();
      queue_.pop();
      if (e.time < now_) throw DomainError("event queue went backwards");
      now_ = e.time;
      dispatch(e);
    }
  }

  /// Nearest RSU to an entity, by straight-line distance; ties go to the
  /// lower index.
  std::optional<EntityId> nearest_rsu(const EntityId& id) const {
    const auto where = world_.location(id);
    if (!where) return std::nullopt;
    std::optional<EntityId> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& r : world_.rsus()) {
      const double d = distance(*where, r.location);
      if (d < best_d) {
        best_d = d;
        best = r.id;
      }
    }
    return best;
  }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.sequence > b.sequence;
    }
  };

  void push(Timestamp t, EventPayload p) { queue_.push(Event{t, next_seq_++, std::move(p)}); }

  void record(TraceRecord r) {
    count(metrics_, r);
    trace_.records.push_back(std::move(r));
  }

  void apply_one(const EntityId& actor, const Broadcast& b, Timestamp now) {
    if (b.at <= now) {
      broadcast(b.msg, actor, now, b.source, b.rule);
    } else {
      push(b.at, events::Transmit{b, actor});
    }
  }

  void apply_one(const EntityId& actor, const WiredSend& w, Timestamp now) {
    if (w.at <= now) {
      wired_send(w.msg, actor, w.to, now);
    } else {
      push(w.at, events::WiredTransmit{w, actor});
    }
  }

  void apply_one(const EntityId& actor, const DispatchOfficial& d, Timestamp now) {
    const auto rsu = nearest_rsu(d.official);
    if (!rsu || *rsu == actor) return;
    if (!dispatched_.emplace(d.msg.id.value, rsu->index).second) return;
    wired_send(d.msg, actor, *rsu, now);
  }

  void apply_one(const EntityId& actor, const ArmTimer& t, Timestamp) {
    push(t.at, events::TimerFire{actor, t.token});
  }

  void dispatch(const Event& e) {
    std::visit([&](const auto& p) { handle(p); }, e.payload);
  }

  void handle(const events::Transmit& t) { broadcast(t.send.msg, t.from, now_, t.send.source, t.send.rule); }
  void handle(const events::WiredTransmit& t) { wired_send(t.send.msg, t.from, t.send.to, now_); }
  void handle(const events::Scripted& s) { scripts_.at(s.index)(*this, now_); }

  void handle(const events::TimerFire& t) {
    auto& st = state(t.entity);
    if (st.role().is_official()) {
      apply(t.entity, handle_official(st, TimerFired{t.token}, now_, ctx_), now_);
    } else if (st.role().kind == RoleKind::Rsu) {
      apply(t.entity, rsu_timer(st, t.token, now_, ctx_), now_);
    }
  }

  void handle(const events::Deliver& d) {
    auto& st = state(d.to);
    const Role sender = d.from.role;
    trace_.receptions.push_back({now_, d.to, d.from, d.msg.id, d.msg.kind, d.msg.hops, d.wired});
    Actions out;
    switch (st.role().kind) {
      case RoleKind::RegularVehicle: {
        ReceiveInfo info{sender, true};
        if (d.msg.kind == MessageKind::FreeRoad && d.msg.origin.role.is_vehicle() &&
            world_.find_vehicle(d.msg.origin.index) && world_.find_vehicle(d.to.index)) {
          info.in_front_of_origin = downstream_of(world_, d.msg.origin, d.to);
        }
        out = handle_vehicle(st, d.msg, policy_, now_, info);
        break;
      }
      case RoleKind::Rsu:
        out = handle_rsu(st, d.msg, sender, now_, ctx_);
        break;
      case RoleKind::Ta:
        if (!d.wired) return;
        out = handle_ta(st, d.msg, d.from, now_, ctx_);
        break;
      default:
        out = handle_official(st, ReceivedMessage{d.msg, sender}, now_, ctx_);
        break;
    }
    apply(d.to, out, now_);
  }

  void handle(const events::MobilityStep& m) {
    const double dt = world_.params().dt;
    if (m.step > 0) world_.step(dt, now_);
    while (world_.inject_flow(now_)) {
    }
    for (const auto& v : world_.vehicles()) {
      auto& st = state(v.id);
      st.history.push(now_, v.kin.speed);
      if (detectors_ && now_ >= detectors_from_ && st.role().kind == RoleKind::RegularVehicle &&
          !v.parked) {
        const MotionSample sample{v.kin.speed, queue_ahead(world_, v),
                                  world_.graph().road_at(v.kin.position)};
        apply(v.id, vehicle_tick(st, ctx_, sample, now_), now_);
      }
    }
    check_arrivals();
    const Timestamp next = static_cast<double>(m.step + 1) * dt;
    if (next <= end_) push(next, events::MobilityStep{m.step + 1});
  }

  void check_arrivals() {
    for (const auto& v : world_.vehicles()) {
      if (!v.id.role.is_official()) continue;
      auto& st = state(v.id);
      const auto& duty = st.duty;
      if (!duty.road || duty.arrived || duty.finished) continue;
      const auto where = site(*duty.road);
      if (!where) continue;
      const double ahead = world_.graph().wrap(*where - v.kin.position);
      if (ahead > arrival_radius_) continue;
      const RoadId road = *duty.road;
      const EntityId id = v.id;
      apply(id, handle_official(st, ArrivalAtIncident{road}, now_, ctx_), now_);
      if (!attended_.insert(road).second) continue;
      world_.park(id.index, true);
      at(now_ + on_site_time_, [id, road](Engine& eng, Timestamp t) {
        auto& s = eng.state(id);
        eng.apply(id, handle_official(s, IncidentResolved{road}, t, eng.context()), t);
        eng.world().park(id.index, false);
        eng.world().lift_blockages(t);
      });
    }
  }

  MobilityWorld world_;
  NetParams net_;
  ProtocolConfig protocol_;
  RelayPolicy policy_;
  Rng rng_;
  MessageFactory factory_;
  ProtocolContext ctx_;
  std::vector<EntityState> states_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t next_seq_{0};
  Timestamp now_{0.0};
  Timestamp end_{std::numeric_limits<double>::infinity()};
  Trace trace_;
  TrialMetrics metrics_;
  std::vector<Script> scripts_;
  std::vector<std::string> notes_;
  std::set<std::pair<std::uint64_t, std::uint32_t>> dispatched_;
  std::map<RoadId, double> sites_;
  std::set<RoadId> attended_;
  double on_site_time_{120.0};
  double arrival_radius_{50.0};
  bool detectors_{false};
  Timestamp detectors_from_{0.0};
};

// ---------------------------------------------------------------------------
// Trials

struct TrialConfig {
  ScenarioScript script;
  std::size_t vehicles{19};
  std::optional<std::size_t> police;  // defaults to the script's count
  RelayPolicy policy{HopLimit{4}};
  Timestamp duration{1500.0};
  Timestamp warmup{500.0};
  MobilityParams mobility;
  NetParams net;
  ProtocolConfig protocol;
};

struct TrialResult {
  Trace trace;
  TrialMetrics metrics;
  bool terminal{false};
  std::string terminal_detail;
  std::size_t entered_by_warmup{0};
  std::vector<std::string> notes;
};

/// Seconds between successive entries at the start of the route.
inline double spawn_headway(const MobilityParams& p, std::size_t vehicles, Timestamp warmup) {
  if (p.headway > 0.0) return p.headway;
  if (vehicles < 2) return 0.0;
  const double even = p.route_length / (static_cast<double>(vehicles) * p.target_speed);
  const double latest = 0.8 * warmup / ((1.0 + p.spawn_jitter) * static_cast<double>(vehicles - 1));
  return std::min(even, latest);
}

/// Spawn indices that carry police vehicles.
inline std::vector<std::uint32_t> police_indices(std::size_t vehicles, std::size_t police,
                                                 std::uint32_t reporter, Placement placement) {
  std::vector<std::uint32_t> out;
  if (vehicles == 0) return out;
  const std::size_t start =
      placement == Placement::Near ? reporter + 1 : reporter + vehicles / 2;
  for (std::size_t k = 0; out.size() < police && k < 2 * vehicles; ++k) {
    const auto idx = static_cast<std::uint32_t>((start + k) % vehicles);
    if (idx == reporter) continue;
    if (std::find(out.begin(), out.end(), idx) == out.end()) out.push_back(idx);
  }
  return out;
}

inline void validate(const TrialConfig& c) {
  if (c.vehicles == 0) throw ConfigError("vehicles: must be at least 1");
  if (!(c.warmup >= 0.0) || !(c.warmup < c.duration)) throw ConfigError("warmup: must be below duration");
  if (c.script.reporter && *c.script.reporter >= c.vehicles) {
    throw ConfigError("vehicles: scenario " + c.script.name + " needs vehicle V" +
                      std::to_string(*c.script.reporter) + ", so at least " +
                      std::to_string(*c.script.reporter + 1) + " vehicles");
  }
  const std::size_t police = c.police.value_or(c.script.default_police);
  if (police >= c.vehicles) throw ConfigError("police: must be fewer than vehicles");
  if (c.script.reporter_is_official && police == 0) {
    throw ConfigError("police: scenario " + c.script.name + " needs an official vehicle");
  }
  if (c.script.resolver == Resolver::Official && police == 0) {
    throw ConfigError("police: scenario " + c.script.name + " is resolved by an official vehicle");
  }
  if (c.script.report_time < c.warmup) throw ConfigError("report time falls inside the warm-up");
  if (c.net.range <= 0.0) throw ConfigError("range: must be positive");
  if (c.net.loss < 0.0 || c.net.loss >= 1.0) throw ConfigError("loss: must be in [0, 1)");
  if (c.mobility.rsu_count < 2) throw ConfigError("rsu_count: need at least 2");
}

namespace detail {

inline std::optional<EntityId> coordinator(const Engine& eng, const RoadId& road) {
  std::optional<EntityId> best;
  Timestamp best_t = std::numeric_limits<double>::infinity();
  for (const auto& st : eng.states()) {
    if (st.role().kind != RoleKind::Rsu) continue;
    if (const auto* rec = st.ledger.find(road); rec && rec->opened_at < best_t) {
      best_t = rec->opened_at;
      best = st.self;
    }
  }
  return best;
}

}  // namespace detail

/// Runs one scripted trial. The result is a pure function of (config, seed).
inline TrialResult run_trial(const TrialConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  const ScenarioScript& sc = cfg.script;
  MobilityParams mp = cfg.mobility;
  RoadGraph graph = RoadGraph::square_loop(mp.route_length);
  if (!graph.has_road(sc.road)) throw ConfigError("road: unknown road " + sc.road.name);
  const std::set<RoadId> roads = [&] {
    std::set<RoadId> r;
    for (const auto& s : graph.segments()) r.insert(s.id);
    return r;
  }();

  Engine eng(MobilityWorld(std::move(graph), mp), cfg.net, cfg.protocol, cfg.policy, seed);
  const std::size_t n = cfg.vehicles;
  const std::size_t police = cfg.police.value_or(sc.default_police);
  const std::uint32_t anchor = sc.reporter.value_or(static_cast<std::uint32_t>(n - 1));
  const auto police_at = police_indices(n, police, anchor, sc.placement);

  std::vector<EntityId> vehicles;
  std::vector<EntityId> officials;
  std::uint32_t police_ordinal = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    const bool is_police = std::find(police_at.begin(), police_at.end(), i) != police_at.end();
    const EntityId id = is_police ? eng.add_entity(kPolice, police_ordinal++) : eng.add_entity(kRegular, i);
    vehicles.push_back(id);
    if (is_police) officials.push_back(id);
  }
  std::vector<EntityId> rsus;
  for (std::uint32_t k = 0; k < mp.rsu_count; ++k) rsus.push_back(eng.add_entity(kRsu, k));
  const EntityId ta = eng.add_entity(kTa, 0);

  eng.world().deploy_rsus(rsus);
  for (std::size_t k = 0; k < rsus.size(); ++k) {
    auto& st = eng.state(rsus[k]);
    const std::size_t m = rsus.size();
    st.rsu.position = eng.world().rsus()[k].position;
    st.rsu.route_length = mp.route_length;
    st.rsu.neighbours = {rsus[(k + m - 1) % m]};
    if (m > 2) st.rsu.neighbours.push_back(rsus[(k + 1) % m]);
    st.rsu.ta = ta;
    st.rsu.officials = officials;
    st.rsu.services = sc.services;
    st.rsu.roads = roads;
  }

  const double h = spawn_headway(mp, n, cfg.warmup);
  for (std::uint32_t i = 0; i < n; ++i) {
    const double jitter = mp.spawn_jitter * (2.0 * eng.rng().uniform() - 1.0);
    const double t = std::max(0.0, h * (static_cast<double>(i) + jitter));
    const int lane = vehicles[i].role.is_official() ? 0 : static_cast<int>(i % 2);
    eng.world().queue_spawn({vehicles[i], lane, t});
  }
  eng.set_on_site(sc.on_site_time, sc.arrival_radius);
  eng.enable_mobility(sc.detectors, std::max(cfg.warmup, sc.report_time));

  // Perturbations for detector-driven scenarios.
  const double road_start = eng.world().graph().road_start(sc.road);
  if (sc.perturbation == Perturbation::LaneBlockage) {
    eng.world().add_blockage({sc.perturb_lane, eng.world().graph().wrap(road_start + sc.perturb_position),
                              sc.perturb_from, sc.perturb_until});
  } else if (sc.perturbation == Perturbation::SlowZone) {
    eng.world().add_slow_zone({sc.road, sc.slow_speed, sc.perturb_from, sc.perturb_until});
  }

  // The report itself.
  if (sc.reporter_is_official || sc.reporter) {
    const EntityId reporter = sc.reporter_is_official ? officials.front() : vehicles[*sc.reporter];
    eng.at(sc.report_time, [reporter, sc](Engine& e, Timestamp t) {
      const Vehicle* v = e.world().find_vehicle(reporter.index);
      if (!v) {
        e.notes().push_back(reporter.label() + " not on the road at report time");
        return;
      }
      if (sc.perturbation == Perturbation::Wreck) {
        const double pos = e.world().graph().wrap(v->kin.position + 20.0);
        e.world().add_blockage({v->kin.lane, pos, t, std::numeric_limits<double>::infinity()});
        e.set_site(sc.road, pos);
      }
      auto& st = e.state(reporter);
      e.apply(reporter, originate(st, e.context(), sc.incident, sc.road, t, sc.service_category), t);
    });
  }

  if (sc.resolver == Resolver::TaTimed) {
    eng.at(sc.resolve_at, [ta, sc](Engine& e, Timestamp t) {
      e.world().lift_blockages(t);
      const auto coord = detail::coordinator(e, sc.road);
      const auto* rec = coord ? e.state(*coord).ledger.find(sc.road) : nullptr;
      if (!rec) {
        e.notes().push_back("no RSU holds an incident on road " + sc.road.name + " at resolution time");
        return;
      }
      e.apply(ta, ta_resolve_incident(e.state(ta), sc.road, rec->report, *coord, t, e.context()), t);
    });
  }

  std::size_t entered = 0;
  eng.at(cfg.warmup, [&entered](Engine& e, Timestamp) { entered = e.world().vehicles().size(); });

  eng.run_until(cfg.duration);

  TrialResult out;
  out.entered_by_warmup = entered;
  out.metrics = eng.metrics();
  out.notes = eng.notes();
  const auto coord = detail::coordinator(eng, sc.road);
  if (sc.incident == MessageKind::ServiceQuery) {
    const auto& k = eng.state(vehicles[*sc.reporter]).vehicle;
    out.terminal = !k.replies.empty();
    out.terminal_detail = out.terminal ? "reply received" : "no reply";
  } else if (sc.resolver == Resolver::None) {
    out.terminal = coord.has_value();
    out.terminal_detail = coord ? "announced by " + coord->label() : "never announced";
  } else {
    const auto* rec = coord ? eng.state(*coord).ledger.find(sc.road) : nullptr;
    out.terminal = rec && rec->status == IncidentStatus::Resolved;
    out.terminal_detail = rec ? coord->label() + " " + std::string(to_string(rec->status))
                              : "no incident recorded";
  }
  for (const auto& st : eng.states()) {
    for (const auto& line : st.log) out.notes.push_back(st.self.label() + ": " + line);
  }
  out.trace = std::move(eng.trace());
  return out;
}

}  // namespace tim
