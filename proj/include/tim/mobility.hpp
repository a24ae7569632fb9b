#pragma once

// Road geometry, flow injection and gap-keeping car following on a closed
// two-lane route, plus the geometric queries the network layer needs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tim/domain.hpp"

namespace tim {

struct Point {
  double x{0.0};
  double y{0.0};
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct RoadSegment {
  RoadId id;
  std::vector<Point> polyline;
  int lanes{2};

  double length() const {
    double total = 0.0;
    for (std::size_t i = 1; i < polyline.size(); ++i) {
      total += distance(polyline[i - 1], polyline[i]);
    }
    return total;
  }
};

/// Segments traversed in order form the route; the last segment's end meets
/// the first segment's start.
class RoadGraph {
 public:
  explicit RoadGraph(std::vector<RoadSegment> route) : segments_(std::move(route)) {
    if (segments_.empty()) throw DomainError("road graph needs at least one segment");
    double s = 0.0;
    for (const auto& seg : segments_) {
      if (seg.polyline.size() < 2) throw DomainError("segment " + seg.id.name + " needs two points");
      if (seg.lanes != 2) throw DomainError("segment " + seg.id.name + " must have 2 lanes");
      starts_.push_back(s);
      s += seg.length();
    }
    length_ = s;
    const Point first = segments_.front().polyline.front();
    const Point last = segments_.back().polyline.back();
    if (distance(first, last) > 1e-6) throw DomainError("route is not a closed cycle");
  }

  /// Square loop with four corner intersections; roads X, Y, Z, W.
  static RoadGraph square_loop(double route_length) {
    if (route_length <= 0.0) throw DomainError("route length must be positive");
    const double side = route_length / 4.0;
    const Point a{0, 0}, b{side, 0}, c{side, side}, d{0, side};
    return RoadGraph({{RoadId("X"), {a, b}, 2},
                      {RoadId("Y"), {b, c}, 2},
                      {RoadId("Z"), {c, d}, 2},
                      {RoadId("W"), {d, a}, 2}});
  }

  double length() const { return length_; }
  const std::vector<RoadSegment>& segments() const { return segments_; }

  double wrap(double s) const {
    double r = std::fmod(s, length_);
    if (r < 0.0) r += length_;
    return r;
  }

  bool has_road(const RoadId& road) const {
    return std::any_of(segments_.begin(), segments_.end(),
                       [&](const RoadSegment& s) { return s.id == road; });
  }

  std::size_t segment_index_at(double s) const {
    s = wrap(s);
    auto it = std::upper_bound(starts_.begin(), starts_.end(), s);
    return static_cast<std::size_t>(std::distance(starts_.begin(), it)) - 1;
  }

  const RoadId& road_at(double s) const { return segments_[segment_index_at(s)].id; }

  double road_start(const RoadId& road) const {
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      if (segments_[i].id == road) return starts_[i];
    }
    throw DomainError("unknown road " + road.name);
  }

  double road_length(const RoadId& road) const {
    for (const auto& seg : segments_) {
      if (seg.id == road) return seg.length();
    }
    throw DomainError("unknown road " + road.name);
  }

  Point point_at(double s) const {
    s = wrap(s);
    const std::size_t i = segment_index_at(s);
    double rem = s - starts_[i];
    const auto& pl = segments_[i].polyline;
    for (std::size_t k = 1; k < pl.size(); ++k) {
      const double len = distance(pl[k - 1], pl[k]);
      if (rem <= len || k + 1 == pl.size()) {
        const double f = len > 0.0 ? std::min(rem / len, 1.0) : 0.0;
        return {pl[k - 1].x + f * (pl[k].x - pl[k - 1].x),
                pl[k - 1].y + f * (pl[k].y - pl[k - 1].y)};
      }
      rem -= len;
    }
    return pl.back();
  }

 private:
  std::vector<RoadSegment> segments_;
  std::vector<double> starts_;
  double length_{0.0};
};

struct VehicleKinematics {
  double position{0.0};  // arc length along the route
  int lane{0};
  double speed{0.0};
  double target_speed{13.0};
  double length{5.0};
};

struct MobilityParams {
  double route_length{4000.0};
  double target_speed{13.0};
  double accel{2.0};          // m/s^2
  double min_gap{2.0};        // standstill gap
  double time_headway{1.0};   // s, desired following time gap
  double vehicle_length{5.0};
  double dt{0.5};
  double headway{0.0};        // s between spawns; 0 spreads the fleet evenly
  double spawn_jitter{0.2};   // relative, uniform in [-j, +j]
  std::size_t rsu_count{10};
};

/// A lane closed at a point, e.g. the wreck of an accident.
struct Blockage {
  int lane{0};
  double position{0.0};
  Timestamp from{0.0};
  Timestamp until{0.0};
  bool active(Timestamp t) const { return t >= from && t < until; }
};

/// A road whose speed is capped for a while.
struct SlowZone {
  RoadId road;
  double speed_cap{5.0};
  Timestamp from{0.0};
  Timestamp until{0.0};
  bool active(Timestamp t) const { return t >= from && t < until; }
};

struct Vehicle {
  EntityId id;
  VehicleKinematics kin;
  bool parked{false};
};

struct RoadsideUnit {
  EntityId id;
  double position{0.0};
  Point location;
};

struct PendingSpawn {
  EntityId id;
  int lane{0};
  Timestamp not_before{0.0};
};

class MobilityWorld {
 public:
  MobilityWorld(RoadGraph graph, MobilityParams params)
      : graph_(std::move(graph)), params_(params) {}

  const RoadGraph& graph() const { return graph_; }
  const MobilityParams& params() const { return params_; }

  void add_rsu(const EntityId& id, double position) {
    rsus_.push_back({id, graph_.wrap(position), graph_.point_at(position)});
  }

  /// Equally spaced RSUs, the first half a spacing past the entry point.
  void deploy_rsus(const std::vector<EntityId>& ids) {
    const double spacing = graph_.length() / static_cast<double>(ids.size());
    for (std::size_t k = 0; k < ids.size(); ++k) {
      add_rsu(ids[k], (static_cast<double>(k) + 0.5) * spacing);
    }
  }

  /// Places a vehicle directly, bypassing flow injection.
  void place_vehicle(const EntityId& id, double position, int lane, double speed) {
    Vehicle v;
    v.id = id;
    v.kin.position = graph_.wrap(position);
    v.kin.lane = lane;
    v.kin.speed = speed;
    v.kin.target_speed = params_.target_speed;
    v.kin.length = params_.vehicle_length;
    index_of(id.index) = vehicles_.size();
    vehicles_.push_back(v);
  }

  void queue_spawn(const PendingSpawn& p) { pending_.push_back(p); }
  std::size_t pending_spawns() const { return pending_.size() - next_pending_; }

  void add_blockage(const Blockage& b) { blockages_.push_back(b); }
  void lift_blockages(Timestamp now) {
    for (auto& b : blockages_) b.until = std::min(b.until, now);
  }
  void add_slow_zone(const SlowZone& z) { zones_.push_back(z); }

  const std::vector<Vehicle>& vehicles() const { return vehicles_; }
  const std::vector<RoadsideUnit>& rsus() const { return rsus_; }

  const Vehicle* find_vehicle(std::uint32_t entity_index) const {
    if (entity_index >= slot_.size() || slot_[entity_index] == kNone) return nullptr;
    return &vehicles_[slot_[entity_index]];
  }
  Vehicle* find_vehicle(std::uint32_t entity_index) {
    return const_cast<Vehicle*>(std::as_const(*this).find_vehicle(entity_index));
  }
  const RoadsideUnit* find_rsu(std::uint32_t entity_index) const {
    for (const auto& r : rsus_) {
      if (r.id.index == entity_index) return &r;
    }
    return nullptr;
  }

  void park(std::uint32_t entity_index, bool parked) {
    if (auto* v = find_vehicle(entity_index)) {
      v->parked = parked;
      if (parked) v->kin.speed = 0.0;
    }
  }

  /// Location of a vehicle or RSU; nullopt for entities without one (TA,
  /// vehicles not yet spawned).
  std::optional<Point> location(const EntityId& id) const {
    if (const auto* v = find_vehicle(id.index)) return graph_.point_at(v->kin.position);
    if (const auto* r = find_rsu(id.index)) return r->location;
    return std::nullopt;
  }

  /// Gap from `pos` in `lane` to whatever is ahead: another vehicle's rear
  /// bumper or an active blockage. Infinity when the lane ahead is empty.
  double gap_ahead(double pos, int lane, std::uint32_t self_index, Timestamp now) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& o : vehicles_) {
      if (o.kin.lane != lane || o.id.index == self_index) continue;
      const double d = graph_.wrap(o.kin.position - pos);
      if (d <= 0.0) continue;
      best = std::min(best, d - o.kin.length);
    }
    for (const auto& b : blockages_) {
      if (b.lane != lane || !b.active(now)) continue;
      const double d = graph_.wrap(b.position - pos);
      if (d < graph_.length() / 2.0) best = std::min(best, d);
    }
    return best;
  }

  /// The nearest vehicle ahead in the same lane, if any, with its gap.
  std::optional<std::pair<const Vehicle*, double>> leader_of(const Vehicle& v) const {
    const Vehicle* lead = nullptr;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& o : vehicles_) {
      if (o.kin.lane != v.kin.lane || o.id.index == v.id.index) continue;
      const double d = graph_.wrap(o.kin.position - v.kin.position);
      if (d > 0.0 && d < best) {
        best = d;
        lead = &o;
      }
    }
    if (!lead) return std::nullopt;
    return std::make_pair(lead, best - lead->kin.length);
  }

  double speed_limit_at(double pos, Timestamp now) const {
    double cap = params_.target_speed;
    const RoadId& road = graph_.road_at(pos);
    for (const auto& z : zones_) {
      if (z.active(now) && z.road == road) cap = std::min(cap, z.speed_cap);
    }
    return cap;
  }

  /// Advances every vehicle by `dt`. Speeds are chosen from positions at the
  /// start of the step, so a follower never closes more than its gap allows.
  void step(double dt, Timestamp now) {
    if (dt <= 0.0) throw DomainError("mobility step needs dt > 0");
    std::vector<double> next_speed(vehicles_.size(), 0.0);
    for (std::size_t i = 0; i < vehicles_.size(); ++i) {
      const auto& v = vehicles_[i];
      if (v.parked) continue;
      const double gap = gap_ahead(v.kin.position, v.kin.lane, v.id.index, now);
      const double limit = std::min(v.kin.target_speed, speed_limit_at(v.kin.position, now));
      double s = std::min(v.kin.speed + params_.accel * dt, limit);
      if (std::isfinite(gap)) {
        const double room = std::max(0.0, gap - params_.min_gap);
        s = std::min(s, room / (params_.time_headway + dt));
        s = std::min(s, room / dt);
      }
      next_speed[i] = std::max(0.0, s);
    }
    for (std::size_t i = 0; i < vehicles_.size(); ++i) {
      auto& v = vehicles_[i];
      if (v.parked) continue;
      v.kin.speed = next_speed[i];
      v.kin.position = graph_.wrap(v.kin.position + v.kin.speed * dt);
    }
  }

  /// Spawns the next queued vehicle at the entry point when its time has
  /// come and the entry is clear in its lane. Returns the spawned id.
  std::optional<EntityId> inject_flow(Timestamp now) {
    if (next_pending_ >= pending_.size()) return std::nullopt;
    const PendingSpawn& p = pending_[next_pending_];
    if (now < p.not_before) return std::nullopt;
    const double entry = 0.0;
    const double ahead = gap_ahead(entry, p.lane, p.id.index, now);
    if (ahead < params_.min_gap + params_.vehicle_length) return std::nullopt;
    // The nearest vehicle approaching the entry from behind needs room to stop.
    for (const auto& o : vehicles_) {
      if (o.kin.lane != p.lane) continue;
      const double behind = graph_.wrap(entry - o.kin.position) - params_.vehicle_length;
      if (graph_.wrap(entry - o.kin.position) == 0.0) return std::nullopt;
      if (behind < params_.min_gap + o.kin.speed * (params_.time_headway + params_.dt)) {
        return std::nullopt;
      }
    }
    double speed = params_.target_speed;
    if (std::isfinite(ahead)) {
      speed = std::min(speed, std::max(0.0, ahead - params_.min_gap) /
                                  (params_.time_headway + params_.dt));
    }
    place_vehicle(p.id, entry, p.lane, speed);
    ++next_pending_;
    return p.id;
  }

  /// Smallest same-lane bumper-to-bumper gap over all vehicle pairs.
  double min_same_lane_gap() const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& v : vehicles_) {
      if (auto lead = leader_of(v)) best = std::min(best, lead->second);
    }
    return best;
  }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  std::size_t& index_of(std::uint32_t entity_index) {
    if (entity_index >= slot_.size()) slot_.resize(entity_index + 1, kNone);
    return slot_[entity_index];
  }

  RoadGraph graph_;
  MobilityParams params_;
  std::vector<Vehicle> vehicles_;
  std::vector<std::size_t> slot_;
  std::vector<RoadsideUnit> rsus_;
  std::vector<PendingSpawn> pending_;
  std::size_t next_pending_{0};
  std::vector<Blockage> blockages_;
  std::vector<SlowZone> zones_;
};

/// Every vehicle and RSU within `radius` metres of `center`, excluding it.
/// Results are ordered by entity index.
inline std::vector<EntityId> neighbours_within(const MobilityWorld& world,
                                               const EntityId& center, double radius) {
  if (radius <= 0.0) throw DomainError("neighbours_within: radius must be positive");
  std::vector<EntityId> out;
  const auto origin = world.location(center);
  if (!origin) return out;
  for (const auto& v : world.vehicles()) {
    if (v.id.index == center.index) continue;
    if (distance(*origin, world.graph().point_at(v.kin.position)) <= radius) out.push_back(v.id);
  }
  for (const auto& r : world.rsus()) {
    if (r.id.index == center.index) continue;
    if (distance(*origin, r.location) <= radius) out.push_back(r.id);
  }
  std::sort(out.begin(), out.end(),
            [](const EntityId& a, const EntityId& b) { return a.index < b.index; });
  return out;
}

/// True when `b` is ahead of `a` along the direction of travel by less than
/// half the route length. Exactly opposite counts as not ahead.
inline bool downstream_of(const MobilityWorld& world, const EntityId& a, const EntityId& b) {
  if (!a.role.is_vehicle() || !b.role.is_vehicle()) {
    throw DomainError("downstream_of: both entities must be vehicles");
  }
  const auto* va = world.find_vehicle(a.index);
  const auto* vb = world.find_vehicle(b.index);
  if (!va || !vb) throw DomainError("downstream_of: vehicle not on the route");
  const double d = world.graph().wrap(vb->kin.position - va->kin.position);
  return d > 0.0 && d < world.graph().length() / 2.0;
}

/// A slower or stopped vehicle within `reach` metres ahead in the same lane.
inline bool queue_ahead(const MobilityWorld& world, const Vehicle& v, double reach = 50.0) {
  auto lead = world.leader_of(v);
  if (!lead) return false;
  const auto& [other, gap] = *lead;
  return gap <= reach && other->kin.speed <= v.kin.speed + 1e-9 &&
         other->kin.speed < v.kin.target_speed;
}

}  // namespace tim
