#pragma once

// Core vocabulary shared by every module: roles, entities, message kinds and
// the message value type itself.

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>

#include "tim/errors.hpp"

namespace tim {

/// Simulation time in seconds.
using Timestamp = double;

enum class RoleKind : std::uint8_t {
  RegularVehicle,
  Police,
  Ambulance,
  FireService,
  Rsu,
  Ta,
};

struct Role {
  RoleKind kind{RoleKind::RegularVehicle};

  constexpr bool is_official() const {
    return kind == RoleKind::Police || kind == RoleKind::Ambulance ||
           kind == RoleKind::FireService;
  }
  constexpr bool is_vehicle() const {
    return kind == RoleKind::RegularVehicle || is_official();
  }
  constexpr bool is_infrastructure() const {
    return kind == RoleKind::Rsu || kind == RoleKind::Ta;
  }

  friend constexpr bool operator==(Role, Role) = default;
};

inline constexpr Role kRegular{RoleKind::RegularVehicle};
inline constexpr Role kPolice{RoleKind::Police};
inline constexpr Role kRsu{RoleKind::Rsu};
inline constexpr Role kTa{RoleKind::Ta};

/// Coarse sender classification used by the RSU rule table and by metrics.
enum class SenderClass : std::uint8_t { Vehicle, Rsu, Official, Ta };

constexpr SenderClass sender_class(Role role) {
  switch (role.kind) {
    case RoleKind::RegularVehicle: return SenderClass::Vehicle;
    case RoleKind::Rsu: return SenderClass::Rsu;
    case RoleKind::Ta: return SenderClass::Ta;
    default: return SenderClass::Official;
  }
}

inline std::string_view to_string(SenderClass c) {
  switch (c) {
    case SenderClass::Vehicle: return "vehicle";
    case SenderClass::Rsu: return "rsu";
    case SenderClass::Official: return "official";
    case SenderClass::Ta: return "ta";
  }
  return "?";
}

inline std::string_view to_string(RoleKind k) {
  switch (k) {
    case RoleKind::RegularVehicle: return "regular";
    case RoleKind::Police: return "police";
    case RoleKind::Ambulance: return "ambulance";
    case RoleKind::FireService: return "fire";
    case RoleKind::Rsu: return "rsu";
    case RoleKind::Ta: return "ta";
  }
  return "?";
}

enum class MessageKind : std::uint8_t {
  Accident,
  AvoidRoad,
  RestrictedMovement,
  Attending,
  SortedRoad,
  ClearedRoad,
  TrafficJam,
  Congestion,
  Obstacle,
  ObstacleCleared,
  Diversion,
  StrandedVehicle,
  Debris,
  DebrisResolved,
  ServiceQuery,
  ServiceReply,
  RoadDefect,
  DefectResolved,
  Flood,
  FloodResolved,
  SignalMalfunction,
  SignalResolved,
  AddressingIncident,
  Ack,
  FreeRoad,
};

inline constexpr std::size_t kMessageKindCount = 25;

inline constexpr std::array<std::string_view, kMessageKindCount> kKindNames{
    "Accident",          "AvoidRoad",        "RestrictedMovement",
    "Attending",         "SortedRoad",       "ClearedRoad",
    "TrafficJam",        "Congestion",       "Obstacle",
    "ObstacleCleared",   "Diversion",        "StrandedVehicle",
    "Debris",            "DebrisResolved",   "ServiceQuery",
    "ServiceReply",      "RoadDefect",       "DefectResolved",
    "Flood",             "FloodResolved",    "SignalMalfunction",
    "SignalResolved",    "AddressingIncident", "Ack",
    "FreeRoad",
};

inline std::string_view to_string(MessageKind k) {
  return kKindNames[static_cast<std::size_t>(k)];
}

inline std::optional<MessageKind> parse_kind(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<MessageKind>(i);
  }
  return std::nullopt;
}

/// Incident kinds that the traffic authority resolves, paired with the
/// resolution kind it sends back.
inline std::optional<MessageKind> ta_resolution_for(MessageKind k) {
  switch (k) {
    case MessageKind::Debris: return MessageKind::DebrisResolved;
    case MessageKind::RoadDefect: return MessageKind::DefectResolved;
    case MessageKind::Flood: return MessageKind::FloodResolved;
    case MessageKind::SignalMalfunction: return MessageKind::SignalResolved;
    default: return std::nullopt;
  }
}

/// Kinds that open an incident in an RSU ledger.
constexpr bool is_incident_report(MessageKind k) {
  switch (k) {
    case MessageKind::Accident:
    case MessageKind::TrafficJam:
    case MessageKind::Congestion:
    case MessageKind::Obstacle:
    case MessageKind::Diversion:
    case MessageKind::StrandedVehicle:
    case MessageKind::Debris:
    case MessageKind::RoadDefect:
    case MessageKind::Flood:
    case MessageKind::SignalMalfunction:
      return true;
    default:
      return false;
  }
}

/// Kinds that close an incident.
constexpr bool is_resolution(MessageKind k) {
  switch (k) {
    case MessageKind::SortedRoad:
    case MessageKind::ClearedRoad:
    case MessageKind::ObstacleCleared:
    case MessageKind::DebrisResolved:
    case MessageKind::DefectResolved:
    case MessageKind::FloodResolved:
    case MessageKind::SignalResolved:
      return true;
    default:
      return false;
  }
}

/// Incidents that need an official vehicle on site.
constexpr bool needs_official(MessageKind k) {
  return k == MessageKind::Accident || k == MessageKind::Obstacle ||
         k == MessageKind::StrandedVehicle;
}

enum class Priority : std::uint8_t { Normal, Official };

struct RoadId {
  std::string name;

  RoadId() = default;
  explicit RoadId(std::string n) : name(std::move(n)) {
    if (name.empty()) throw DomainError("road id must be non-empty");
  }

  friend bool operator==(const RoadId&, const RoadId&) = default;
  friend auto operator<=>(const RoadId&, const RoadId&) = default;
};

struct MessageId {
  std::uint64_t value{0};

  friend constexpr bool operator==(MessageId, MessageId) = default;
  friend constexpr auto operator<=>(MessageId, MessageId) = default;
};

struct EntityId {
  std::uint32_t index{0};
  Role role{};
  // Position within its role family: vehicle number for vehicles, RSU number
  // for RSUs.
  std::uint32_t ordinal{0};

  /// Trace label: V17, P0, R3, TA.
  std::string label() const {
    switch (role.kind) {
      case RoleKind::RegularVehicle: return "V" + std::to_string(ordinal);
      case RoleKind::Police: return "P" + std::to_string(ordinal);
      case RoleKind::Ambulance: return "A" + std::to_string(ordinal);
      case RoleKind::FireService: return "F" + std::to_string(ordinal);
      case RoleKind::Rsu: return "R" + std::to_string(ordinal);
      case RoleKind::Ta: return "TA";
    }
    return "?";
  }

  friend constexpr bool operator==(const EntityId& a, const EntityId& b) {
    return a.index == b.index;
  }
};

struct Message {
  MessageId id;
  MessageKind kind{MessageKind::Accident};
  RoadId road;
  EntityId origin;
  Timestamp created_at{0.0};
  std::uint32_t hops{0};
  Priority priority{Priority::Normal};
  std::optional<MessageId> correlation;
  // Free-form payload: service category on queries, location on replies.
  std::string detail;

  friend bool operator==(const Message&, const Message&) = default;
};

/// Seconds elapsed since the message was created.
inline double age(const Message& msg, Timestamp now) {
  if (now < msg.created_at) {
    throw ClockInversion("age: now " + std::to_string(now) +
                         " precedes created_at " +
                         std::to_string(msg.created_at));
  }
  return now - msg.created_at;
}

/// Allocates run-unique message ids and stamps new messages. Only entities
/// registered with the factory may originate messages.
class MessageFactory {
 public:
  void register_entity(const EntityId& id) { known_.insert(id.index); }
  bool knows(const EntityId& id) const { return known_.contains(id.index); }

  Message make(MessageKind kind, RoadId road, const EntityId& origin,
               Timestamp now, std::optional<MessageId> correlation = {},
               std::string detail = {}) {
    if (!knows(origin)) {
      throw DomainError("make_message: unknown origin " + origin.label());
    }
    if (now < 0.0) throw DomainError("make_message: negative timestamp");
    Message m;
    m.id = MessageId{next_id_++};
    m.kind = kind;
    m.road = std::move(road);
    m.origin = origin;
    m.created_at = now;
    m.hops = 0;
    m.priority = origin.role.is_official() ? Priority::Official : Priority::Normal;
    m.correlation = correlation;
    m.detail = std::move(detail);
    return m;
  }

  std::uint64_t issued() const { return next_id_ - 1; }

 private:
  std::unordered_set<std::uint32_t> known_;
  std::uint64_t next_id_{1};
};

inline Message make_message(MessageFactory& factory, MessageKind kind,
                            RoadId road, const EntityId& origin, Timestamp now) {
  return factory.make(kind, std::move(road), origin, now);
}

}  // namespace tim

template <>
struct std::hash<tim::MessageId> {
  std::size_t operator()(tim::MessageId id) const noexcept {
    return std::hash<std::uint64_t>{}(id.value);
  }
};

template <>
struct std::hash<tim::RoadId> {
  std::size_t operator()(const tim::RoadId& r) const noexcept {
    return std::hash<std::string>{}(r.name);
  }
};
