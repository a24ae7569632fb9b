#pragma once

// Relay admission: hop-limit and freshness policies plus the per-entity
// seen-message store used for duplicate suppression.

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>

#include "tim/domain.hpp"

namespace tim {

struct HopLimit {
  std::uint32_t max_hops{4};
  friend bool operator==(const HopLimit&, const HopLimit&) = default;
};

struct Freshness {
  double max_age{60.0};
  friend bool operator==(const Freshness&, const Freshness&) = default;
};

using RelayPolicy = std::variant<HopLimit, Freshness>;

/// "hop4" / "fresh60" for the standard policies, "hop:N" / "fresh:T" otherwise.
inline std::string to_string(const RelayPolicy& p) {
  if (const auto* h = std::get_if<HopLimit>(&p)) {
    return h->max_hops == 4 ? "hop4" : "hop:" + std::to_string(h->max_hops);
  }
  const double t = std::get<Freshness>(p).max_age;
  if (t == 60.0) return "fresh60";
  std::string s = std::to_string(t);
  s.erase(s.find_last_not_of('0') + 1);
  if (s.back() == '.') s.pop_back();
  return "fresh:" + s;
}

inline RelayPolicy parse_policy(std::string_view text) {
  if (text == "hop4") return HopLimit{4};
  if (text == "fresh60") return Freshness{60.0};
  auto tail = [&](std::string_view prefix) { return text.substr(prefix.size()); };
  if (text.starts_with("hop:")) {
    auto digits = tail("hop:");
    std::uint32_t n = 0;
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec == std::errc{} && p == digits.data() + digits.size() && n > 0) {
      return HopLimit{n};
    }
  } else if (text.starts_with("fresh:")) {
    try {
      std::size_t used = 0;
      const std::string digits(tail("fresh:"));
      const double t = std::stod(digits, &used);
      if (used == digits.size() && t > 0.0) return Freshness{t};
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("unknown relay policy '" + std::string(text) +
                    "' (expected hop4, fresh60, hop:N or fresh:T)");
}

/// Ids an entity has already received. Membership is permanent for the run.
class SeenStore {
 public:
  bool contains(MessageId id) const { return first_seen_.contains(id); }

  /// Returns true when the id was not yet present.
  bool record(MessageId id, Timestamp now) {
    return first_seen_.try_emplace(id, now).second;
  }

  std::size_t size() const { return first_seen_.size(); }

  std::optional<Timestamp> first_seen(MessageId id) const {
    auto it = first_seen_.find(id);
    if (it == first_seen_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::unordered_map<MessageId, Timestamp> first_seen_;
};

inline SeenStore& record_seen(SeenStore& seen, MessageId id, Timestamp now) {
  seen.record(id, now);
  return seen;
}

/// Whether `role` may forward `msg` at `now`. `msg.hops` is the number of
/// wireless hops the received copy has already travelled, so under
/// HopLimit(k) the farthest receivers sit k hops from the origin.
inline bool should_relay(const RelayPolicy& policy, const Message& msg,
                         Timestamp now, const SeenStore& seen, Role role) {
  if (seen.contains(msg.id)) return false;
  if (role.kind == RoleKind::Ta) return false;
  if (msg.priority == Priority::Official) return true;
  return std::visit(
      [&](const auto& p) -> bool {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, HopLimit>) {
          return msg.hops < p.max_hops;
        } else {
          return age(msg, now) < p.max_age;
        }
      },
      policy);
}

}  // namespace tim
