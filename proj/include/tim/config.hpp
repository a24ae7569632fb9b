#pragma once

// Run configuration: a flat `key = value` text format, validation and
// conversion into trial configurations.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tim/netsim.hpp"
#include "tim/scenarios.hpp"

namespace tim {

struct RunConfig {
  std::string scenario{"accident"};
  std::string policy{"hop4"};
  std::size_t vehicles{19};
  std::optional<std::size_t> police;
  std::uint64_t seed{1};
  std::size_t trials{5};
  double duration{1500.0};
  double warmup{500.0};
  std::vector<std::size_t> densities;
  std::string out_dir{"out"};
  double loss{0.0};
  bool include_wired{true};
  double range{300.0};
  double route_length{4000.0};
  double target_speed{13.0};
  std::size_t rsu_count{10};
  double hop_latency{0.01};
  double wired_latency{0.005};
  std::optional<double> resolve_at;
  double ta_delay{60.0};
  double on_site_time{120.0};

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string real_text(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

inline double parse_real(const std::string& key, const std::string& v) {
  double x = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || p != v.data() + v.size()) throw ConfigError(key + ": not a number: '" + v + "'");
  return x;
}

inline std::uint64_t parse_count(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || p != v.data() + v.size() || v.empty()) {
    throw ConfigError(key + ": not a non-negative integer: '" + v + "'");
  }
  return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

}  // namespace detail

/// Comma-separated counts; an item `first:last:step` expands to a range.
inline std::vector<std::size_t> parse_densities(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = detail::trim(item);
    if (item.empty()) continue;
    if (item.find(':') == std::string::npos) {
      out.push_back(detail::parse_count("densities", item));
      continue;
    }
    std::vector<std::uint64_t> f;
    std::stringstream parts(item);
    std::string x;
    while (std::getline(parts, x, ':')) f.push_back(detail::parse_count("densities", detail::trim(x)));
    if (f.size() != 3 || f[2] == 0 || f[0] > f[1]) {
      throw ConfigError("densities: range must be first:last:step, got '" + item + "'");
    }
    for (auto n = f[0]; n <= f[1]; n += f[2]) out.push_back(n);
  }
  return out;
}

/// Sets one key. Unknown keys are configuration errors.
inline void set_option(RunConfig& c, const std::string& key, const std::string& raw) {
  using namespace detail;
  const std::string v = trim(raw);
  if (key == "scenario") c.scenario = v;
  else if (key == "policy") c.policy = v;
  else if (key == "vehicles") c.vehicles = parse_count(key, v);
  else if (key == "police") c.police = v.empty() ? std::nullopt : std::optional<std::size_t>(parse_count(key, v));
  else if (key == "seed") c.seed = parse_count(key, v);
  else if (key == "trials") c.trials = parse_count(key, v);
  else if (key == "duration") c.duration = parse_real(key, v);
  else if (key == "warmup") c.warmup = parse_real(key, v);
  else if (key == "densities") c.densities = parse_densities(v);
  else if (key == "out_dir") c.out_dir = v;
  else if (key == "loss") c.loss = parse_real(key, v);
  else if (key == "include_wired") c.include_wired = parse_bool(key, v);
  else if (key == "range") c.range = parse_real(key, v);
  else if (key == "route_length") c.route_length = parse_real(key, v);
  else if (key == "target_speed") c.target_speed = parse_real(key, v);
  else if (key == "rsu_count") c.rsu_count = parse_count(key, v);
  else if (key == "hop_latency") c.hop_latency = parse_real(key, v);
  else if (key == "wired_latency") c.wired_latency = parse_real(key, v);
  else if (key == "resolve_at") c.resolve_at = v.empty() ? std::nullopt : std::optional<double>(parse_real(key, v));
  else if (key == "ta_delay") c.ta_delay = parse_real(key, v);
  else if (key == "on_site_time") c.on_site_time = parse_real(key, v);
  else throw ConfigError("unknown configuration key '" + key + "'");
}

/// Reads `key = value` lines; `#` starts a comment.
inline RunConfig parse_config(std::istream& in, RunConfig base = {}) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    try {
      set_option(base, detail::trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path);
  return parse_config(in, std::move(base));
}

inline std::string serialize(const RunConfig& c) {
  using detail::real_text;
  std::ostringstream os;
  os << "scenario = " << c.scenario << '\n'
     << "policy = " << c.policy << '\n'
     << "vehicles = " << c.vehicles << '\n'
     << "police = " << (c.police ? std::to_string(*c.police) : "") << '\n'
     << "seed = " << c.seed << '\n'
     << "trials = " << c.trials << '\n'
     << "duration = " << real_text(c.duration) << '\n'
     << "warmup = " << real_text(c.warmup) << '\n'
     << "densities = ";
  for (std::size_t i = 0; i < c.densities.size(); ++i) os << (i ? "," : "") << c.densities[i];
  os << '\n'
     << "out_dir = " << c.out_dir << '\n'
     << "loss = " << real_text(c.loss) << '\n'
     << "include_wired = " << (c.include_wired ? "true" : "false") << '\n'
     << "range = " << real_text(c.range) << '\n'
     << "route_length = " << real_text(c.route_length) << '\n'
     << "target_speed = " << real_text(c.target_speed) << '\n'
     << "rsu_count = " << c.rsu_count << '\n'
     << "hop_latency = " << real_text(c.hop_latency) << '\n'
     << "wired_latency = " << real_text(c.wired_latency) << '\n'
     << "resolve_at = " << (c.resolve_at ? real_text(*c.resolve_at) : "") << '\n'
     << "ta_delay = " << real_text(c.ta_delay) << '\n'
     << "on_site_time = " << real_text(c.on_site_time) << '\n';
  return os.str();
}

/// Trial configuration for `vehicles` vehicles. Field-level problems raise
/// ConfigError.
inline TrialConfig to_trial(const RunConfig& c, std::size_t vehicles) {
  TrialConfig t;
  t.script = build_scenario(c.scenario);
  t.vehicles = vehicles;
  t.police = c.police;
  t.policy = parse_policy(c.policy);
  t.duration = c.duration;
  t.warmup = c.warmup;
  t.mobility.route_length = c.route_length;
  t.mobility.target_speed = c.target_speed;
  t.mobility.rsu_count = c.rsu_count;
  t.net.range = c.range;
  t.net.hop_latency = c.hop_latency;
  t.net.wired_latency = c.wired_latency;
  t.net.loss = c.loss;
  t.protocol.ta_delay = c.ta_delay;
  t.script.on_site_time = c.on_site_time;
  if (c.resolve_at) t.script.resolve_at = *c.resolve_at;
  if (t.script.resolver == Resolver::TaTimed && !(t.script.resolve_at > t.script.report_time)) {
    throw ConfigError("resolve_at: must be after the report time");
  }
  if (c.trials == 0) throw ConfigError("trials: must be at least 1");
  if (c.route_length <= 0.0) throw ConfigError("route_length: must be positive");
  if (c.target_speed <= 0.0) throw ConfigError("target_speed: must be positive");
  if (c.hop_latency <= 0.0 || c.wired_latency <= 0.0) throw ConfigError("latency: must be positive");
  validate(t);
  return t;
}

inline void validate(const RunConfig& c) {
  to_trial(c, c.vehicles);
  for (auto d : c.densities) to_trial(c, d);
}

}  // namespace tim
