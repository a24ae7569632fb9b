#pragma once

// Transmission counters, multi-trial aggregation and CSV export.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "tim/trace.hpp"

namespace tim {

struct CounterKey {
  MessageKind kind{MessageKind::Accident};
  SenderClass sender{SenderClass::Vehicle};
  ActionSource source{ActionSource::Origin};
  friend auto operator<=>(const CounterKey&, const CounterKey&) = default;
};

struct TrialMetrics {
  std::map<CounterKey, std::uint64_t> counters;
  std::uint64_t total{0};
  std::uint64_t wired{0};

  std::uint64_t total_excluding_wired() const { return total - wired; }

  std::uint64_t count_of(MessageKind kind) const {
    std::uint64_t n = 0;
    for (const auto& [k, v] : counters) {
      if (k.kind == kind) n += v;
    }
    return n;
  }
};

/// Adds one transmission. Receptions never reach this function: the trace
/// keeps them in a separate list.
inline TrialMetrics& count(TrialMetrics& m, const TraceRecord& record) {
  ++m.counters[{record.msg.kind, sender_class(record.sender.role), record.source}];
  ++m.total;
  if (record.source == ActionSource::Wired) ++m.wired;
  return m;
}

inline TrialMetrics& count(TrialMetrics& m, const Reception&) { return m; }

struct Summary {
  double mean{0.0};
  double stddev{0.0};
};

/// Mean and sample standard deviation of the values.
inline Summary summarize(const std::vector<double>& xs) {
  if (xs.empty()) throw DomainError("aggregate: no trials");
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

inline Summary aggregate(const std::vector<TrialMetrics>& trials, bool include_wired = true) {
  std::vector<double> xs;
  xs.reserve(trials.size());
  for (const auto& t : trials) {
    xs.push_back(static_cast<double>(include_wired ? t.total : t.total_excluding_wired()));
  }
  return summarize(xs);
}

struct SweepRow {
  std::string scenario;
  std::string policy;
  std::size_t vehicles{0};
  std::size_t trial{0};
  std::uint64_t total{0};
};

struct AggregateRow {
  std::string scenario;
  std::string policy;
  std::size_t vehicles{0};
  double mean{0.0};
  double stddev{0.0};
};

struct SweepResult {
  std::vector<SweepRow> rows;

  /// One aggregate per (scenario, policy, vehicles) cell in first-seen order.
  std::vector<AggregateRow> aggregates() const {
    std::vector<std::tuple<std::string, std::string, std::size_t>> order;
    std::map<std::tuple<std::string, std::string, std::size_t>, std::vector<double>> cells;
    for (const auto& r : rows) {
      auto key = std::make_tuple(r.scenario, r.policy, r.vehicles);
      auto [it, fresh] = cells.try_emplace(key);
      if (fresh) order.push_back(key);
      it->second.push_back(static_cast<double>(r.total));
    }
    std::vector<AggregateRow> out;
    for (const auto& key : order) {
      const Summary s = summarize(cells[key]);
      out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), s.mean, s.stddev});
    }
    return out;
  }
};

inline constexpr const char* kDetailHeader = "scenario,policy,vehicles,trial,total_transmissions";
inline constexpr const char* kAggregateHeader = "scenario,policy,vehicles,mean,stddev";

inline std::string format_real(double x) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(6);
  os << std::fixed << x;
  return os.str();
}

inline void write_csv(const SweepResult& sweep, std::ostream& out) {
  out << kDetailHeader << '\n';
  for (const auto& r : sweep.rows) {
    out << r.scenario << ',' << r.policy << ',' << r.vehicles << ',' << r.trial << ',' << r.total
        << '\n';
  }
  out << '\n' << kAggregateHeader << '\n';
  for (const auto& a : sweep.aggregates()) {
    out << a.scenario << ',' << a.policy << ',' << a.vehicles << ',' << format_real(a.mean) << ','
        << format_real(a.stddev) << '\n';
  }
}

inline void export_csv(const SweepResult& sweep, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write CSV " + path);
  write_csv(sweep, out);
  if (!out) throw IoError("failed writing CSV " + path);
}

/// Aggregate section of a CSV written by write_csv. Malformed lines raise
/// ConfigError naming the line number.
inline std::vector<AggregateRow> read_aggregates(std::istream& in) {
  std::vector<AggregateRow> out;
  std::string line;
  std::size_t lineno = 0;
  bool in_aggregate = false;
  bool seen_detail = false;
  auto bad = [&](const std::string& why) {
    return ConfigError("line " + std::to_string(lineno) + ": " + why);
  };
  auto split = [](const std::string& s) {
    std::vector<std::string> f;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!s.empty() && s.back() == ',') f.emplace_back();
    return f;
  };
  auto to_number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw bad("not a number: '" + s + "'");
    }
    if (used != s.size() || !std::isfinite(v)) throw bad("not a number: '" + s + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line == kDetailHeader) {
      seen_detail = true;
      continue;
    }
    if (line == kAggregateHeader) {
      in_aggregate = true;
      continue;
    }
    const auto f = split(line);
    if (!in_aggregate) {
      if (!seen_detail) throw bad("missing header");
      if (f.size() != 5) throw bad("expected 5 fields");
      to_number(f[2]);
      to_number(f[3]);
      to_number(f[4]);
      continue;
    }
    if (f.size() != 5) throw bad("expected 5 fields");
    const double vehicles = to_number(f[2]);
    if (vehicles < 0 || vehicles != std::floor(vehicles)) throw bad("vehicle count must be an integer");
    out.push_back({f[0], f[1], static_cast<std::size_t>(vehicles), to_number(f[3]), to_number(f[4])});
  }
  if (!seen_detail && !in_aggregate && lineno > 0) throw ConfigError("line 1: missing header");
  return out;
}

}  // namespace tim
