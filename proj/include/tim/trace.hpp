#pragma once

// Append-only record of every transmission in a trial, plus the receptions
// kept alongside for analysis. Only transmissions are exported.

#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tim/domain.hpp"
#include "tim/protocol.hpp"

namespace tim {

struct TraceRecord {
  Timestamp time{0.0};
  EntityId sender;
  std::optional<EntityId> receiver;  // nullopt for wireless broadcasts
  Message msg;
  ActionSource source{ActionSource::Origin};
  // Rule-table row behind a burst; not exported.
  std::optional<RuleKey> rule;
};

struct Reception {
  Timestamp time{0.0};
  EntityId receiver;
  EntityId sender;
  MessageId id;
  MessageKind kind{MessageKind::Accident};
  std::uint32_t hops{0};
  bool wired{false};
};

struct Trace {
  std::vector<TraceRecord> records;
  std::vector<Reception> receptions;
};

inline constexpr const char* kTraceHeader = "time,sender,receiver,msg_id,kind,road,hops,source";

inline std::string format_time(Timestamp t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", t);
  return buf;
}

inline std::string format_record(const TraceRecord& r) {
  std::string line = format_time(r.time);
  line += ',';
  line += r.sender.label();
  line += ',';
  line += r.receiver ? r.receiver->label() : std::string("*");
  line += ',';
  line += std::to_string(r.msg.id.value);
  line += ',';
  line += to_string(r.msg.kind);
  line += ',';
  line += r.msg.road.name;
  line += ',';
  line += std::to_string(r.msg.hops);
  line += ',';
  line += to_string(r.source);
  return line;
}

inline void write_trace(const Trace& trace, std::ostream& out) {
  out << kTraceHeader << '\n';
  for (const auto& r : trace.records) out << format_record(r) << '\n';
}

inline void write_trace_file(const Trace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open trace file " + path);
  write_trace(trace, out);
  if (!out) throw IoError("failed writing trace file " + path);
}

}  // namespace tim
