// tim_cli: run one scenario, sweep both relaying policies over densities, or
// summarise a sweep CSV.
//
// Exit status: 0 ok, 1 conformance failure, 2 configuration error, 3 I/O error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "tim/tim.hpp"

namespace fs = std::filesystem;
using namespace tim;

namespace {

struct Flags {
  std::optional<std::string> config;
  std::map<std::string, std::string> given;  // config key -> flag text
};

void add_run_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option_function<std::string>("--config", [&f](const std::string& v) { f.config = v; },
                                        "key = value configuration file");
  const std::vector<std::pair<std::string, std::string>> keys{
      {"scenario", "incident script name"},
      {"policy", "hop4, fresh60, hop:N or fresh:T"},
      {"vehicles", "number of vehicles"},
      {"police", "number of police vehicles"},
      {"trials", "trials per cell"},
      {"seed", "base seed; trial i uses seed + i"},
      {"duration", "simulated seconds"},
      {"warmup", "warm-up seconds"},
      {"densities", "vehicle counts, e.g. 19,39 or 19:139:20"},
      {"out-dir", "output directory"},
      {"loss", "per-delivery loss probability"},
      {"include-wired", "count wired sends in totals (true/false)"},
      {"resolve-at", "scripted resolution time"},
      {"range", "radio range in metres"}};
  for (const auto& [flag, help] : keys) {
    std::string key = flag;
    std::replace(key.begin(), key.end(), '-', '_');
    cmd->add_option_function<std::string>("--" + flag, [&f, key](const std::string& v) { f.given[key] = v; },
                                          help);
  }
}

RunConfig resolve(const Flags& f) {
  RunConfig c = f.config ? load_config(*f.config) : RunConfig{};
  for (const auto& [k, v] : f.given) set_option(c, k, v);
  validate(c);
  return c;
}

std::string file_safe(std::string s) {
  for (auto& ch : s) {
    if (ch == ':' || ch == '/') ch = '-';
  }
  return s;
}

struct Cell {
  std::string policy;
  std::size_t vehicles;
  std::size_t trial;
  std::uint64_t seed;
};

struct Done {
  Cell cell;
  TrialResult result;
};

// Runs every cell on a bounded pool; results come back in cell order.
std::vector<Done> run_cells(const RunConfig& rc, const std::vector<Cell>& cells) {
  std::vector<Done> out(cells.size());
  const std::size_t workers = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next++) < cells.size();) {
      RunConfig c = rc;
      c.policy = cells[i].policy;
      out[i] = {cells[i], run_trial(to_trial(c, cells[i].vehicles), cells[i].seed)};
    }
  };
  std::vector<std::future<void>> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.push_back(std::async(std::launch::async, work));
  for (auto& p : pool) p.get();
  return out;
}

std::uint64_t total_of(const RunConfig& rc, const TrialMetrics& m) {
  return rc.include_wired ? m.total : m.total_excluding_wired();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw IoError("cannot write " + path);
}

int cmd_run(const RunConfig& rc) {
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < rc.trials; ++i) cells.push_back({rc.policy, rc.vehicles, i, rc.seed + i});
  const auto done = run_cells(rc, cells);

  ensure_dir(rc.out_dir);
  const auto spec = sequence_spec(build_scenario(rc.scenario).figure);
  SweepResult sweep;
  std::string report;
  bool all_ok = true;
  for (const auto& d : done) {
    const std::string stem = rc.scenario + "_" + file_safe(rc.policy) + "_" + std::to_string(rc.vehicles) +
                             "_seed" + std::to_string(d.cell.seed);
    write_trace_file(d.result.trace, (fs::path(rc.out_dir) / (stem + ".trace.csv")).string());
    sweep.rows.push_back({rc.scenario, rc.policy, rc.vehicles, d.cell.trial, total_of(rc, d.result.metrics)});
    const auto rep = check_conformance(d.result.trace, spec);
    const bool ok = rep.pass() && d.result.terminal;
    all_ok = all_ok && ok;
    report += "seed " + std::to_string(d.cell.seed) + ": " + (ok ? "conformant" : "NONCONFORMANT") +
              ", " + (d.result.terminal ? "terminal" : "not terminal") + " (" + d.result.terminal_detail +
              ")\n" + rep.text();
    for (const auto& n : d.result.notes) report += "  note: " + n + "\n";
  }
  export_csv(sweep, (fs::path(rc.out_dir) / "metrics.csv").string());
  write_text((fs::path(rc.out_dir) / "conformance.txt").string(), report);

  const auto agg = sweep.aggregates().front();
  std::cout << rc.scenario << " " << rc.policy << " vehicles=" << rc.vehicles << " trials=" << rc.trials
            << " mean=" << format_real(agg.mean) << " stddev=" << format_real(agg.stddev) << "\n"
            << "conformance: " << (all_ok ? "all trials pass" : "FAILURES, see conformance.txt") << "\n"
            << "wrote " << rc.out_dir << "\n";
  return all_ok ? 0 : 1;
}

std::vector<std::size_t> sweep_densities(const RunConfig& rc) {
  if (!rc.densities.empty()) return rc.densities;
  if (build_scenario(rc.scenario).resolver == Resolver::Official) return {21, 51, 81, 111, 131};
  return {19, 39, 59, 79, 99, 119, 139};
}

std::string comparison(const std::vector<AggregateRow>& rows, bool& any) {
  std::map<std::pair<std::string, std::size_t>, std::map<std::string, double>> cells;
  for (const auto& r : rows) cells[{r.scenario, r.vehicles}][r.policy] = r.mean;
  std::ostringstream os;
  std::vector<std::string> flagged;
  any = false;
  os << "scenario,vehicles,hop4,fresh60,hop4>=fresh60\n";
  for (const auto& [key, m] : cells) {
    const auto h = m.find("hop4"), f = m.find("fresh60");
    if (h == m.end() || f == m.end()) continue;
    any = true;
    const bool ok = h->second >= f->second;
    os << key.first << ',' << key.second << ',' << format_real(h->second) << ',' << format_real(f->second)
       << ',' << (ok ? "yes" : "no") << '\n';
    if (!ok) flagged.push_back(key.first + "@" + std::to_string(key.second));
  }
  if (flagged.empty()) {
    os << "hop4 >= fresh60 at all densities: PASS\n";
  } else {
    os << "hop4 < fresh60 at:";
    for (const auto& x : flagged) os << ' ' << x;
    os << "\n";
  }
  return os.str();
}

int cmd_sweep(const RunConfig& rc) {
  std::vector<Cell> cells;
  for (const char* p : {"hop4", "fresh60"}) {
    for (auto n : sweep_densities(rc)) {
      for (std::size_t i = 0; i < rc.trials; ++i) cells.push_back({p, n, i, rc.seed + i});
    }
  }
  for (const auto& c : cells) {
    RunConfig probe = rc;
    probe.policy = c.policy;
    to_trial(probe, c.vehicles);
  }
  const auto done = run_cells(rc, cells);

  ensure_dir(rc.out_dir);
  const auto spec = sequence_spec(build_scenario(rc.scenario).figure);
  SweepResult sweep;
  std::size_t bad = 0;
  for (const auto& d : done) {
    sweep.rows.push_back({rc.scenario, d.cell.policy, d.cell.vehicles, d.cell.trial, total_of(rc, d.result.metrics)});
    if (!check_conformance(d.result.trace, spec).pass() || !d.result.terminal) ++bad;
  }
  export_csv(sweep, (fs::path(rc.out_dir) / "sweep.csv").string());
  bool any = false;
  const std::string summary = comparison(sweep.aggregates(), any);
  write_text((fs::path(rc.out_dir) / "summary.txt").string(), summary);
  std::cout << summary << "nonconformant trials: " << bad << " of " << done.size() << "\n"
            << "wrote " << rc.out_dir << "\n";
  return bad == 0 ? 0 : 1;
}

int cmd_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  const auto rows = read_aggregates(in);
  bool any = false;
  const std::string text = comparison(rows, any);
  if (!any) {
    std::cout << "no data\n";
    return 2;
  }
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"traffic incident message relaying simulator"};
  app.require_subcommand(1);
  Flags run_flags, sweep_flags;
  auto* run = app.add_subcommand("run", "run trials of one scenario cell");
  add_run_flags(run, run_flags);
  auto* sweep = app.add_subcommand("sweep", "run both policies across densities");
  add_run_flags(sweep, sweep_flags);
  auto* report = app.add_subcommand("report", "compare policies in a sweep CSV");
  std::string csv;
  report->add_option("csv", csv, "CSV written by sweep")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(resolve(run_flags));
    if (*sweep) return cmd_sweep(resolve(sweep_flags));
    return cmd_report(csv);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
