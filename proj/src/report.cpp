// Copyright 2026 The remat-sim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "remat/report.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace remat {

Bytes measure_footprint(const TraceGraph& graph, const SimConfig& config) {
  Bytes total = 0;
  for (const TensorSpec& p : graph.params) total += p.size;
  for (const OpSpec& op : graph.ops) {
    for (const TensorSpec& out : op.outputs) total += out.size;
  }
  if (total == 0) return 1;

  // No run ever touches address `probe`: left placements stay below it and
  // right placements above it, since neither side can span more than every
  // byte the trace allocates. The free block around it is the gap between
  // the two sides; the footprint is the pool minus its smallest size.
  const Bytes pool_size = 2 * total + 2;
  const Bytes probe = total + 1;
  const Engine* engine = nullptr;
  Bytes footprint = 0;

  SimConfig cfg = config;
  cfg.on_event = [&](const Event& e) {
    if (e.kind != EventKind::kAlloc) return;
    const MemoryBlock& gap = engine->pool().block_containing(probe);
    if (!gap.free()) throw std::logic_error("measure_footprint: allocation crossed the probe address");
    footprint = std::max(footprint, pool_size - gap.size);
  };
  Engine run(graph, pool_size, cfg);
  engine = &run;
  run.run();
  if (run.counters().evictions != 0) throw std::logic_error("measure_footprint: unexpected eviction");
  return std::max<Bytes>(footprint, 1);
}

Bytes measure_peak(const TraceGraph& graph) {
  Bytes peak = 0;
  for (bool partitioning : {false, true}) {
    for (bool inplace : {false, true}) {
      SimConfig cfg = SimConfig::coop();
      cfg.partitioning = partitioning;
      cfg.recomputable_inplace = inplace;
      peak = std::max(peak, measure_footprint(graph, cfg));
    }
  }
  return peak;
}

Bytes budget_for_fraction(Bytes peak, double fraction) {
  if (!(fraction > 0.0)) throw std::invalid_argument("budget fraction must be positive");
  const auto bytes = static_cast<Bytes>(std::llround(static_cast<long double>(peak) * fraction));
  return std::max<Bytes>(bytes, 1);
}

std::vector<SimConfig> ablation_configs() {
  std::vector<SimConfig> configs(4, SimConfig::coop());
  configs[1].sliding_window = false;
  configs[2].partitioning = false;
  configs[3].recomputable_inplace = false;
  return configs;
}

std::string variant_label(const SimConfig& config) {
  if (config.policy != PolicyKind::kCoop) return to_string(config.policy);
  std::string label = "coop";
  if (!config.sliding_window) label += "-no-sliding-window";
  if (!config.partitioning) label += "-no-partitioning";
  if (!config.recomputable_inplace) label += "-no-inplace";
  return label;
}

const RunRow* SweepResult::find(const std::string& policy, const std::string& toggles, double fraction) const {
  for (const RunRow& r : rows) {
    if (r.policy == policy && r.toggles == toggles && r.budget_fraction == fraction) return &r;
  }
  return nullptr;
}

namespace {

std::vector<double> normalize_fractions(std::vector<double> fractions) {
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw std::invalid_argument("budget fractions must lie in (0, 1]");
  }
  std::sort(fractions.begin(), fractions.end());
  fractions.erase(std::unique(fractions.begin(), fractions.end()), fractions.end());
  return fractions;
}

// Runs `task(i)` for i in [0, n) on up to `threads` workers.
template <class Task>
void parallel_for(std::size_t n, unsigned threads, Task task) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> workers;
  workers.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) task(i);
    });
  }
}

}  // namespace

SweepResult sweep(const TraceGraph& graph, std::vector<double> fractions, const std::vector<SimConfig>& configs,
                  unsigned threads) {
  SweepResult out;
  out.fractions = normalize_fractions(std::move(fractions));
  out.peak = measure_peak(graph);

  const std::size_t nf = out.fractions.size();
  out.rows.resize(configs.size() * nf);
  parallel_for(out.rows.size(), threads, [&](std::size_t cell) {
    const SimConfig& cfg = configs[cell / nf];
    const double f = out.fractions[cell % nf];
    RunRow& row = out.rows[cell];
    row.trace = graph.metadata.name;
    row.policy = to_string(cfg.policy);
    row.toggles = cfg.toggles();
    row.budget_fraction = f;
    row.seed = graph.metadata.seed;
    row.result = run_simulation(graph, budget_for_fraction(out.peak, f), cfg);
  });
  return out;
}

SweepResult ablation_matrix(const TraceGraph& graph, std::vector<double> fractions, unsigned threads) {
  return sweep(graph, std::move(fractions), ablation_configs(), threads);
}

namespace {

template <class Accept>
BudgetSearchResult grid_search(const TraceGraph& graph, const SimConfig& config, const SearchOptions& options,
                               bool step_up, Accept accept) {
  const double inverse = 1.0 / options.resolution;
  const long steps = std::lround(inverse);
  if (!(options.resolution > 0.0) || steps < 1 || std::abs(inverse - static_cast<double>(steps)) > 1e-6) {
    throw std::invalid_argument("resolution must divide 1 into a whole number of steps");
  }
  const Bytes peak = options.peak ? *options.peak : measure_peak(graph);

  BudgetSearchResult out;
  auto fraction = [&](long k) { return static_cast<double>(k) / static_cast<double>(steps); };
  auto test = [&](long k) {
    const SimulationResult r = run_simulation(graph, budget_for_fraction(peak, fraction(k)), config);
    out.tested.push_back(SearchPoint{fraction(k), r.status, r.evictions});
    return accept(r);
  };

  long hi = steps;
  if (!test(hi)) {
    if (!step_up) throw std::runtime_error("trace does not complete at the full peak budget");
    for (long k = steps + 1; k <= 4 * steps; ++k) {
      if (test(k)) {
        out.fraction = fraction(k);
        return out;
      }
    }
    throw std::runtime_error("no budget up to 4x peak satisfies the search");
  }

  long lo = 0;  // fraction 0 is treated as failing without a run
  while (hi - lo > 1) {
    const long mid = lo + (hi - lo) / 2;
    (test(mid) ? hi : lo) = mid;
  }
  out.fraction = fraction(hi);

  if (options.full_probe) {
    for (long k = hi + 1; k < steps; ++k) {
      const double f = fraction(k);
      const bool seen = std::any_of(out.tested.begin(), out.tested.end(),
                                    [&](const SearchPoint& p) { return p.fraction == f; });
      if (!seen) test(k);
    }
  }
  for (const SearchPoint& p : out.tested) {
    const bool ok = p.status == RunStatus::kCompleted && (!step_up || p.evictions == 0);
    if (!ok && p.fraction > out.fraction) out.monotonicity_violations.push_back(p.fraction);
  }
  std::sort(out.monotonicity_violations.begin(), out.monotonicity_violations.end());
  return out;
}

}  // namespace

BudgetSearchResult min_budget_search(const TraceGraph& graph, const SimConfig& config, SearchOptions options) {
  return grid_search(graph, config, options, false, [](const SimulationResult& r) { return r.completed(); });
}

BudgetSearchResult cutoff_budget_search(const TraceGraph& graph, const SimConfig& config, SearchOptions options) {
  return grid_search(graph, config, options, true,
                     [](const SimulationResult& r) { return r.completed() && r.evictions == 0; });
}

// ---- parsing -------------------------------------------------------------

namespace {

double parse_double(std::string_view text, const char* what) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument(std::string("bad ") + what + ": '" + std::string(text) + "'");
  return v;
}

std::uint64_t parse_u64(std::string_view text, const char* what) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument(std::string("bad ") + what + ": '" + std::string(text) + "'");
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::logic_error("format_double failed");
  return std::string(buf, ptr);
}

// Snaps to 9 decimals so "0.9:0.2:0.1" yields 0.3 rather than 0.30000000000000004.
double snap(double v) { return std::round(v * 1e9) / 1e9; }

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

}  // namespace

std::vector<double> parse_fractions(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw std::invalid_argument("fraction range must be start:stop:step");
    const double start = parse_double(parts[0], "fraction");
    const double stop = parse_double(parts[1], "fraction");
    const double step = parse_double(parts[2], "fraction step");
    if (!(step > 0.0)) throw std::invalid_argument("fraction step must be positive");
    const double dir = stop >= start ? 1.0 : -1.0;
    const auto n = static_cast<long>(std::floor(std::abs(stop - start) / step + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(snap(start + dir * static_cast<double>(i) * step));
  } else {
    for (const std::string& p : split(text, ',')) out.push_back(parse_double(p, "fraction"));
  }
  if (out.empty()) throw std::invalid_argument("no budget fractions given");
  return normalize_fractions(std::move(out));
}

// ---- CSV -----------------------------------------------------------------

CsvRow to_csv_row(const RunRow& row) {
  const SimulationResult& r = row.result;
  CsvRow c;
  c.trace = row.trace;
  c.policy = row.policy;
  c.toggles = row.toggles;
  c.budget_fraction = row.budget_fraction;
  c.status = to_string(r.status);
  c.overhead_ratio = r.overhead_ratio;
  c.mean_frag = r.mean_frag;
  c.max_frag = r.max_frag;
  c.evictions = r.evictions;
  c.heuristic_evals = r.heuristic_evaluations;
  c.evals_per_event = r.evals_per_pressure_event;
  c.seed = row.seed;
  return c;
}

namespace {

std::string quote(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) throw std::runtime_error("unterminated quote in CSV line");
  return fields;
}

}  // namespace

std::string format_csv_row(const CsvRow& c) {
  std::string out;
  out += quote(c.trace) + ',' + quote(c.policy) + ',' + quote(c.toggles) + ',';
  out += format_double(c.budget_fraction) + ',' + quote(c.status) + ',';
  out += format_double(c.overhead_ratio) + ',' + format_double(c.mean_frag) + ',' + format_double(c.max_frag) + ',';
  out += std::to_string(c.evictions) + ',' + std::to_string(c.heuristic_evals) + ',';
  out += format_double(c.evals_per_event) + ',' + std::to_string(c.seed);
  return out;
}

CsvRow parse_csv_row(const std::string& line) {
  std::string trimmed = line;
  if (!trimmed.empty() && trimmed.back() == '\r') trimmed.pop_back();
  const auto f = split_csv(trimmed);
  if (f.size() != 12) throw std::runtime_error("CSV row has " + std::to_string(f.size()) + " fields, expected 12");
  try {
    CsvRow c;
    c.trace = f[0];
    c.policy = f[1];
    c.toggles = f[2];
    c.budget_fraction = parse_double(f[3], "budget_fraction");
    c.status = f[4];
    if (!parse_run_status(c.status)) throw std::invalid_argument("bad status: '" + c.status + "'");
    c.overhead_ratio = parse_double(f[5], "overhead_ratio");
    c.mean_frag = parse_double(f[6], "mean_frag");
    c.max_frag = parse_double(f[7], "max_frag");
    c.evictions = parse_u64(f[8], "evictions");
    c.heuristic_evals = parse_u64(f[9], "heuristic_evals");
    c.evals_per_event = parse_double(f[10], "evals_per_event");
    c.seed = parse_u64(f[11], "seed");
    return c;
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(e.what());
  }
}

void write_csv(std::ostream& out, const std::vector<RunRow>& rows, bool header) {
  if (header) out << kCsvHeader << '\n';
  for (const RunRow& r : rows) out << format_csv_row(to_csv_row(r)) << '\n';
}

std::vector<CsvRow> read_csv(std::istream& in) {
  std::vector<CsvRow> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    if (first && line.rfind("trace,policy,", 0) == 0) {
      first = false;
      continue;
    }
    first = false;
    rows.push_back(parse_csv_row(line));
  }
  return rows;
}

std::string to_json(const RunRow& row) {
  const SimulationResult& r = row.result;
  const SimulationCounters& k = r.counters;
  nlohmann::ordered_json j;
  j["trace"] = row.trace;
  j["policy"] = row.policy;
  j["toggles"] = row.toggles;
  j["budget_fraction"] = row.budget_fraction;
  j["budget"] = r.budget;
  j["status"] = to_string(r.status);
  if (!r.reason.empty()) j["reason"] = r.reason;
  j["overhead_ratio"] = r.overhead_ratio;
  j["mean_frag"] = r.mean_frag;
  j["max_frag"] = r.max_frag;
  j["evictions"] = r.evictions;
  j["heuristic_evals"] = r.heuristic_evaluations;
  j["evals_per_event"] = r.evals_per_pressure_event;
  j["peak_resident"] = r.peak_resident;
  j["seed"] = row.seed;
  j["counters"] = {
      {"base_compute", k.base_compute},
      {"total_compute", k.total_compute},
      {"pressure_events", k.pressure_events},
      {"recompute_ops", k.recompute_ops},
      {"recompute_depth_max", k.recompute_depth_max},
      {"frag_samples", k.frag_samples.size()},
      {"search_bound_violations", k.search_bound_violations},
      {"plan_violations", k.plan_violations},
      {"tag_mismatches", k.tag_mismatches},
      {"unevictable_relocations", k.unevictable_relocations},
  };
  return j.dump();
}

}  // namespace remat
