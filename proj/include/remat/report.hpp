// Copyright 2026 The remat-sim Authors.
// SPDX-License-Identifier: Apache-2.0

// Experiment harness: peak measurement, budget sweeps, minimum and cutoff
// budget searches, ablations, and CSV/JSON output.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "remat/engine.hpp"
#include "remat/trace.hpp"

namespace remat {

// Address-space footprint of an eviction-free run under one placement
// configuration: the smallest budget for which the run never evicts.
Bytes measure_footprint(const TraceGraph& graph, const SimConfig& config);

// Largest footprint over every placement configuration the harness uses
// (partitioning on/off x in-place regime). A budget of this size runs every
// policy without eviction; budget fractions are relative to it.
Bytes measure_peak(const TraceGraph& graph);

// round(peak * fraction), at least one byte.
Bytes budget_for_fraction(Bytes peak, double fraction);

// The four ablation variants: full Coop, then each module removed.
std::vector<SimConfig> ablation_configs();
std::string variant_label(const SimConfig& config);

struct RunRow {
  std::string trace;
  std::string policy;
  std::string toggles;
  double budget_fraction = 0.0;
  std::uint64_t seed = 0;
  SimulationResult result;
};

struct SweepResult {
  Bytes peak = 0;
  std::vector<double> fractions;  // strictly increasing
  std::vector<RunRow> rows;       // ordered by (config, fraction)

  const RunRow* find(const std::string& policy, const std::string& toggles, double fraction) const;
};

// Runs every (config, fraction) cell; cells execute concurrently on up to
// `threads` workers (0 = hardware concurrency). Failed runs are rows too.
SweepResult sweep(const TraceGraph& graph, std::vector<double> fractions, const std::vector<SimConfig>& configs,
                  unsigned threads = 0);

SweepResult ablation_matrix(const TraceGraph& graph, std::vector<double> fractions, unsigned threads = 0);

struct SearchPoint {
  double fraction = 0.0;
  RunStatus status = RunStatus::kCompleted;
  std::size_t evictions = 0;
};

struct BudgetSearchResult {
  double fraction = 1.0;
  std::vector<SearchPoint> tested;  // in test order
  // Fractions that failed although a smaller tested fraction passed.
  std::vector<double> monotonicity_violations;
};

struct SearchOptions {
  double resolution = 0.05;  // 1 / resolution must be an integer
  // Also test every grid point above the result, not only bisection points.
  bool full_probe = false;
  std::optional<Bytes> peak;  // measured when absent
};

// Smallest grid fraction that completes, assuming completion is monotone
// in the budget. Throws std::runtime_error if the trace fails at 1.0.
BudgetSearchResult min_budget_search(const TraceGraph& graph, const SimConfig& config, SearchOptions options = {});

// Smallest grid fraction that completes with zero evictions. If 1.0 already
// evicts, steps upward by the resolution.
BudgetSearchResult cutoff_budget_search(const TraceGraph& graph, const SimConfig& config, SearchOptions options = {});

// "0.9:0.2:0.1" (start:stop:step, either direction, stop inclusive) or a
// comma-separated list. Result is sorted ascending without duplicates.
std::vector<double> parse_fractions(const std::string& text);

// ---- CSV -----------------------------------------------------------------

inline constexpr const char* kCsvHeader =
    "trace,policy,toggles,budget_fraction,status,overhead_ratio,mean_frag,max_frag,evictions,heuristic_evals,"
    "evals_per_event,seed";

struct CsvRow {
  std::string trace;
  std::string policy;
  std::string toggles;
  double budget_fraction = 0.0;
  std::string status;
  double overhead_ratio = 0.0;
  double mean_frag = 0.0;
  double max_frag = 0.0;
  std::uint64_t evictions = 0;
  std::uint64_t heuristic_evals = 0;
  double evals_per_event = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const CsvRow&, const CsvRow&) = default;
};

CsvRow to_csv_row(const RunRow& row);
std::string format_csv_row(const CsvRow& row);
// Throws std::runtime_error on a malformed line.
CsvRow parse_csv_row(const std::string& line);

void write_csv(std::ostream& out, const std::vector<RunRow>& rows, bool header = true);
// Skips the header line if present.
std::vector<CsvRow> read_csv(std::istream& in);

// One JSON object per run: the CSV fields plus budget bytes and counters.
std::string to_json(const RunRow& row);

}  // namespace remat
