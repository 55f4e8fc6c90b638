// Copyright 2026 The remat-sim Authors.
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Thresholds are pinned below.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "remat/report.hpp"
#include "support/oracles.hpp"
#include "support/scenarios.hpp"

using namespace remat;

namespace {

constexpr int kWindowCases = 5000;
constexpr double kWindowSeconds = 10.0;
constexpr int kPoolSequences = 100000;
constexpr int kPoolSteps = 40;
constexpr double kPoolSeconds = 30.0;
constexpr double kDirectionSeconds = 120.0;
constexpr double kFragCeiling = 0.05;
constexpr double kSearchResolution = 0.05;
constexpr std::uint64_t kTraceSeed = 7;
const std::vector<double> kTagFractions = {0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3};
const std::vector<double> kDirectionFractions = {0.4, 0.5, 0.6, 0.8};

struct Shipped {
  std::string arch;
  SizeSchedule schedule;
  int layers;
  TraceGraph graph;
  Bytes peak = 0;
};

// Counters that must stay zero in every run the suite performs.
struct Audit {
  std::size_t runs = 0;
  std::size_t plan_violations = 0;
  std::size_t bound_violations = 0;
  std::size_t pressure_events = 0;

  void add(const SimulationResult& r) {
    ++runs;
    plan_violations += r.counters.plan_violations;
    bound_violations += r.counters.search_bound_violations;
    pressure_events += r.counters.pressure_events;
  }
  void add(const SweepResult& s) {
    for (const RunRow& row : s.rows) add(row.result);
  }
};

Audit audit;

SimulationResult simulate(const TraceGraph& g, Bytes budget, const SimConfig& cfg) {
  SimulationResult r = run_simulation(g, budget, cfg);
  audit.add(r);
  return r;
}

struct Verdict {
  bool pass = true;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

std::vector<Shipped> load_traces() {
  std::vector<Shipped> out = {{"uniform", SizeSchedule::kUniform, 64, {}},
                              {"decreasing", SizeSchedule::kDecreasing, 32, {}},
                              {"ushaped", SizeSchedule::kUShaped, 32, {}}};
  for (Shipped& s : out) {
    const std::filesystem::path path = std::filesystem::path(REMAT_TRACE_DIR) / (s.arch + ".jsonl");
    s.graph = parse_trace(path);
    ChainOptions options;
    options.schedule = s.schedule;
    options.layers = s.layers;
    options.seed = kTraceSeed;
    if (!(s.graph == gen_training(options, 2, true))) {
      throw std::runtime_error(path.string() + " differs from the generator output");
    }
    s.peak = measure_peak(s.graph);
  }
  return out;
}

const std::vector<SimConfig>& policies() {
  static const std::vector<SimConfig> p = {SimConfig::coop(), SimConfig::dtr(), SimConfig::dte()};
  return p;
}

Verdict window_optimality() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2026);
  int mismatches = 0, feasible = 0, bound = 0;
  for (int i = 0; i < kWindowCases; ++i) {
    const scenario::WindowCase c = scenario::random_window_case(rng);
    const std::span<const WindowItem<scenario::Rational>> items(c.items);
    SearchStats stats;
    const auto got = sliding_window_search(items, c.required, &stats);
    const auto want = oracle::brute_force_window(items, c.required);
    if (stats.steps > 2 * c.items.size()) ++bound;
    if (got.has_value() != want.has_value()) {
      ++mismatches;
      continue;
    }
    if (!got) continue;
    ++feasible;
    if (got->total_heuristic != want->cost || got->begin != want->begin || got->end != want->end) ++mismatches;
  }
  const double t = seconds_since(start);
  return {mismatches == 0 && bound == 0 && t < kWindowSeconds,
          fmt("%d lists (%d feasible), %d mismatches, %d over 2n steps, %.2fs", kWindowCases, feasible, mismatches,
              bound, t)};
}

Verdict pool_invariants() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(4242);
  std::size_t failures = 0, ops = 0;
  for (int seq = 0; seq < kPoolSequences && failures == 0; ++seq) {
    const Bytes budget = 1 + rng() % 256;
    PoolState pool(budget);
    oracle::NaivePool naive(budget);
    std::vector<std::uint32_t> live;
    std::uint32_t next = 0;
    for (int step = 0; step < kPoolSteps; ++step, ++ops) {
      if (!live.empty() && rng() % 3 == 0) {
        // Free and evict both return the block to the pool.
        const std::size_t k = rng() % live.size();
        pool.free_block(TensorId(live[k]));
        naive.free(live[k]);
        live.erase(live.begin() + static_cast<long>(k));
      } else {
        const Bytes size = 1 + rng() % 64;
        const bool right = rng() % 2 == 0;
        const bool fits = pool.largest_free_chunk() >= size;
        const auto got = right ? pool.alloc_right(size, TensorId(next)) : pool.alloc_left(size, TensorId(next));
        if (got != naive.alloc(size, next, right) || got.has_value() != fits) ++failures;
        if (got) live.push_back(next);
        ++next;
      }
      try {
        pool.validate();
      } catch (const std::exception&) {
        ++failures;
      }
      if (pool.largest_free_chunk() != naive.largest_free_run()) ++failures;
    }
  }
  const double t = seconds_since(start);
  return {failures == 0 && t < kPoolSeconds,
          fmt("%d sequences, %zu operations, %zu failures, %.2fs", kPoolSequences, ops, failures, t)};
}

Verdict tag_correctness(const std::vector<Shipped>& traces) {
  std::size_t runs = 0, completed = 0, bad = 0;
  for (const Shipped& s : traces) {
    const SimulationResult reference = simulate(s.graph, 4 * s.peak, SimConfig::dtr());
    for (const SimConfig& cfg : policies()) {
      for (double f : kTagFractions) {
        const SimulationResult r = simulate(s.graph, budget_for_fraction(s.peak, f), cfg);
        ++runs;
        if (!r.completed()) continue;
        ++completed;
        if (r.op_digests != reference.op_digests || r.counters.tag_mismatches != 0) ++bad;
      }
    }
  }
  return {bad == 0 && completed > 0, fmt("%zu runs, %zu completed, %zu with a tag mismatch", runs, completed, bad)};
}

Verdict no_pressure(const std::vector<Shipped>& traces) {
  std::size_t bad = 0, runs = 0;
  for (const Shipped& s : traces) {
    std::vector<SimConfig> configs = ablation_configs();
    configs.push_back(SimConfig::dtr());
    configs.push_back(SimConfig::dte());
    for (const SimConfig& c : configs) {
      const SimulationResult r = simulate(s.graph, budget_for_fraction(s.peak, 1.0), c);
      ++runs;
      if (!r.completed() || r.overhead_ratio != 1.0 || r.evictions != 0) ++bad;
    }
  }
  return {bad == 0, fmt("%zu runs at fraction 1.0, %zu with evictions or overhead != 1", runs, bad)};
}

Verdict five_tensor() {
  const scenario::EvictionReplay dtr = scenario::replay_five_tensor(SimConfig::dtr());
  const scenario::EvictionReplay coop = scenario::replay_five_tensor(SimConfig::coop());
  const bool pass = dtr.evicted.size() >= 3 && dtr.evicted_bytes > coop.evicted_bytes && coop.evicted.size() == 2 &&
                    coop.contiguous;
  return {pass, fmt("DTR evicted %zu tensors (%llu MiB), Coop %zu tensors (%llu MiB, %s)", dtr.evicted.size(),
                    static_cast<unsigned long long>(dtr.evicted_bytes / kMiB), coop.evicted.size(),
                    static_cast<unsigned long long>(coop.evicted_bytes / kMiB),
                    coop.contiguous ? "contiguous" : "scattered")};
}

Verdict directions(const std::vector<Shipped>& traces) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::string> failures;
  std::size_t cells = 0;
  for (const Shipped& s : traces) {
    const SweepResult sw = sweep(s.graph, kDirectionFractions, policies());
    audit.add(sw);
    for (double f : kDirectionFractions) {
      ++cells;
      const RunRow* coop = sw.find("coop", SimConfig::coop().toggles(), f);
      const RunRow* dtr = sw.find("dtr", "none", f);
      const RunRow* dte = sw.find("dte", "none", f);
      const std::string cell = fmt("%s@%.2f", s.arch.c_str(), f);
      if (!coop->result.completed()) {
        if (dtr->result.completed()) failures.push_back(cell + " coop failed where dtr completed");
        continue;
      }
      if (dtr->result.completed() && coop->result.overhead_ratio > dtr->result.overhead_ratio) {
        failures.push_back(cell + fmt(" overhead %.5f > dtr %.5f", coop->result.overhead_ratio,
                                      dtr->result.overhead_ratio));
      }
      if (dte->result.completed() && coop->result.mean_frag > dte->result.mean_frag) {
        failures.push_back(cell + fmt(" frag %.5f > dte %.5f", coop->result.mean_frag, dte->result.mean_frag));
      }
      if (coop->result.mean_frag > kFragCeiling) {
        failures.push_back(cell + fmt(" frag %.5f > %.2f", coop->result.mean_frag, kFragCeiling));
      }
    }

    SearchOptions options;
    options.resolution = kSearchResolution;
    options.peak = s.peak;
    std::map<std::string, double> min, cut;
    for (const SimConfig& cfg : policies()) {
      const std::string p = to_string(cfg.policy);
      min[p] = min_budget_search(s.graph, cfg, options).fraction;
      cut[p] = cutoff_budget_search(s.graph, cfg, options).fraction;
    }
    if (min["coop"] > min["dtr"]) failures.push_back(s.arch + fmt(" min budget %.2f > dtr %.2f", min["coop"], min["dtr"]));
    for (const char* base : {"dtr", "dte"}) {
      if (cut["coop"] > cut[base]) failures.push_back(s.arch + fmt(" cutoff %.2f > %s %.2f", cut["coop"], base, cut[base]));
    }
    std::printf("    %s: min budget coop %.2f dtr %.2f dte %.2f; cutoff coop %.2f dtr %.2f dte %.2f\n", s.arch.c_str(),
                min["coop"], min["dtr"], min["dte"], cut["coop"], cut["dtr"], cut["dte"]);
  }
  const double t = seconds_since(start);
  for (const std::string& f : failures) std::printf("    violated: %s\n", f.c_str());
  return {failures.empty() && t < kDirectionSeconds,
          fmt("%zu cells, %zu violations, %.2fs", cells, failures.size(), t)};
}

Verdict search_cost(const std::vector<Shipped>& traces) {
  const Shipped& uniform = traces.front();
  const Bytes budget = budget_for_fraction(uniform.peak, 0.5);
  const SimulationResult coop = simulate(uniform.graph, budget, SimConfig::coop());
  const SimulationResult dtr = simulate(uniform.graph, budget, SimConfig::dtr());
  const bool pass = audit.bound_violations == 0 && coop.completed() && dtr.completed() &&
                    coop.heuristic_evaluations < dtr.heuristic_evaluations;
  return {pass, fmt("%zu pressure events over %zu runs exceed 2x items; uniform@0.50 evaluations coop %zu vs dtr %zu",
                    audit.bound_violations, audit.runs, coop.heuristic_evaluations, dtr.heuristic_evaluations)};
}

// Number of parameter lineages whose address ever changed. Each in-place
// update of a parameter continues its lineage under a new tensor id.
std::size_t moved_parameters(const TraceGraph& g, Bytes budget, const SimConfig& cfg, bool& completed) {
  Engine engine(g, budget, cfg);
  const TraceIndex& index = engine.trace();
  std::vector<TensorId> latest;
  for (const TensorSpec& p : g.params) latest.push_back(*index.find(p.id));
  std::map<std::uint32_t, std::size_t> lineage;
  for (std::size_t i = 0; i < latest.size(); ++i) lineage[latest[i].value] = i;

  std::vector<Bytes> home(latest.size());
  std::vector<bool> moved(latest.size(), false);
  completed = true;
  try {
    engine.place_params();
    for (std::size_t i = 0; i < latest.size(); ++i) home[i] = engine.tensor(latest[i]).addr;
    for (std::size_t op = 0; op < g.ops.size(); ++op) {
      engine.execute_op(op);
      const OpInfo& info = index.op(op);
      if (info.mutated_input) {
        const auto it = lineage.find(info.mutated_input->value);
        if (it != lineage.end()) {
          latest[it->second] = info.outputs.front();
          lineage[info.outputs.front().value] = it->second;
        }
      }
      for (std::size_t i = 0; i < latest.size(); ++i) {
        const RuntimeTensor& t = engine.tensor(latest[i]);
        if (t.resident() && t.addr != home[i]) moved[i] = true;
      }
    }
  } catch (const SimulationError&) {
    completed = false;
  }
  audit.add(engine.result(completed ? RunStatus::kCompleted : RunStatus::kThrashed));
  return static_cast<std::size_t>(std::count(moved.begin(), moved.end(), true));
}

Verdict unevictable_stability(const std::vector<Shipped>& traces) {
  std::size_t inplace_moves = 0, cow_moves = 0, runs = 0, incomplete = 0;
  for (const Shipped& s : traces) {
    for (double f : {1.0, 0.6, 0.4}) {
      const Bytes budget = budget_for_fraction(s.peak, f);
      for (const SimConfig& base : policies()) {
        SimConfig inplace = base;
        inplace.recomputable_inplace = true;
        SimConfig cow = base;
        cow.recomputable_inplace = false;
        bool ok = true;
        inplace_moves += moved_parameters(s.graph, budget, inplace, ok);
        incomplete += !ok;
        cow_moves += moved_parameters(s.graph, budget, cow, ok);
        incomplete += !ok;
        runs += 2;
      }
    }
  }
  return {inplace_moves == 0 && cow_moves > 0 && incomplete == 0,
          fmt("%zu runs, %zu incomplete; parameters moved: in-place %zu, copy-on-write %zu", runs, incomplete,
              inplace_moves, cow_moves)};
}

Verdict ablation(const std::vector<Shipped>& traces) {
  const Shipped& ushaped = traces.back();
  const SweepResult s = ablation_matrix(ushaped.graph, {0.4});
  audit.add(s);
  std::map<std::string, SimulationResult> by_label;
  for (std::size_t i = 0; i < s.rows.size(); ++i) by_label[variant_label(ablation_configs()[i])] = s.rows[i].result;
  const SimulationResult& full = by_label["coop"];
  std::vector<std::string> failures;
  std::string summary;
  for (const auto& [label, r] : by_label) {
    summary += fmt(" %s %.5f/%.5f", label.c_str(), r.overhead_ratio, r.mean_frag);
    if (label == "coop") continue;
    if (!full.completed()) {
      failures.push_back("full coop did not complete");
      break;
    }
    if (r.completed() && full.overhead_ratio > r.overhead_ratio) failures.push_back(label + " overhead");
  }
  for (const char* label : {"coop-no-inplace", "coop-no-sliding-window"}) {
    const SimulationResult& r = by_label[label];
    if (r.completed() && full.mean_frag > r.mean_frag) failures.push_back(std::string(label) + " frag");
  }
  std::string lost;
  for (const std::string& f : failures) lost += " " + f;
  return {failures.empty(), "ushaped@0.40 overhead/frag:" + summary + (lost.empty() ? "" : "; beaten on:" + lost)};
}

}  // namespace

int main() {
  std::vector<Shipped> traces;
  try {
    traces = load_traces();
  } catch (const std::exception& e) {
    std::printf("cannot load shipped traces: %s\n", e.what());
    return 1;
  }

  struct Criterion {
    int number;
    const char* name;
    std::function<Verdict()> check;
  };
  const std::vector<Criterion> criteria = {
      {1, "window-search optimality", window_optimality},
      {3, "pool invariants", pool_invariants},
      {4, "rematerialization tags", [&] { return tag_correctness(traces); }},
      {5, "no-pressure identity", [&] { return no_pressure(traces); }},
      {6, "five-tensor replay", five_tensor},
      {7, "direction suite", [&] { return directions(traces); }},
      {9, "unevictable stability", [&] { return unevictable_stability(traces); }},
      {10, "ablation directions", [&] { return ablation(traces); }},
      // Last: these audit every simulation above.
      {8, "search-cost bound", [&] { return search_cost(traces); }},
      {2, "eviction plan yields a fitting chunk",
       [] {
         return Verdict{audit.plan_violations == 0,
                        fmt("%zu runs, %zu pressure events, %zu violations", audit.runs, audit.pressure_events,
                            audit.plan_violations)};
       }},
  };

  std::map<int, std::pair<std::string, Verdict>> verdicts;
  for (const Criterion& c : criteria) {
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    verdicts[c.number] = {c.name, v};
  }
  int failed = 0;
  for (const auto& [number, entry] : verdicts) {
    const auto& [name, v] = entry;
    std::printf("%s criterion %2d %s: %s\n", v.pass ? "PASS" : "FAIL", number, name.c_str(), v.detail.c_str());
    failed += !v.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(verdicts.size()) - failed, verdicts.size());
  return failed == 0 ? 0 : 1;
}
