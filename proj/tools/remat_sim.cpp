// Copyright 2026 The remat-sim Authors.
// SPDX-License-Identifier: Apache-2.0

// remat-sim: trace generation, single runs, sweeps and budget searches.

#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "remat/engine.hpp"
#include "remat/report.hpp"
#include "remat/trace.hpp"

namespace {

using namespace remat;

struct Toggles {
  bool no_sliding_window = false;
  bool no_partitioning = false;
  bool no_inplace = false;
  double threshold = kDefaultCostClassThreshold;

  void add_to(CLI::App* app) {
    app->add_flag("--no-sliding-window", no_sliding_window, "Coop: evict with the DTE loop instead");
    app->add_flag("--no-partitioning", no_partitioning, "Coop: allocate every output from the left");
    app->add_flag("--no-recomputable-inplace", no_inplace, "Coop: copy-on-write for in-place ops");
    app->add_option("--cost-class-threshold", threshold, "C1/C2 split in us per MiB")->check(CLI::PositiveNumber);
  }

  SimConfig config(PolicyKind policy) const {
    SimConfig c = SimConfig::for_policy(policy);
    if (policy == PolicyKind::kCoop) {
      c.sliding_window = !no_sliding_window;
      c.partitioning = !no_partitioning;
      c.recomputable_inplace = !no_inplace;
    }
    c.cost_class_threshold = threshold;
    return c;
  }
};

PolicyKind policy_from(const std::string& name) {
  auto p = parse_policy(name);
  if (!p) throw CLI::ValidationError("--policy", "unknown policy '" + name + "'");
  return *p;
}

// Writes to `path`, or stdout for "-" or empty.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

void print_search(const std::string& what, const std::string& trace, const SimConfig& cfg,
                  const BudgetSearchResult& r) {
  std::cout << what << ' ' << trace << ' ' << variant_label(cfg) << ' ' << r.fraction << '\n';
  for (const SearchPoint& p : r.tested) {
    std::cout << "  tested " << p.fraction << ' ' << to_string(p.status) << " evictions=" << p.evictions << '\n';
  }
  for (double f : r.monotonicity_violations) std::cout << "  non-monotone: failed at " << f << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-driven tensor rematerialization simulator"};
  app.require_subcommand(1);

  // gen
  std::string arch = "uniform";
  ChainOptions chain;
  int iterations = 1;
  bool updates = false;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic training trace");
  gen->add_option("--arch", arch, "uniform|decreasing|ushaped")->required();
  gen->add_option("--layers", chain.layers, "Forward layers")->check(CLI::PositiveNumber);
  gen->add_option("--seed", chain.seed, "Cost jitter seed");
  gen->add_option("--halve-every", chain.halve_every, "Layers per size halving")->check(CLI::PositiveNumber);
  gen->add_option("--iterations", iterations, "Training iterations")->check(CLI::PositiveNumber);
  gen->add_flag("--updates", updates, "Append in-place parameter updates after each iteration");
  gen->add_option("-o,--output", gen_out, "Output trace (default stdout)");

  // run
  std::string trace_path;
  double fraction = 1.0;
  std::string policy_name = "coop";
  std::string emit = "csv";
  std::string event_log;
  Toggles run_toggles;
  auto* run = app.add_subcommand("run", "Run one trace at one budget");
  run->add_option("--trace", trace_path, "Trace file")->required()->check(CLI::ExistingFile);
  run->add_option("--budget-fraction", fraction, "Budget as a fraction of peak")->check(CLI::Range(0.0, 1.0));
  run->add_option("--policy", policy_name, "coop|dtr|dte");
  run->add_option("--emit", emit, "csv|json")->check(CLI::IsMember({"csv", "json"}));
  run->add_option("--event-log", event_log, "Write JSON-lines events here");
  run_toggles.add_to(run);

  // sweep
  std::string policies = "coop,dtr,dte";
  std::string fractions = "0.9:0.2:0.1";
  std::string sweep_out;
  unsigned threads = 0;
  Toggles sweep_toggles;
  auto* sw = app.add_subcommand("sweep", "Run policies over budget fractions");
  sw->add_option("--trace", trace_path, "Trace file")->required()->check(CLI::ExistingFile);
  sw->add_option("--policies", policies, "Comma-separated policies");
  auto* sweep_fractions = sw->add_option("--fractions", fractions,
                                         "start:stop:step or a comma list (default 0.9:0.2:0.1 plus each "
                                         "policy's minimum budget)");
  sw->add_option("-o,--output", sweep_out, "CSV output (default stdout)");
  sw->add_option("-j,--threads", threads, "Worker threads (0 = all cores)");
  sweep_toggles.add_to(sw);

  // ablate
  std::string ablate_out;
  auto* ablate = app.add_subcommand("ablate", "Full Coop against each module removed");
  ablate->add_option("--trace", trace_path, "Trace file")->required()->check(CLI::ExistingFile);
  ablate->add_option("--fractions", fractions, "start:stop:step or a comma list");
  ablate->add_option("-o,--output", ablate_out, "CSV output (default stdout)");
  ablate->add_option("-j,--threads", threads, "Worker threads (0 = all cores)");

  // min-budget / cutoff
  SearchOptions search;
  Toggles search_toggles;
  auto add_search = [&](CLI::App* sub) {
    sub->add_option("--trace", trace_path, "Trace file")->required()->check(CLI::ExistingFile);
    sub->add_option("--policy", policy_name, "coop|dtr|dte");
    sub->add_option("--resolution", search.resolution, "Grid step")->check(CLI::Range(1e-4, 1.0));
    sub->add_flag("--probe", search.full_probe, "Test every grid point above the result");
    search_toggles.add_to(sub);
  };
  auto* minb = app.add_subcommand("min-budget", "Smallest completing budget fraction");
  add_search(minb);
  auto* cutoff = app.add_subcommand("cutoff", "Smallest eviction-free budget fraction");
  add_search(cutoff);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      auto schedule = parse_size_schedule(arch);
      if (!schedule) throw std::runtime_error("unknown --arch '" + arch + "'");
      chain.schedule = *schedule;
      const TraceGraph graph = gen_training(chain, iterations, updates);
      Output out(gen_out);
      emit_trace(graph, out.stream());
      return 0;
    }

    const TraceGraph graph = parse_trace(trace_path);

    if (*run) {
      SimConfig cfg = run_toggles.config(policy_from(policy_name));
      std::unique_ptr<std::ofstream> log;
      if (!event_log.empty()) {
        log = std::make_unique<std::ofstream>(event_log);
        if (!*log) throw std::runtime_error("cannot open '" + event_log + "' for writing");
        cfg.on_event = make_event_log_writer(*log);
      }
      const Bytes peak = measure_peak(graph);
      RunRow row;
      row.trace = graph.metadata.name;
      row.policy = to_string(cfg.policy);
      row.toggles = cfg.toggles();
      row.budget_fraction = fraction;
      row.seed = graph.metadata.seed;
      row.result = run_simulation(graph, budget_for_fraction(peak, fraction), cfg);
      if (emit == "json") {
        std::cout << to_json(row) << '\n';
      } else {
        write_csv(std::cout, {row});
      }
      return 0;
    }

    if (*sw) {
      std::vector<SimConfig> configs;
      for (const std::string& name : CLI::detail::split(policies, ',')) {
        configs.push_back(sweep_toggles.config(policy_from(name)));
      }
      std::vector<double> grid = parse_fractions(fractions);
      if (sweep_fractions->count() == 0) {
        SearchOptions options;
        options.peak = measure_peak(graph);
        for (const SimConfig& cfg : configs) grid.push_back(min_budget_search(graph, cfg, options).fraction);
      }
      const SweepResult r = sweep(graph, std::move(grid), configs, threads);
      Output out(sweep_out);
      write_csv(out.stream(), r.rows);
      return 0;
    }

    if (*ablate) {
      const SweepResult r = ablation_matrix(graph, parse_fractions(fractions), threads);
      Output out(ablate_out);
      write_csv(out.stream(), r.rows);
      return 0;
    }

    const SimConfig cfg = search_toggles.config(policy_from(policy_name));
    if (*minb) {
      print_search("min-budget", graph.metadata.name, cfg, min_budget_search(graph, cfg, search));
    } else {
      print_search("cutoff", graph.metadata.name, cfg, cutoff_budget_search(graph, cfg, search));
    }
    return 0;
  } catch (const TraceError& e) {
    std::cerr << "remat-sim: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "remat-sim: " << e.what() << '\n';
    return 1;
  }
}
