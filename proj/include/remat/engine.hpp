// Copyright 2026 The remat-sim Authors.
// SPDX-License-Identifier: Apache-2.0

// Executes a trace under a fixed memory budget: allocation, eviction on
// allocation failure, recursive rematerialization, and the two in-place
// regimes (copy-on-write and recomputable in-place).

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "remat/policy.hpp"
#include "remat/pool.hpp"
#include "remat/trace.hpp"

namespace remat {

enum class PolicyKind { kCoop, kDtr, kDte };

std::string to_string(PolicyKind policy);
std::optional<PolicyKind> parse_policy(const std::string& text);

enum class EventKind { kAlloc, kFree, kEvict, kRecompute, kFragSample };

std::string to_string(EventKind kind);

struct Event {
  Micros clock = 0;
  EventKind kind = EventKind::kAlloc;
  std::string_view tensor;  // empty for frag samples
  Bytes addr = 0;
  Bytes size = 0;
  double value = 0.0;  // fragmentation rate for frag samples, op cost for recomputes
};

struct SimConfig {
  PolicyKind policy = PolicyKind::kCoop;
  // Coop features. With sliding_window off, Coop evicts with the DTE loop.
  bool sliding_window = true;
  bool partitioning = true;
  bool recomputable_inplace = true;

  double cost_class_threshold = kDefaultCostClassThreshold;
  std::size_t max_recompute_depth = 512;
  // A run whose total compute exceeds this multiple of the trace's own
  // compute is declared thrashed.
  double thrash_factor = 100.0;
  // Rematerialized tensors count as freshly accessed.
  bool reset_staleness_on_remat = true;
  // Check pool invariants after every op (slow; tests only).
  bool validate_pool = false;

  std::function<void(const Event&)> on_event;

  static SimConfig coop();
  static SimConfig dtr();
  static SimConfig dte();
  static SimConfig for_policy(PolicyKind policy);

  // "sliding_window|partitioning|recomputable_inplace", or "none".
  std::string toggles() const;
};

enum class RunStatus { kCompleted, kUnsatisfiable, kThrashed };

std::string to_string(RunStatus status);
std::optional<RunStatus> parse_run_status(const std::string& text);

class SimulationError : public std::runtime_error {
 public:
  SimulationError(RunStatus status, const std::string& what) : std::runtime_error(what), status_(status) {}
  RunStatus status() const { return status_; }

 private:
  RunStatus status_;
};

class UnsatisfiableAllocation : public SimulationError {
 public:
  explicit UnsatisfiableAllocation(const std::string& what) : SimulationError(RunStatus::kUnsatisfiable, what) {}
};

class RecomputeDepthExceeded : public SimulationError {
 public:
  explicit RecomputeDepthExceeded(const std::string& what) : SimulationError(RunStatus::kThrashed, what) {}
};

struct FragSample {
  Micros clock = 0;
  double fraction = 0.0;
};

struct SimulationCounters {
  Micros base_compute = 0;   // every trace op once
  Micros total_compute = 0;  // including recomputation
  std::size_t evictions = 0;
  std::size_t heuristic_evaluations = 0;
  std::size_t pressure_events = 0;  // allocations that needed eviction
  std::size_t recompute_ops = 0;
  std::size_t recompute_depth_max = 0;
  std::vector<FragSample> frag_samples;
  Bytes peak_resident = 0;

  // Consistency checks; all stay zero in a correct simulator.
  std::size_t search_bound_violations = 0;  // window search evaluated > 2 * items
  std::size_t plan_violations = 0;          // evicted window did not yield a fitting chunk
  std::size_t tag_mismatches = 0;           // recomputation produced a different version

  // Unevictable tensors that changed address through an in-place update.
  std::size_t unevictable_relocations = 0;
};

struct SimulationResult {
  RunStatus status = RunStatus::kCompleted;
  std::string reason;
  Bytes budget = 0;
  double overhead_ratio = 1.0;
  double mean_frag = 0.0;
  double max_frag = 0.0;
  std::size_t evictions = 0;
  std::size_t heuristic_evaluations = 0;
  double evals_per_pressure_event = 0.0;
  Bytes peak_resident = 0;
  SimulationCounters counters;
  // Per trace op, a hash of the version tags it consumed (0 if not executed).
  std::vector<std::uint64_t> op_digests;

  bool completed() const { return status == RunStatus::kCompleted; }
};

enum class TensorState {
  kPending,     // not produced yet
  kResident,
  kEvicted,     // dropped under pressure, still needed later
  kReleased,    // no remaining uses; memory returned
  kSuperseded,  // overwritten in place with no producer to rebuild it
};

struct RuntimeTensor {
  TensorId id;
  Bytes size = 0;
  TensorState state = TensorState::kPending;
  Bytes addr = 0;
  bool evictable = true;
  std::optional<std::size_t> producer_op;
  Micros last_access = 0;
  Micros compute_cost = 0;
  std::uint32_t version = 0;
  std::uint32_t pins = 0;
  std::uint32_t remaining_uses = 0;
  std::optional<std::uint64_t> tag;

  bool resident() const { return state == TensorState::kResident; }
};

class Engine {
 public:
  // `graph` must outlive the engine.
  Engine(const TraceGraph& graph, Bytes budget, SimConfig config);

  // Places parameters, then executes every op in trace order.
  void run();
  void place_params();
  void execute_op(std::size_t op_index);
  void materialize(TensorId t, std::size_t depth = 0);
  void evict(TensorId t);

  Micros staleness(TensorId t) const;
  Micros projected_cost(TensorId t) const;
  bool can_evict(TensorId t) const;

  const PoolState& pool() const { return pool_; }
  const TraceIndex& trace() const { return index_; }
  const SimConfig& config() const { return config_; }
  const SimulationCounters& counters() const { return counters_; }
  const RuntimeTensor& tensor(TensorId t) const { return tensors_[t.value]; }
  const std::string& name(TensorId t) const { return index_.tensor(t).id; }
  Micros clock() const { return clock_; }
  std::size_t next_op() const { return next_op_; }
  Bytes resident_bytes() const;

  SimulationResult result(RunStatus status, std::string reason = {}) const;

 private:
  // Makes `t` resident and pins it once.
  void acquire(TensorId t, std::size_t depth);
  void run_producer(std::size_t op_index, const std::vector<TensorId>& targets, std::size_t depth, bool recompute);
  void place_output(std::size_t op_index, TensorId t);
  Bytes allocate(std::size_t op_index, TensorId t);
  EvictionOutcome make_room(Bytes required);
  void pin(TensorId t);
  void unpin(TensorId t);
  void release(TensorId t);
  void emit(EventKind kind, TensorId t, Bytes addr, Bytes size, double value = 0.0) const;
  void check_thrash() const;

  const TraceGraph& graph_;
  TraceIndex index_;
  SimConfig config_;
  PoolState pool_;
  std::vector<RuntimeTensor> tensors_;
  std::vector<CostClass> op_class_;
  std::unordered_map<Bytes, std::uint64_t> memory_;  // block address -> version tag
  Micros clock_ = 0;
  Micros trace_compute_ = 0;
  std::size_t next_op_ = 0;
  SimulationCounters counters_;
  std::vector<std::uint64_t> op_digests_;
  bool params_placed_ = false;
};

// Never throws for budget-related failures; they come back as a status.
SimulationResult run_simulation(const TraceGraph& graph, Bytes budget, const SimConfig& config);

// JSON-lines event writer: {clock, event, tensor_id, addr, size, value}.
std::function<void(const Event&)> make_event_log_writer(std::ostream& out);

}  // namespace remat
