// Copyright 2026 The remat-sim Authors.
// SPDX-License-Identifier: Apache-2.0

// Workload model: operator DAGs with per-output sizes and per-op compute
// costs, the line-delimited trace format, and synthetic generators.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "remat/types.hpp"

namespace remat {

enum class OpKind { kCompute, kInplace };

// C1: super-linear operators (conv, matmul). C2: linear/sub-linear ones.
enum class CostClass { kExpensive, kCheap };

inline constexpr double kDefaultCostClassThreshold = 15.0;  // µs/MB

struct TensorSpec {
  std::string id;
  Bytes size = 0;
  bool evictable = true;
  // Index into TraceGraph::ops; empty for parameters and trace inputs.
  std::optional<std::size_t> producer_op;

  friend bool operator==(const TensorSpec&, const TensorSpec&) = default;
};

struct OpSpec {
  std::string id;
  OpKind kind = OpKind::kCompute;
  std::vector<std::string> inputs;
  std::vector<TensorSpec> outputs;
  Micros cost_us = 0;
  std::string mutated_input;  // set iff kind == kInplace

  friend bool operator==(const OpSpec&, const OpSpec&) = default;
};

struct TraceMetadata {
  std::string name;
  std::uint64_t seed = 0;

  friend bool operator==(const TraceMetadata&, const TraceMetadata&) = default;
};

struct TraceGraph {
  std::vector<TensorSpec> params;
  std::vector<OpSpec> ops;  // topological order == execution order
  TraceMetadata metadata;

  friend bool operator==(const TraceGraph&, const TraceGraph&) = default;
};

class TraceError : public std::runtime_error {
 public:
  TraceError(const std::string& what, std::string op_id = {}, std::size_t line = 0);

  const std::string& op_id() const { return op_id_; }
  // 1-based line in the source file; 0 when the graph was not parsed from a file.
  std::size_t line() const { return line_; }

 private:
  std::string op_id_;
  std::size_t line_;
};

// Checks every TraceGraph invariant. `lines[i]` is the source line of ops[i]
// when available, used for error reporting.
void validate(const TraceGraph& graph, const std::vector<std::size_t>& lines = {});

TraceGraph parse_trace(const std::filesystem::path& path);
TraceGraph parse_trace(std::istream& in);
void emit_trace(const TraceGraph& graph, std::ostream& out);
void emit_trace(const TraceGraph& graph, const std::filesystem::path& path);

// Compute cost per MiB of output, kept as the exact pair it was derived from.
struct CostDensity {
  Micros cost_us = 0;
  Bytes bytes = 0;

  double value() const { return static_cast<double>(cost_us) * static_cast<double>(kMiB) / static_cast<double>(bytes); }
};

CostDensity cost_density(const OpSpec& op);
CostClass classify_cost_class(const OpSpec& op, double threshold = kDefaultCostClassThreshold);

// Resolved view of a validated graph: dense tensor ids, producers, consumers.
struct TensorInfo {
  std::string id;
  Bytes size = 0;
  bool evictable = true;
  std::optional<std::size_t> producer_op;
  std::size_t output_slot = 0;
  std::vector<std::size_t> consumer_ops;  // distinct, ascending
};

struct OpInfo {
  std::vector<TensorId> inputs;           // in declaration order, may repeat
  std::vector<TensorId> distinct_inputs;  // first-occurrence order
  std::vector<TensorId> outputs;
  std::optional<TensorId> mutated_input;
};

class TraceIndex {
 public:
  explicit TraceIndex(const TraceGraph& graph);

  const TraceGraph& graph() const { return *graph_; }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  const std::vector<OpInfo>& ops() const { return ops_; }
  const TensorInfo& tensor(TensorId id) const { return tensors_[id.value]; }
  const OpInfo& op(std::size_t index) const { return ops_[index]; }
  std::optional<TensorId> find(const std::string& name) const;
  std::size_t num_params() const { return graph_->params.size(); }

 private:
  const TraceGraph* graph_;
  std::vector<TensorInfo> tensors_;
  std::vector<OpInfo> ops_;
  std::unordered_map<std::string, TensorId> by_name_;
};

// ---- synthetic generators -------------------------------------------------

enum class SizeSchedule { kUniform, kDecreasing, kUShaped };

std::string to_string(SizeSchedule schedule);
std::optional<SizeSchedule> parse_size_schedule(const std::string& text);

struct ChainOptions {
  int layers = 8;
  SizeSchedule schedule = SizeSchedule::kUniform;
  double conv_cost = 35.6;  // µs/MB of output
  double act_cost = 3.9;    // µs/MB of output
  std::uint64_t seed = 0;
  Bytes base_size = 16 * kMiB;
  Bytes param_size = 4 * kMiB;
  int halve_every = 8;        // layers per size halving (decreasing, u_shaped)
  double cost_jitter = 0.10;  // relative, drawn per op from the seed
};

// Forward conv/activation chain followed by the mirrored backward chain.
TraceGraph gen_chain(const ChainOptions& options);

// Appends one in-place update per parameter, mutating its latest version.
TraceGraph gen_param_updates(const TraceGraph& graph);

// `iterations` repetitions of the chain body. Each iteration reads the latest
// parameter versions; with `param_updates`, updates follow every iteration.
TraceGraph gen_training(const ChainOptions& options, int iterations, bool param_updates);

}  // namespace remat
