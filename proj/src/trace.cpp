// Copyright 2026 The remat-sim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "remat/trace.hpp"

#include <algorithm>
#include <unordered_set>

namespace remat {

namespace {

std::string describe(const std::string& what, const std::string& op_id, std::size_t line) {
  std::string msg = what;
  if (!op_id.empty()) msg += " (op '" + op_id + "')";
  if (line != 0) msg += " at line " + std::to_string(line);
  return msg;
}

}  // namespace

TraceError::TraceError(const std::string& what, std::string op_id, std::size_t line)
    : std::runtime_error(describe(what, op_id, line)), op_id_(std::move(op_id)), line_(line) {}

void validate(const TraceGraph& graph, const std::vector<std::size_t>& lines) {
  // name -> (size, evictable)
  std::unordered_map<std::string, std::pair<Bytes, bool>> known;
  std::unordered_set<std::string> op_ids;

  for (const TensorSpec& p : graph.params) {
    if (p.id.empty()) throw TraceError("parameter with empty id");
    if (p.size == 0) throw TraceError("parameter '" + p.id + "' has zero size");
    if (p.evictable) throw TraceError("parameter '" + p.id + "' must be unevictable");
    if (p.producer_op) throw TraceError("parameter '" + p.id + "' must not have a producer");
    if (!known.emplace(p.id, std::pair{p.size, false}).second) {
      throw TraceError("duplicate tensor id '" + p.id + "'");
    }
  }

  for (std::size_t i = 0; i < graph.ops.size(); ++i) {
    const OpSpec& op = graph.ops[i];
    const std::size_t line = i < lines.size() ? lines[i] : 0;
    auto fail = [&](const std::string& what) { throw TraceError(what, op.id, line); };

    if (op.id.empty()) fail("op with empty id");
    if (!op_ids.insert(op.id).second) fail("duplicate op id");
    if (op.outputs.empty()) fail("op has no outputs");

    for (const std::string& in : op.inputs) {
      if (!known.count(in)) fail("input '" + in + "' is used before it is produced");
    }

    bool outputs_evictable = true;
    if (op.kind == OpKind::kInplace) {
      if (op.outputs.size() != 1) fail("in-place op must have exactly one output");
      if (op.mutated_input.empty()) fail("in-place op is missing mutated_input");
      if (std::find(op.inputs.begin(), op.inputs.end(), op.mutated_input) == op.inputs.end()) {
        fail("mutated_input '" + op.mutated_input + "' is not among the inputs");
      }
      const auto& [mutated_size, mutated_evictable] = known.at(op.mutated_input);
      if (op.outputs.front().size != mutated_size) fail("in-place output size differs from mutated input");
      outputs_evictable = mutated_evictable;
    } else if (!op.mutated_input.empty()) {
      fail("compute op must not set mutated_input");
    }

    for (const TensorSpec& out : op.outputs) {
      if (out.id.empty()) fail("output with empty id");
      if (out.size == 0) fail("output '" + out.id + "' has zero size");
      if (out.producer_op != i) fail("output '" + out.id + "' has an inconsistent producer");
      if (out.evictable != outputs_evictable) fail("output '" + out.id + "' has inconsistent evictability");
      if (!known.emplace(out.id, std::pair{out.size, out.evictable}).second) {
        fail("tensor '" + out.id + "' is produced twice");
      }
    }
  }
}

CostDensity cost_density(const OpSpec& op) {
  Bytes total = 0;
  for (const TensorSpec& out : op.outputs) total += out.size;
  if (total == 0) throw std::invalid_argument("cost density of op '" + op.id + "' with zero-size outputs");
  return CostDensity{op.cost_us, total};
}

CostClass classify_cost_class(const OpSpec& op, double threshold) {
  const CostDensity d = cost_density(op);
  // cost / (bytes / MiB) >= threshold, without dividing.
  const long double lhs = static_cast<long double>(d.cost_us) * static_cast<long double>(kMiB);
  const long double rhs = static_cast<long double>(threshold) * static_cast<long double>(d.bytes);
  return lhs >= rhs ? CostClass::kExpensive : CostClass::kCheap;
}

TraceIndex::TraceIndex(const TraceGraph& graph) : graph_(&graph) {
  validate(graph);

  auto add = [&](const TensorSpec& spec, std::size_t slot) {
    const TensorId id(static_cast<std::uint32_t>(tensors_.size()));
    tensors_.push_back(TensorInfo{spec.id, spec.size, spec.evictable, spec.producer_op, slot, {}});
    by_name_.emplace(spec.id, id);
    return id;
  };

  for (const TensorSpec& p : graph.params) add(p, 0);

  ops_.reserve(graph.ops.size());
  for (std::size_t i = 0; i < graph.ops.size(); ++i) {
    const OpSpec& spec = graph.ops[i];
    OpInfo info;
    for (const std::string& in : spec.inputs) {
      const TensorId id = by_name_.at(in);
      info.inputs.push_back(id);
      if (std::find(info.distinct_inputs.begin(), info.distinct_inputs.end(), id) == info.distinct_inputs.end()) {
        info.distinct_inputs.push_back(id);
        tensors_[id.value].consumer_ops.push_back(i);
      }
    }
    if (spec.kind == OpKind::kInplace) info.mutated_input = by_name_.at(spec.mutated_input);
    for (std::size_t slot = 0; slot < spec.outputs.size(); ++slot) {
      info.outputs.push_back(add(spec.outputs[slot], slot));
    }
    ops_.push_back(std::move(info));
  }
}

std::optional<TensorId> TraceIndex::find(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

}  // namespace remat
