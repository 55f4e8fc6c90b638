// Copyright 2026 The remat-sim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "remat/engine.hpp"

#include <algorithm>
#include <limits>
#include <ostream>

#include "json.hpp"

namespace remat {

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  // splitmix64 finalizer over the running state.
  std::uint64_t z = h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::string to_string(PolicyKind policy) {
  switch (policy) {
    case PolicyKind::kCoop:
      return "coop";
    case PolicyKind::kDtr:
      return "dtr";
    case PolicyKind::kDte:
      return "dte";
  }
  return "unknown";
}

std::optional<PolicyKind> parse_policy(const std::string& text) {
  if (text == "coop") return PolicyKind::kCoop;
  if (text == "dtr") return PolicyKind::kDtr;
  if (text == "dte") return PolicyKind::kDte;
  return std::nullopt;
}

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kAlloc:
      return "alloc";
    case EventKind::kFree:
      return "free";
    case EventKind::kEvict:
      return "evict";
    case EventKind::kRecompute:
      return "recompute";
    case EventKind::kFragSample:
      return "frag_sample";
  }
  return "unknown";
}

std::string to_string(RunStatus status) {
  switch (status) {
    case RunStatus::kCompleted:
      return "completed";
    case RunStatus::kUnsatisfiable:
      return "unsatisfiable";
    case RunStatus::kThrashed:
      return "thrashed";
  }
  return "unknown";
}

std::optional<RunStatus> parse_run_status(const std::string& text) {
  if (text == "completed") return RunStatus::kCompleted;
  if (text == "unsatisfiable") return RunStatus::kUnsatisfiable;
  if (text == "thrashed") return RunStatus::kThrashed;
  return std::nullopt;
}

SimConfig SimConfig::coop() { return SimConfig{}; }

SimConfig SimConfig::dtr() {
  SimConfig c;
  c.policy = PolicyKind::kDtr;
  c.sliding_window = false;
  c.partitioning = false;
  c.recomputable_inplace = false;
  return c;
}

SimConfig SimConfig::dte() {
  SimConfig c = dtr();
  c.policy = PolicyKind::kDte;
  return c;
}

SimConfig SimConfig::for_policy(PolicyKind policy) {
  switch (policy) {
    case PolicyKind::kCoop:
      return coop();
    case PolicyKind::kDtr:
      return dtr();
    case PolicyKind::kDte:
      return dte();
  }
  return coop();
}

std::string SimConfig::toggles() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += '|';
    out += name;
  };
  add(policy == PolicyKind::kCoop && sliding_window, "sliding_window");
  add(partitioning, "partitioning");
  add(recomputable_inplace, "recomputable_inplace");
  return out.empty() ? "none" : out;
}

// ---------------------------------------------------------------------------

Engine::Engine(const TraceGraph& graph, Bytes budget, SimConfig config)
    : graph_(graph), index_(graph), config_(std::move(config)), pool_(budget) {
  tensors_.resize(index_.tensors().size());
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const TensorInfo& info = index_.tensors()[i];
    RuntimeTensor& t = tensors_[i];
    t.id = TensorId(static_cast<std::uint32_t>(i));
    t.size = info.size;
    t.evictable = info.evictable;
    t.producer_op = info.producer_op;
    t.compute_cost = info.producer_op ? graph.ops[*info.producer_op].cost_us : 0;
    t.remaining_uses = static_cast<std::uint32_t>(info.consumer_ops.size());
  }
  op_class_.reserve(graph.ops.size());
  for (const OpSpec& op : graph.ops) {
    op_class_.push_back(classify_cost_class(op, config_.cost_class_threshold));
    trace_compute_ += op.cost_us;
  }
  op_digests_.assign(graph.ops.size(), 0);
}

void Engine::emit(EventKind kind, TensorId t, Bytes addr, Bytes size, double value) const {
  if (!config_.on_event) return;
  Event e;
  e.clock = clock_;
  e.kind = kind;
  if (t.valid()) e.tensor = index_.tensor(t).id;
  e.addr = addr;
  e.size = size;
  e.value = value;
  config_.on_event(e);
}

void Engine::place_params() {
  if (params_placed_) return;
  params_placed_ = true;
  for (std::size_t i = 0; i < index_.num_params(); ++i) {
    RuntimeTensor& p = tensors_[i];
    // With recomputable in-place, parameters live at the two ends of the pool.
    const bool right = config_.recomputable_inplace && (i % 2 == 1);
    auto addr = right ? pool_.alloc_right(p.size, p.id) : pool_.alloc_left(p.size, p.id);
    if (!addr) {
      throw UnsatisfiableAllocation("parameters do not fit in the budget (" + name(p.id) + ")");
    }
    p.addr = *addr;
    p.state = TensorState::kResident;
    p.tag = hash_string(name(p.id));
    memory_[p.addr] = *p.tag;
    emit(EventKind::kAlloc, p.id, p.addr, p.size);
  }
  counters_.peak_resident = std::max(counters_.peak_resident, pool_.bytes_live());
}

void Engine::run() {
  place_params();
  while (next_op_ < graph_.ops.size()) execute_op(next_op_);
}

void Engine::execute_op(std::size_t op_index) {
  if (!params_placed_) place_params();
  if (op_index != next_op_) throw std::logic_error("execute_op: ops must run in trace order");
  run_producer(op_index, index_.op(op_index).outputs, 0, false);
  ++next_op_;
  if (config_.validate_pool) pool_.validate();
}

void Engine::run_producer(std::size_t op_index, const std::vector<TensorId>& targets, std::size_t depth,
                          bool recompute) {
  const OpSpec& spec = graph_.ops[op_index];
  const OpInfo& info = index_.op(op_index);

  for (TensorId in : info.distinct_inputs) acquire(in, depth + 1);

  std::uint64_t digest = hash_string(spec.id);
  for (TensorId in : info.inputs) {
    const RuntimeTensor& t = tensors_[in.value];
    digest = mix(digest, memory_.at(t.addr));
  }
  if (!recompute) op_digests_[op_index] = digest;

  for (TensorId in : info.distinct_inputs) tensors_[in.value].last_access = clock_;

  for (TensorId out : targets) place_output(op_index, out);

  clock_ += spec.cost_us;
  counters_.total_compute += spec.cost_us;
  if (recompute) {
    ++counters_.recompute_ops;
  } else {
    counters_.base_compute += spec.cost_us;
  }

  for (TensorId out : targets) {
    RuntimeTensor& t = tensors_[out.value];
    const std::uint64_t tag = mix(digest, index_.tensor(out).output_slot);
    if (t.tag && *t.tag != tag) ++counters_.tag_mismatches;
    t.tag = tag;
    memory_[t.addr] = tag;
    if (!recompute || config_.reset_staleness_on_remat) t.last_access = clock_;
    if (recompute) emit(EventKind::kRecompute, out, t.addr, t.size, static_cast<double>(spec.cost_us));
  }

  // Copy-on-write of an unevictable tensor: the copy replaces it and the
  // original block goes back to the pool.
  if (info.mutated_input) {
    RuntimeTensor& m = tensors_[info.mutated_input->value];
    if (!m.evictable && m.resident()) {
      const RuntimeTensor& out = tensors_[targets.front().value];
      if (out.addr != m.addr) ++counters_.unevictable_relocations;
      pool_.free_block(m.id);
      emit(EventKind::kFree, m.id, m.addr, m.size);
      m.state = TensorState::kSuperseded;
    }
  }

  if (!recompute) {
    for (TensorId in : info.distinct_inputs) --tensors_[in.value].remaining_uses;
  }
  for (TensorId in : info.distinct_inputs) unpin(in);
  // A recomputed target stays pinned for the caller that asked for it.
  if (!recompute) {
    for (TensorId out : targets) unpin(out);
  }

  if (recompute) check_thrash();
}

void Engine::materialize(TensorId id, std::size_t depth) {
  acquire(id, depth);
  unpin(id);
}

void Engine::acquire(TensorId id, std::size_t depth) {
  RuntimeTensor& t = tensors_[id.value];
  if (t.resident()) {
    pin(id);
    return;
  }
  if (t.state == TensorState::kPending) {
    throw std::logic_error("materialize: tensor '" + name(id) + "' has not been produced yet");
  }
  if (!t.producer_op || t.state == TensorState::kSuperseded) {
    throw UnsatisfiableAllocation("tensor '" + name(id) + "' was overwritten in place and cannot be rebuilt");
  }
  if (depth > config_.max_recompute_depth) {
    throw RecomputeDepthExceeded("rematerialization depth exceeded " + std::to_string(config_.max_recompute_depth));
  }
  counters_.recompute_depth_max = std::max(counters_.recompute_depth_max, depth);
  run_producer(*t.producer_op, {id}, depth, true);
}

void Engine::place_output(std::size_t op_index, TensorId id) {
  RuntimeTensor& t = tensors_[id.value];
  const OpInfo& info = index_.op(op_index);

  if (info.mutated_input && config_.recomputable_inplace) {
    RuntimeTensor& m = tensors_[info.mutated_input->value];
    // Reuse the input's block unless someone else still holds the input.
    if (m.resident() && m.pins == 1) {
      pool_.transfer(m.id, id);
      t.addr = m.addr;
      t.state = TensorState::kResident;
      t.version = m.version + 1;
      m.state = m.producer_op ? TensorState::kEvicted : TensorState::kSuperseded;
      pin(id);
      emit(EventKind::kAlloc, id, t.addr, t.size);
      return;
    }
  }

  t.addr = allocate(op_index, id);
  t.state = TensorState::kResident;
  if (info.mutated_input) t.version = tensors_[info.mutated_input->value].version + 1;
  pin(id);
  counters_.peak_resident = std::max(counters_.peak_resident, pool_.bytes_live());
  emit(EventKind::kAlloc, id, t.addr, t.size);
}

Bytes Engine::allocate(std::size_t op_index, TensorId id) {
  const Bytes size = tensors_[id.value].size;
  const bool right = config_.partitioning && op_class_[op_index] == CostClass::kCheap;
  auto try_alloc = [&]() { return right ? pool_.alloc_right(size, id) : pool_.alloc_left(size, id); };

  if (auto addr = try_alloc()) return *addr;

  ++counters_.pressure_events;
  EvictionOutcome outcome = make_room(size);
  counters_.heuristic_evaluations += outcome.evaluations;
  if (!outcome.feasible) {
    throw UnsatisfiableAllocation("no eviction can free " + std::to_string(size) + " contiguous bytes for '" +
                                  name(id) + "'");
  }
  if (outcome.plan) {
    if (outcome.evaluations > 2 * outcome.items) ++counters_.search_bound_violations;
    const MemoryBlock& block = pool_.block_containing(outcome.plan->addr);
    const bool covers = block.free() && block.addr <= outcome.plan->addr &&
                        block.end() >= outcome.plan->addr + outcome.plan->total_size;
    if (!covers || block.size < size) ++counters_.plan_violations;
  }

  auto addr = try_alloc();
  if (!addr) throw std::logic_error("allocation failed after a successful eviction");

  const double frag = pool_.fragmentation_rate();
  counters_.frag_samples.push_back(FragSample{clock_, frag});
  emit(EventKind::kFragSample, TensorId{}, 0, 0, frag);
  return *addr;
}

EvictionOutcome Engine::make_room(Bytes required) {
  switch (config_.policy) {
    case PolicyKind::kCoop:
      return config_.sliding_window ? coop_select_and_evict(*this, required) : dte_select_and_evict(*this, required);
    case PolicyKind::kDtr:
      return dtr_select_and_evict(*this, required);
    case PolicyKind::kDte:
      return dte_select_and_evict(*this, required);
  }
  throw std::logic_error("unknown policy");
}

void Engine::evict(TensorId id) {
  if (!can_evict(id)) throw std::logic_error("evict: '" + name(id) + "' is not an evictable resident tensor");
  RuntimeTensor& t = tensors_[id.value];
  pool_.free_block(id);
  t.state = TensorState::kEvicted;
  ++counters_.evictions;
  emit(EventKind::kEvict, id, t.addr, t.size);
}

void Engine::release(TensorId id) {
  RuntimeTensor& t = tensors_[id.value];
  pool_.free_block(id);
  t.state = TensorState::kReleased;
  emit(EventKind::kFree, id, t.addr, t.size);
}

void Engine::pin(TensorId id) { ++tensors_[id.value].pins; }

void Engine::unpin(TensorId id) {
  RuntimeTensor& t = tensors_[id.value];
  if (t.pins == 0) throw std::logic_error("unpin: '" + name(id) + "' is not pinned");
  --t.pins;
  if (t.pins == 0 && t.remaining_uses == 0 && t.resident() && t.evictable) release(id);
}

bool Engine::can_evict(TensorId id) const {
  const RuntimeTensor& t = tensors_[id.value];
  return t.resident() && t.evictable && t.pins == 0;
}

Micros Engine::staleness(TensorId id) const {
  const Micros last = tensors_[id.value].last_access;
  return clock_ > last ? clock_ - last : 1;
}

Micros Engine::projected_cost(TensorId id) const {
  const RuntimeTensor& root = tensors_[id.value];
  if (!root.producer_op) return std::numeric_limits<Micros>::max();

  Micros cost = root.compute_cost;
  std::vector<bool> seen(tensors_.size(), false);
  seen[id.value] = true;

  // Evicted ancestors that rebuilding `id` would have to rebuild first.
  std::vector<TensorId> stack(index_.op(*root.producer_op).distinct_inputs);
  while (!stack.empty()) {
    const TensorId a = stack.back();
    stack.pop_back();
    if (seen[a.value]) continue;
    seen[a.value] = true;
    const RuntimeTensor& t = tensors_[a.value];
    const bool rebuildable = t.state == TensorState::kEvicted || t.state == TensorState::kReleased;
    if (!rebuildable || !t.producer_op) continue;
    cost += t.compute_cost;
    for (TensorId in : index_.op(*t.producer_op).distinct_inputs) stack.push_back(in);
  }

  // Evicted descendants whose rebuild would need `id`.
  auto push_consumers = [&](TensorId from) {
    for (std::size_t op : index_.tensor(from).consumer_ops) {
      for (TensorId out : index_.op(op).outputs) stack.push_back(out);
    }
  };
  push_consumers(id);
  while (!stack.empty()) {
    const TensorId d = stack.back();
    stack.pop_back();
    if (seen[d.value]) continue;
    const RuntimeTensor& t = tensors_[d.value];
    if (t.state != TensorState::kEvicted) continue;
    seen[d.value] = true;
    cost += t.compute_cost;
    push_consumers(d);
  }
  return cost;
}

Bytes Engine::resident_bytes() const {
  Bytes total = 0;
  for (const RuntimeTensor& t : tensors_) {
    if (t.resident()) total += t.size;
  }
  return total;
}

void Engine::check_thrash() const {
  const double limit = config_.thrash_factor * static_cast<double>(std::max<Micros>(trace_compute_, 1));
  if (static_cast<double>(counters_.total_compute) > limit) {
    throw SimulationError(RunStatus::kThrashed, "total compute exceeded the thrash limit");
  }
}

SimulationResult Engine::result(RunStatus status, std::string reason) const {
  SimulationResult r;
  r.status = status;
  r.reason = std::move(reason);
  r.budget = pool_.budget();
  r.counters = counters_;
  r.overhead_ratio = counters_.base_compute == 0 ? 1.0
                                                 : static_cast<double>(counters_.total_compute) /
                                                       static_cast<double>(counters_.base_compute);
  double sum = 0.0;
  for (const FragSample& s : counters_.frag_samples) {
    sum += s.fraction;
    r.max_frag = std::max(r.max_frag, s.fraction);
  }
  r.mean_frag = counters_.frag_samples.empty() ? 0.0 : sum / static_cast<double>(counters_.frag_samples.size());
  r.evictions = counters_.evictions;
  r.heuristic_evaluations = counters_.heuristic_evaluations;
  r.evals_per_pressure_event = counters_.pressure_events == 0
                                   ? 0.0
                                   : static_cast<double>(counters_.heuristic_evaluations) /
                                         static_cast<double>(counters_.pressure_events);
  r.peak_resident = counters_.peak_resident;
  r.op_digests = op_digests_;
  return r;
}

SimulationResult run_simulation(const TraceGraph& graph, Bytes budget, const SimConfig& config) {
  if (budget == 0) {
    SimulationResult r;
    r.status = RunStatus::kUnsatisfiable;
    r.reason = "zero budget";
    return r;
  }
  Engine engine(graph, budget, config);
  try {
    engine.run();
  } catch (const SimulationError& e) {
    return engine.result(e.status(), e.what());
  }
  return engine.result(RunStatus::kCompleted);
}

std::function<void(const Event&)> make_event_log_writer(std::ostream& out) {
  return [&out](const Event& e) {
    nlohmann::ordered_json rec;
    rec["clock"] = e.clock;
    rec["event"] = to_string(e.kind);
    rec["tensor_id"] = std::string(e.tensor);
    rec["addr"] = e.addr;
    rec["size"] = e.size;
    rec["value"] = e.value;
    out << rec.dump() << '\n';
  };
}

}  // namespace remat
