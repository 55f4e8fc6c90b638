// Copyright 2026 The remat-sim Authors.
// SPDX-License-Identifier: Apache-2.0

// Brute-force reference implementations used to check the fast paths.

#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "remat/engine.hpp"
#include "remat/policy.hpp"

namespace remat::oracle {

template <class Cost>
struct WindowChoice {
  std::size_t begin = 0;
  std::size_t end = 0;
  Cost cost{};
};

// Every barrier-free span [i, j) with enough bytes, scanned by start then
// length, keeping the first strictly cheaper one.
template <class Cost>
std::optional<WindowChoice<Cost>> brute_force_window(std::span<const WindowItem<Cost>> items, Bytes required) {
  std::optional<WindowChoice<Cost>> best;
  for (std::size_t i = 0; i < items.size(); ++i) {
    Bytes size = 0;
    Cost cost{};
    for (std::size_t j = i; j < items.size(); ++j) {
      if (items[j].kind == ItemKind::kBarrier) break;
      size += items[j].size;
      cost += items[j].heuristic;
      if (size >= required && (!best || cost < best->cost)) best = WindowChoice<Cost>{i, j + 1, cost};
    }
  }
  return best;
}

// Projected cost straight from the definition: the tensor's own cost, every
// non-resident rebuildable ancestor reachable through non-resident tensors,
// and every evicted descendant reachable through evicted tensors.
inline Micros projected_cost(const Engine& engine, TensorId root) {
  const TraceIndex& index = engine.trace();
  if (!index.tensor(root).producer_op) return std::numeric_limits<Micros>::max();

  std::set<std::uint32_t> counted{root.value};
  Micros cost = engine.tensor(root).compute_cost;

  std::function<void(TensorId)> up = [&](TensorId t) {
    const TensorInfo& info = index.tensor(t);
    if (!info.producer_op) return;
    for (TensorId in : index.op(*info.producer_op).distinct_inputs) {
      const RuntimeTensor& r = engine.tensor(in);
      const bool gone = r.state == TensorState::kEvicted || r.state == TensorState::kReleased;
      if (!gone || !r.producer_op || counted.count(in.value)) continue;
      counted.insert(in.value);
      cost += r.compute_cost;
      up(in);
    }
  };
  std::function<void(TensorId)> down = [&](TensorId t) {
    for (std::size_t op : index.tensor(t).consumer_ops) {
      for (TensorId out : index.op(op).outputs) {
        const RuntimeTensor& r = engine.tensor(out);
        if (r.state != TensorState::kEvicted || counted.count(out.value)) continue;
        counted.insert(out.value);
        cost += r.compute_cost;
        down(out);
      }
    }
  };
  up(root);
  down(root);
  return cost;
}

// Byte-granular pool: one owner slot per byte, free runs found by scanning.
class NaivePool {
 public:
  explicit NaivePool(Bytes budget) : bytes_(budget, kFree) {}

  std::optional<Bytes> alloc(Bytes size, std::uint32_t owner, bool from_right) {
    std::optional<std::pair<Bytes, Bytes>> pick;  // [begin, end) of the chosen run
    for (const auto& run : free_runs()) {
      if (run.second - run.first < size) continue;
      if (!pick || from_right) pick = run;
      if (!from_right) break;
    }
    if (!pick) return std::nullopt;
    const Bytes addr = from_right ? pick->second - size : pick->first;
    for (Bytes i = addr; i < addr + size; ++i) bytes_[i] = owner;
    return addr;
  }

  void free(std::uint32_t owner) { std::replace(bytes_.begin(), bytes_.end(), owner, kFree); }

  Bytes largest_free_run() const {
    Bytes best = 0;
    for (const auto& run : free_runs()) best = std::max(best, run.second - run.first);
    return best;
  }

  std::vector<std::pair<Bytes, Bytes>> free_runs() const {
    std::vector<std::pair<Bytes, Bytes>> runs;
    for (Bytes i = 0; i < bytes_.size();) {
      if (bytes_[i] != kFree) {
        ++i;
        continue;
      }
      Bytes j = i;
      while (j < bytes_.size() && bytes_[j] == kFree) ++j;
      runs.emplace_back(i, j);
      i = j;
    }
    return runs;
  }

 private:
  static constexpr std::uint32_t kFree = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> bytes_;
};

}  // namespace remat::oracle
