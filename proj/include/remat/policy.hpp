// Copyright 2026 The remat-sim Authors.
// SPDX-License-Identifier: Apache-2.0

// Eviction policies. The contiguous sliding-window search is a template over
// the cost type so tests can run it with exact rationals; the simulator uses
// FixedCost. DTR and DTE are argmin-and-repeat loops.

#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "remat/types.hpp"

namespace remat {

class Engine;

__extension__ typedef unsigned __int128 u128;

// Exact non-negative ratio, compared by cross-multiplication. The simulator
// keeps cost and staleness below 2^40 µs and sizes below 2^44 bytes, so
// every cross product stays below 2^128.
struct Ratio {
  u128 num = 0;
  u128 den = 1;

  friend bool operator==(const Ratio& a, const Ratio& b) { return a.num * b.den == b.num * a.den; }
  friend bool operator<(const Ratio& a, const Ratio& b) { return a.num * b.den < b.num * a.den; }
  friend bool operator>(const Ratio& a, const Ratio& b) { return b < a; }
  friend bool operator<=(const Ratio& a, const Ratio& b) { return !(b < a); }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

// Non-negative fixed point with 32 fractional bits. Sums are exact.
struct FixedCost {
  static constexpr int kFractionBits = 32;
  u128 raw = 0;

  static FixedCost from_ratio(const Ratio& r) { return FixedCost{(r.num << kFractionBits) / r.den}; }

  FixedCost& operator+=(const FixedCost& o) {
    raw += o.raw;
    return *this;
  }
  FixedCost& operator-=(const FixedCost& o) {
    raw -= o.raw;
    return *this;
  }
  friend bool operator==(const FixedCost&, const FixedCost&) = default;
  friend auto operator<=>(const FixedCost& a, const FixedCost& b) { return a.raw <=> b.raw; }
  double value() const { return static_cast<double>(raw) / static_cast<double>(u128{1} << kFractionBits); }
};

// h = c / s. Independent of the tensor's size.
inline Ratio heuristic_coop(Micros projected_cost, Micros staleness) { return Ratio{projected_cost, staleness}; }

// h = c / (m * s), m in bytes.
inline Ratio heuristic_dtr(Micros projected_cost, Bytes size, Micros staleness) {
  return Ratio{projected_cost, u128{size} * staleness};
}

// DTR with the tensor's size widened by the free blocks bordering it.
inline Ratio heuristic_dte(Micros projected_cost, Bytes size, Bytes adjacent_free, Micros staleness) {
  return Ratio{projected_cost, (u128{size} + adjacent_free) * staleness};
}

enum class ItemKind { kTensor, kFree, kBarrier };

template <class Cost>
struct WindowItem {
  ItemKind kind = ItemKind::kFree;
  Bytes size = 0;
  Cost heuristic{};  // zero for free items, ignored for barriers
  TensorId tensor;
  Bytes addr = 0;
};

template <class Cost>
struct EvictionPlan {
  std::size_t begin = 0;  // [begin, end) into the item list
  std::size_t end = 0;
  Bytes addr = 0;
  Bytes total_size = 0;
  Cost total_heuristic{};
  std::vector<TensorId> tensors_to_evict;
};

struct SearchStats {
  std::size_t steps = 0;  // cursor moves, at most 2 * items
};

template <class Cost>
EvictionPlan<Cost> make_plan(std::span<const WindowItem<Cost>> items, std::size_t begin, std::size_t end) {
  EvictionPlan<Cost> plan;
  plan.begin = begin;
  plan.end = end;
  plan.addr = items[begin].addr;
  for (std::size_t i = begin; i < end; ++i) {
    plan.total_size += items[i].size;
    plan.total_heuristic += items[i].heuristic;
    if (items[i].kind == ItemKind::kTensor) plan.tensors_to_evict.push_back(items[i].tensor);
  }
  return plan;
}

// Minimum-cost contiguous barrier-free span with total size >= required.
// Ties go to the leftmost start, then the shorter span. Heuristics must be
// non-negative: for a fixed start the shortest feasible span is then also
// the cheapest, so one pass of the two cursors covers every candidate.
template <class Cost>
std::optional<EvictionPlan<Cost>> sliding_window_search(std::span<const WindowItem<Cost>> items, Bytes required,
                                                        SearchStats* stats = nullptr) {
  if (required == 0) throw std::invalid_argument("sliding_window_search: required must be positive");

  const std::size_t n = items.size();
  std::size_t left = 0;
  std::size_t right = 0;  // window is [left, right)
  Bytes size = 0;
  Cost cost{};
  std::optional<std::size_t> best_begin;
  std::size_t best_end = 0;
  Cost best_cost{};
  std::size_t steps = 0;

  while (left < n) {
    while (right < n && size < required && items[right].kind != ItemKind::kBarrier) {
      size += items[right].size;
      cost += items[right].heuristic;
      ++right;
      ++steps;
    }
    if (size < required) {
      if (right == n) break;
      // Barrier: nothing starting before it can reach the required size.
      left = right + 1;
      right = left;
      size = 0;
      cost = Cost{};
      ++steps;
      continue;
    }
    if (!best_begin || cost < best_cost) {
      best_begin = left;
      best_end = right;
      best_cost = cost;
    }
    size -= items[left].size;
    cost -= items[left].heuristic;
    ++left;
    ++steps;
  }

  if (stats) stats->steps += steps;
  if (!best_begin) return std::nullopt;
  return make_plan(items, *best_begin, best_end);
}

// ---- policies bound to a running engine ------------------------------------

struct EvictionOutcome {
  bool feasible = false;
  std::size_t evaluations = 0;  // heuristic computations
  std::size_t items = 0;        // address-ordered items at the time of the call
  std::size_t evicted = 0;
  std::optional<EvictionPlan<FixedCost>> plan;  // sliding window only
};

// Items for the current pool: free chunks, evictable tensors with their Coop
// heuristic, and barriers for unevictable or pinned tensors.
std::vector<WindowItem<FixedCost>> coop_window_items(const Engine& engine, std::size_t* evaluations = nullptr);

Ratio heuristic_coop(const Engine& engine, TensorId t);
Ratio heuristic_dtr(const Engine& engine, TensorId t);
Ratio heuristic_dte(const Engine& engine, TensorId t);

EvictionOutcome coop_select_and_evict(Engine& engine, Bytes required);
EvictionOutcome dtr_select_and_evict(Engine& engine, Bytes required);
EvictionOutcome dte_select_and_evict(Engine& engine, Bytes required);

}  // namespace remat
