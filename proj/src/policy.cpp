// Copyright 2026 The remat-sim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "remat/policy.hpp"

#include "remat/engine.hpp"

namespace remat {

Ratio heuristic_coop(const Engine& engine, TensorId t) {
  return heuristic_coop(engine.projected_cost(t), engine.staleness(t));
}

Ratio heuristic_dtr(const Engine& engine, TensorId t) {
  return heuristic_dtr(engine.projected_cost(t), engine.tensor(t).size, engine.staleness(t));
}

Ratio heuristic_dte(const Engine& engine, TensorId t) {
  return heuristic_dte(engine.projected_cost(t), engine.tensor(t).size, engine.pool().adjacent_free_bytes(t),
                       engine.staleness(t));
}

std::vector<WindowItem<FixedCost>> coop_window_items(const Engine& engine, std::size_t* evaluations) {
  std::vector<WindowItem<FixedCost>> items;
  const std::vector<PoolItem> view = engine.pool().item_view();
  items.reserve(view.size());
  for (const PoolItem& p : view) {
    WindowItem<FixedCost> item;
    item.size = p.size;
    item.addr = p.addr;
    if (p.free) {
      item.kind = ItemKind::kFree;
    } else if (engine.can_evict(p.owner)) {
      item.kind = ItemKind::kTensor;
      item.tensor = p.owner;
      item.heuristic = FixedCost::from_ratio(heuristic_coop(engine, p.owner));
      if (evaluations) ++*evaluations;
    } else {
      item.kind = ItemKind::kBarrier;
      item.tensor = p.owner;
    }
    items.push_back(item);
  }
  return items;
}

EvictionOutcome coop_select_and_evict(Engine& engine, Bytes required) {
  EvictionOutcome outcome;
  const std::vector<WindowItem<FixedCost>> items = coop_window_items(engine, &outcome.evaluations);
  outcome.items = items.size();

  auto plan = sliding_window_search<FixedCost>(items, required);
  if (!plan) return outcome;

  for (TensorId t : plan->tensors_to_evict) engine.evict(t);
  outcome.evicted = plan->tensors_to_evict.size();
  outcome.feasible = true;
  outcome.plan = std::move(plan);
  return outcome;
}

namespace {

// Evicts the argmin of `heuristic` over evictable residents until some free
// block can hold `required` bytes. Ties go to the lower address.
template <class Heuristic>
EvictionOutcome argmin_loop(Engine& engine, Bytes required, Heuristic heuristic) {
  EvictionOutcome outcome;
  outcome.items = engine.pool().block_count();
  while (engine.pool().largest_free_chunk() < required) {
    std::optional<TensorId> best;
    Ratio best_h;
    for (const PoolItem& p : engine.pool().item_view()) {
      if (p.free || !engine.can_evict(p.owner)) continue;
      const Ratio h = heuristic(p.owner);
      ++outcome.evaluations;
      if (!best || h < best_h) {
        best = p.owner;
        best_h = h;
      }
    }
    if (!best) return outcome;
    engine.evict(*best);
    ++outcome.evicted;
  }
  outcome.feasible = true;
  return outcome;
}

}  // namespace

EvictionOutcome dtr_select_and_evict(Engine& engine, Bytes required) {
  return argmin_loop(engine, required, [&](TensorId t) { return heuristic_dtr(engine, t); });
}

EvictionOutcome dte_select_and_evict(Engine& engine, Bytes required) {
  return argmin_loop(engine, required, [&](TensorId t) { return heuristic_dte(engine, t); });
}

}  // namespace remat
