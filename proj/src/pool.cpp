// Copyright 2026 The remat-sim Authors.
// SPDX-License-Identifier: Apache-2.0

#include "remat/pool.hpp"

#include <ostream>
#include <stdexcept>

namespace remat {

PoolState::PoolState(Bytes budget) : budget_(budget), bytes_free_(budget) {
  if (budget == 0) throw std::invalid_argument("pool budget must be positive");
  insert_free(0, budget);
}

void PoolState::insert_free(Bytes addr, Bytes size) {
  blocks_.emplace(addr, MemoryBlock{addr, size, BlockState::kFree, TensorId{}});
  free_sizes_.insert(size);
}

void PoolState::erase_free(BlockMap::iterator it) {
  free_sizes_.erase(free_sizes_.find(it->second.size));
  blocks_.erase(it);
}

Bytes PoolState::place(BlockMap::iterator it, Bytes size, TensorId owner, bool from_right) {
  const MemoryBlock block = it->second;
  erase_free(it);
  const Bytes addr = from_right ? block.end() - size : block.addr;
  if (block.size > size) {
    if (from_right) {
      insert_free(block.addr, block.size - size);
    } else {
      insert_free(block.addr + size, block.size - size);
    }
  }
  blocks_.emplace(addr, MemoryBlock{addr, size, BlockState::kLive, owner});
  owners_.emplace(owner, addr);
  bytes_free_ -= size;
  return addr;
}

std::optional<Bytes> PoolState::alloc_left(Bytes size, TensorId owner) {
  if (size == 0) throw std::logic_error("alloc_left: zero-size request");
  if (owners_.count(owner)) throw std::logic_error("alloc_left: owner already has a block");
  if (largest_free_chunk() < size) return std::nullopt;
  for (auto it = blocks_.begin(); it != blocks_.end(); ++it) {
    if (it->second.free() && it->second.size >= size) return place(it, size, owner, false);
  }
  return std::nullopt;
}

std::optional<Bytes> PoolState::alloc_right(Bytes size, TensorId owner) {
  if (size == 0) throw std::logic_error("alloc_right: zero-size request");
  if (owners_.count(owner)) throw std::logic_error("alloc_right: owner already has a block");
  if (largest_free_chunk() < size) return std::nullopt;
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
    if (it->second.free() && it->second.size >= size) return place(std::prev(it.base()), size, owner, true);
  }
  return std::nullopt;
}

void PoolState::free_block(TensorId owner) {
  auto owned = owners_.find(owner);
  if (owned == owners_.end()) throw std::logic_error("free_block: owner has no live block");
  auto it = blocks_.find(owned->second);
  owners_.erase(owned);

  Bytes addr = it->second.addr;
  Bytes size = it->second.size;
  bytes_free_ += size;

  auto next = std::next(it);
  if (next != blocks_.end() && next->second.free()) {
    size += next->second.size;
    erase_free(next);
  }
  if (it != blocks_.begin()) {
    auto prev = std::prev(it);
    if (prev->second.free()) {
      addr = prev->second.addr;
      size += prev->second.size;
      erase_free(prev);
    }
  }
  blocks_.erase(it);
  insert_free(addr, size);
}

void PoolState::transfer(TensorId from, TensorId to) {
  auto owned = owners_.find(from);
  if (owned == owners_.end()) throw std::logic_error("transfer: source has no live block");
  if (owners_.count(to)) throw std::logic_error("transfer: target already has a block");
  const Bytes addr = owned->second;
  owners_.erase(owned);
  owners_.emplace(to, addr);
  blocks_.at(addr).owner = to;
}

Bytes PoolState::largest_free_chunk() const { return free_sizes_.empty() ? 0 : *free_sizes_.rbegin(); }

std::vector<PoolItem> PoolState::item_view() const {
  std::vector<PoolItem> items;
  items.reserve(blocks_.size());
  for (const auto& [addr, block] : blocks_) {
    items.push_back(PoolItem{addr, block.size, block.free(), block.owner});
  }
  return items;
}

double PoolState::fragmentation_rate() const {
  return static_cast<double>(bytes_free_) / static_cast<double>(budget_);
}

std::optional<Bytes> PoolState::address_of(TensorId owner) const {
  auto it = owners_.find(owner);
  if (it == owners_.end()) return std::nullopt;
  return it->second;
}

const MemoryBlock& PoolState::block_containing(Bytes addr) const {
  if (addr >= budget_) throw std::out_of_range("block_containing: address outside the pool");
  auto it = blocks_.upper_bound(addr);
  return std::prev(it)->second;
}

Bytes PoolState::adjacent_free_bytes(TensorId owner) const {
  auto owned = owners_.find(owner);
  if (owned == owners_.end()) throw std::logic_error("adjacent_free_bytes: owner has no live block");
  auto it = blocks_.find(owned->second);
  Bytes total = 0;
  if (auto next = std::next(it); next != blocks_.end() && next->second.free()) total += next->second.size;
  if (it != blocks_.begin()) {
    if (auto prev = std::prev(it); prev->second.free()) total += prev->second.size;
  }
  return total;
}

void PoolState::validate() const {
  auto fail = [](const std::string& what) { throw std::logic_error("pool invariant violated: " + what); };

  Bytes expected = 0;
  Bytes free_sum = 0;
  bool prev_free = false;
  std::size_t live = 0;
  std::multiset<Bytes> sizes;
  for (const auto& [addr, block] : blocks_) {
    if (addr != block.addr) fail("map key differs from block address");
    if (block.addr != expected) fail("gap or overlap at " + std::to_string(block.addr));
    if (block.size == 0) fail("zero-size block at " + std::to_string(block.addr));
    if (block.free()) {
      if (prev_free) fail("adjacent free blocks at " + std::to_string(block.addr));
      free_sum += block.size;
      sizes.insert(block.size);
    } else {
      ++live;
      auto owned = owners_.find(block.owner);
      if (owned == owners_.end() || owned->second != block.addr) fail("owner index out of sync");
    }
    prev_free = block.free();
    expected = block.end();
  }
  if (expected != budget_) fail("blocks do not cover the budget");
  if (free_sum != bytes_free_) fail("bytes_free out of sync");
  if (live != owners_.size()) fail("owner index has stale entries");
  if (sizes != free_sizes_) fail("free size index out of sync");
}

void PoolState::dump(std::ostream& out, const std::function<std::string(TensorId)>& name) const {
  for (const auto& [addr, block] : blocks_) {
    out << block.addr << ' ' << block.size << ' ' << (block.free() ? "free" : "live");
    if (!block.free()) out << ' ' << (name ? name(block.owner) : std::to_string(block.owner.value));
    out << '\n';
  }
}

}  // namespace remat
