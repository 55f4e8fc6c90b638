// Copyright 2026 The remat-sim Authors.
// SPDX-License-Identifier: Apache-2.0

// Explicit address-space memory pool. The whole budget is reserved up front
// and tiled by live and free blocks; free neighbors are always coalesced.

#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "remat/types.hpp"

namespace remat {

enum class BlockState { kFree, kLive };

struct MemoryBlock {
  Bytes addr = 0;
  Bytes size = 0;
  BlockState state = BlockState::kFree;
  TensorId owner;  // valid iff state == kLive

  Bytes end() const { return addr + size; }
  bool free() const { return state == BlockState::kFree; }
};

// One entry of the address-ordered view; free chunks appear as items too.
struct PoolItem {
  Bytes addr = 0;
  Bytes size = 0;
  bool free = true;
  TensorId owner;
};

class PoolState {
 public:
  explicit PoolState(Bytes budget);

  // First fit from the low end; the owner takes the leftmost `size` bytes.
  std::optional<Bytes> alloc_left(Bytes size, TensorId owner);
  // First fit from the high end; the owner takes the rightmost `size` bytes.
  std::optional<Bytes> alloc_right(Bytes size, TensorId owner);

  void free_block(TensorId owner);
  // Hands a live block to a new owner without moving it (in-place reuse).
  void transfer(TensorId from, TensorId to);

  Bytes largest_free_chunk() const;
  std::vector<PoolItem> item_view() const;
  double fragmentation_rate() const;

  std::optional<Bytes> address_of(TensorId owner) const;
  // Block whose range contains `addr`.
  const MemoryBlock& block_containing(Bytes addr) const;
  // Sum of the free blocks directly left and right of the owner's block.
  Bytes adjacent_free_bytes(TensorId owner) const;

  Bytes budget() const { return budget_; }
  Bytes bytes_live() const { return budget_ - bytes_free_; }
  Bytes bytes_free() const { return bytes_free_; }
  std::size_t block_count() const { return blocks_.size(); }
  std::size_t live_count() const { return owners_.size(); }

  // Throws std::logic_error when the tiling, coalescing, or accounting
  // invariants do not hold.
  void validate() const;

  // `addr size state owner?`, one line per block.
  void dump(std::ostream& out, const std::function<std::string(TensorId)>& name = {}) const;

 private:
  using BlockMap = std::map<Bytes, MemoryBlock>;

  Bytes place(BlockMap::iterator block, Bytes size, TensorId owner, bool from_right);
  void insert_free(Bytes addr, Bytes size);
  void erase_free(BlockMap::iterator it);

  Bytes budget_;
  Bytes bytes_free_;
  BlockMap blocks_;
  std::unordered_map<TensorId, Bytes> owners_;
  std::multiset<Bytes> free_sizes_;
};

}  // namespace remat
