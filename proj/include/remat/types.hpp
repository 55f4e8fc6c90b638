// Copyright 2026 The remat-sim Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>

namespace remat {

using Bytes = std::uint64_t;
using Micros = std::uint64_t;

inline constexpr Bytes kMiB = Bytes{1} << 20;

// Dense index of a tensor inside one trace. Also used as the pool block owner.
struct TensorId {
  std::uint32_t value = std::numeric_limits<std::uint32_t>::max();

  constexpr TensorId() = default;
  constexpr explicit TensorId(std::uint32_t v) : value(v) {}

  constexpr bool valid() const { return value != std::numeric_limits<std::uint32_t>::max(); }
  friend constexpr auto operator<=>(TensorId, TensorId) = default;
};

}  // namespace remat

template <>
struct std::hash<remat::TensorId> {
  std::size_t operator()(remat::TensorId id) const noexcept { return std::hash<std::uint32_t>{}(id.value); }
};
