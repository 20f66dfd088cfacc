// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>

#include "rcp/error.hpp"

namespace rcp {

inline constexpr std::size_t kDefaultGroupSize = 128;

/// Group-wise quantization layout of an (H, C) weight: each output row is
/// split into N = C / G contiguous groups of G input channels.
struct GroupLayout {
  std::size_t out_channels = 0;  // H
  std::size_t in_channels = 0;   // C
  std::size_t group_size = kDefaultGroupSize;

  GroupLayout() = default;
  GroupLayout(std::size_t h, std::size_t c, std::size_t g = kDefaultGroupSize)
      : out_channels(h), in_channels(c), group_size(g) {
    if (g == 0 || c % g != 0) {
      fail(ErrorKind::kConfig, "group size " + std::to_string(g) +
                                   " does not divide in_channels " + std::to_string(c));
    }
  }

  std::size_t num_groups() const noexcept { return in_channels / group_size; }
  std::size_t total_groups() const noexcept { return out_channels * num_groups(); }
  std::size_t group_of(std::size_t col) const noexcept { return col / group_size; }

  bool operator==(const GroupLayout&) const = default;
};

}  // namespace rcp
