// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace rcp {

/// IEEE binary16 bit pattern from binary32, round-to-nearest-even, with
/// overflow to infinity and gradual underflow.
std::uint16_t float_to_half(float f) noexcept;
float half_to_float(std::uint16_t h) noexcept;

inline float round_to_half(float f) noexcept { return half_to_float(float_to_half(f)); }

}  // namespace rcp
