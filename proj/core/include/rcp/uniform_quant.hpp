// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rcp/layout.hpp"
#include "rcp/matrix.hpp"

namespace rcp {

/// How the integer zero-point is derived from the group minimum.
enum class ZeroPoint {
  kStepNormalized,   // z = -round(min / s): the grid covers [min, max]
  kRangeNormalized,  // z = -round(min / h): literal reading of the formula
};

struct UniformQuantResult {
  std::vector<std::int32_t> codes;  // in [0, 2^bits - 1]
  double step = 0.0;                // s = h / (2^bits - 1)
  std::int32_t zero_point = 0;      // z
  double range = 0.0;               // h = max - min of the clipped group
  double min = 0.0;
  double max = 0.0;
  int bits = 0;

  std::int32_t max_code() const noexcept { return (1 << bits) - 1; }
  double dequant(std::int32_t code) const noexcept { return (code - zero_point) * step; }
  std::vector<double> dequantized() const;
};

/// Asymmetric integer quantization of one group with round-half-to-even.
/// Values are first clamped to [clip_lo, clip_hi] when given.
UniformQuantResult quant_asym(std::span<const double> group, int bits,
                              std::optional<double> clip_lo = std::nullopt,
                              std::optional<double> clip_hi = std::nullopt,
                              ZeroPoint rule = ZeroPoint::kStepNormalized);

struct ActQuantConfig {
  int bits = 4;
  double clip_ratio = 0.9;
  // When set, an all-zero token yields zero codes with scale 1 instead of an error.
  bool zero_token_fallback = false;
};

/// Per-token symmetric codes in [-2^(b-1), 2^(b-1)-1], row-major like the input.
struct QuantizedActivation {
  std::size_t tokens = 0;
  std::size_t channels = 0;
  std::vector<std::int8_t> codes;
  std::vector<float> scale;  // one per token

  std::int8_t code(std::size_t t, std::size_t c) const { return codes[t * channels + c]; }
};

QuantizedActivation quant_act_per_token(const Matrix& x, const ActQuantConfig& cfg = {});

struct KvQuantConfig {
  int bits = 4;
  std::size_t group_size = 128;
  double clip_ratio = 0.95;
};

/// Per-(token, channel-group) asymmetric quantization, range shrunk by
/// clip_ratio about its midpoint. Results are ordered token-major.
std::vector<UniformQuantResult> quant_kv_group(const Matrix& x, const KvQuantConfig& cfg = {});

}  // namespace rcp
