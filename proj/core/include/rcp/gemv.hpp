// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rcp/layout.hpp"
#include "rcp/pack.hpp"

namespace rcp {

/// One W2A4 matrix-vector product: O = (S * X_q) * W_hat^T where W_hat is
/// decoded from 2-bit codes through the per-group LUT.
struct GemvTask {
  const PackedActivations& x;  // 1 x C/2 bytes
  float scale;                 // activation scale S
  const PackedWeights& w;      // H x C/4 bytes
  const DequantLut& lut;       // H x N*4
  GroupLayout layout;
};

void validate(const GemvTask& task);

/// Scalar reference: one binary32 accumulator per row, ascending c.
std::vector<float> gemv_ref(const GemvTask& task);

/// Tiled fast path. Rows go in tiles of `tile_rows` (a power of two >= 2);
/// each tile is processed as two halves, prefetching the second half's codes
/// while the first is decoded, with 8 partial-sum lanes per row reduced by a
/// fixed butterfly tree. Tiles may run on up to `threads` workers; the result
/// is bit-identical for any thread count.
std::vector<float> gemv_fast(const GemvTask& task, std::size_t tile_rows = 8, std::size_t threads = 1);

/// Full decode into binary64 followed by matmul_ref.
std::vector<double> dense_oracle(const GemvTask& task);

/// max |a - ref| / max |ref| (0 when both are identically zero).
double normwise_relative_error(std::span<const float> a, std::span<const double> ref);
double normwise_relative_error(std::span<const float> a, std::span<const float> ref);

}  // namespace rcp
