// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#include "rcp/gemv.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "rcp/matrix.hpp"
#include "rcp/parallel.hpp"
#include "rcp/rotation.hpp"

namespace rcp {

namespace {

constexpr std::size_t kLanes = 8;
constexpr std::size_t kCacheLine = 64;

inline void prefetch(const void* p) {
#if defined(__GNUC__) || defined(__clang__)
  __builtin_prefetch(p, 0, 3);
#else
  (void)p;
#endif
}

std::vector<float> dequantize_activations(const GemvTask& task) {
  std::vector<float> sx(task.layout.in_channels);
  for (std::size_t i = 0; i < task.x.bytes.size(); ++i) {
    sx[2 * i] = task.scale * static_cast<float>(activation_hi(task.x.bytes[i]));
    sx[2 * i + 1] = task.scale * static_cast<float>(activation_lo(task.x.bytes[i]));
  }
  return sx;
}

// Butterfly over offsets 4, 2, 1, the same pairing a warp shuffle-down uses.
inline float tree_reduce(std::array<float, kLanes> a) {
  for (std::size_t offset = kLanes / 2; offset > 0; offset /= 2)
    for (std::size_t i = 0; i < offset; ++i) a[i] += a[i + offset];
  return a[0];
}

float row_dot(const GemvTask& task, const float* sx, std::size_t h, const std::uint8_t* prefetch_row) {
  const std::size_t groups = task.layout.num_groups();
  const std::size_t bytes_per_group = task.layout.group_size / 4;
  const std::uint8_t* codes = task.w.row(h);
  std::array<float, kLanes> acc{};
  std::size_t c = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t byte0 = g * bytes_per_group;
    if (prefetch_row) {
      for (std::size_t off = 0; off < bytes_per_group; off += kCacheLine) prefetch(prefetch_row + byte0 + off);
    }
    const std::array<float, 4> lut{task.lut.at(h, g, 0), task.lut.at(h, g, 1), task.lut.at(h, g, 2),
                                   task.lut.at(h, g, 3)};
    for (std::size_t j = 0; j < bytes_per_group; ++j, c += 4) {
      const std::uint8_t b = codes[byte0 + j];
      const std::size_t lane = c & (kLanes - 1);
      acc[lane + 0] += sx[c + 0] * lut[weight_code(b, 0)];
      acc[lane + 1] += sx[c + 1] * lut[weight_code(b, 1)];
      acc[lane + 2] += sx[c + 2] * lut[weight_code(b, 2)];
      acc[lane + 3] += sx[c + 3] * lut[weight_code(b, 3)];
    }
  }
  return tree_reduce(acc);
}

}  // namespace

void validate(const GemvTask& task) {
  const GroupLayout& l = task.layout;
  if (l.in_channels % 4 != 0) fail(ErrorKind::kShape, "C must be a multiple of 4");
  if (l.group_size % 4 != 0) fail(ErrorKind::kShape, "group size must be a multiple of 4");
  if (task.x.length != l.in_channels || task.x.bytes.size() * 2 != l.in_channels) {
    fail(ErrorKind::kShape, "activation length " + std::to_string(task.x.length) + " differs from C");
  }
  if (task.w.rows != l.out_channels || task.w.cols != l.in_channels ||
      task.w.bytes.size() != l.out_channels * l.in_channels / 4) {
    fail(ErrorKind::kShape, "packed weights do not match layout");
  }
  if (task.lut.rows != l.out_channels || task.lut.groups != l.num_groups() ||
      task.lut.entries.size() != l.total_groups() * 4) {
    fail(ErrorKind::kShape, "LUT does not match layout");
  }
}

std::vector<float> gemv_ref(const GemvTask& task) {
  validate(task);
  const GroupLayout& l = task.layout;
  std::vector<float> out(l.out_channels, 0.0f);
  for (std::size_t h = 0; h < l.out_channels; ++h) {
    float acc = 0.0f;
    for (std::size_t c = 0; c < l.in_channels; ++c) {
      const std::int8_t xb = task.x.bytes[c / 2];
      const std::int8_t xc = (c % 2 == 0) ? activation_hi(xb) : activation_lo(xb);
      const std::uint8_t wc = weight_code(task.w.bytes[(h * l.in_channels + c) / 4], static_cast<unsigned>(c % 4));
      acc += task.scale * static_cast<float>(xc) * task.lut.at(h, l.group_of(c), wc);
    }
    out[h] = acc;
  }
  return out;
}

std::vector<float> gemv_fast(const GemvTask& task, std::size_t tile_rows, std::size_t threads) {
  validate(task);
  if (tile_rows < 2 || !is_power_of_two(tile_rows)) {
    fail(ErrorKind::kConfig, "tile rows must be a power of two >= 2, got " + std::to_string(tile_rows));
  }
  const std::size_t rows = task.layout.out_channels;
  const std::vector<float> sx = dequantize_activations(task);
  std::vector<float> out(rows, 0.0f);
  const std::size_t tiles = (rows + tile_rows - 1) / tile_rows;
  const std::size_t half = tile_rows / 2;

  parallel_for(
      tiles,
      [&](std::size_t tile) {
        const std::size_t r0 = tile * tile_rows;
        const std::size_t r_end = std::min(rows, r0 + tile_rows);
        // First half: pull the matching second-half row into cache meanwhile.
        for (std::size_t r = r0; r < std::min(r_end, r0 + half); ++r) {
          const std::size_t partner = r + half;
          out[r] = row_dot(task, sx.data(), r, partner < r_end ? task.w.row(partner) : nullptr);
        }
        // Second half: prefetch the next tile's first half.
        for (std::size_t r = r0 + half; r < r_end; ++r) {
          const std::size_t next = r + half;
          out[r] = row_dot(task, sx.data(), r, next < rows ? task.w.row(next) : nullptr);
        }
      },
      threads);
  return out;
}

std::vector<double> dense_oracle(const GemvTask& task) {
  validate(task);
  const GroupLayout& l = task.layout;
  const CodeMatrix codes = unpack_weight_codes(task.w);
  const std::vector<std::int8_t> xc = unpack_activation_codes(task.x);
  MatrixD x(l.in_channels, 1);
  for (std::size_t c = 0; c < l.in_channels; ++c) x(c, 0) = static_cast<double>(task.scale) * xc[c];
  MatrixD w(l.out_channels, l.in_channels);
  for (std::size_t h = 0; h < l.out_channels; ++h)
    for (std::size_t c = 0; c < l.in_channels; ++c) w(h, c) = task.lut.at(h, l.group_of(c), codes(h, c));
  const MatrixD o = matmul_ref(w, x);
  return std::vector<double>(o.data().begin(), o.data().end());
}

double normwise_relative_error(std::span<const float> a, std::span<const double> ref) {
  if (a.size() != ref.size()) fail(ErrorKind::kShape, "length mismatch");
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(static_cast<double>(a[i]) - ref[i]));
    scale = std::max(scale, std::abs(ref[i]));
  }
  if (scale == 0.0) return diff == 0.0 ? 0.0 : INFINITY;
  return diff / scale;
}

double normwise_relative_error(std::span<const float> a, std::span<const float> ref) {
  std::vector<double> r(ref.begin(), ref.end());
  return normwise_relative_error(a, r);
}

}  // namespace rcp
