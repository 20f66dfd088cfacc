// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rcp/half.hpp"
#include "rcp/layout.hpp"
#include "rcp/ldp.hpp"
#include "rcp/matrix.hpp"

namespace rcp {

/// Unpacked 2-bit weight codes, row-major (H, C).
struct CodeMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> codes;

  std::uint8_t operator()(std::size_t r, std::size_t c) const { return codes[r * cols + c]; }
  std::uint8_t& operator()(std::size_t r, std::size_t c) { return codes[r * cols + c]; }
  bool operator==(const CodeMatrix&) const = default;
};

/// Four 2-bit codes per byte, first code in bits 7-6.
struct PackedWeights {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> bytes;  // rows * cols / 4

  std::size_t bytes_per_row() const noexcept { return cols / 4; }
  const std::uint8_t* row(std::size_t r) const noexcept { return bytes.data() + r * bytes_per_row(); }
  bool operator==(const PackedWeights&) const = default;
};

// Extraction schedule: >>6, >>4 & 3, >>2 & 3, & 3.
constexpr std::uint8_t weight_code(std::uint8_t byte, unsigned slot) noexcept {
  return static_cast<std::uint8_t>((byte >> (6 - 2 * slot)) & 0x03u);
}

/// Two 4-bit two's-complement codes per byte, first element in the high nibble.
struct PackedActivations {
  std::size_t length = 0;
  std::vector<std::int8_t> bytes;  // length / 2

  bool operator==(const PackedActivations&) const = default;
};

// High nibble: arithmetic >> 4. Low nibble: << 4 to move its sign bit to
// the MSB, then arithmetic >> 4.
constexpr std::int8_t activation_hi(std::int8_t byte) noexcept { return static_cast<std::int8_t>(byte >> 4); }
constexpr std::int8_t activation_lo(std::int8_t byte) noexcept {
  return static_cast<std::int8_t>(static_cast<std::int8_t>(static_cast<std::uint8_t>(byte) << 4) >> 4);
}

PackedWeights pack_weight_codes(const CodeMatrix& codes, const GroupLayout& layout);
CodeMatrix unpack_weight_codes(const PackedWeights& packed);

PackedActivations pack_activation_codes(std::span<const std::int8_t> codes);
std::vector<std::int8_t> unpack_activation_codes(const PackedActivations& packed);

/// Per-(row, group) 4-entry dequantization table stored as binary16 bits.
struct DequantLut {
  std::size_t rows = 0;    // H
  std::size_t groups = 0;  // N
  std::vector<std::uint16_t> entries;  // rows * groups * 4

  std::uint16_t bits(std::size_t h, std::size_t g, std::size_t i) const { return entries[(h * groups + g) * 4 + i]; }
  float at(std::size_t h, std::size_t g, std::size_t i) const { return half_to_float(bits(h, g, i)); }
  bool operator==(const DequantLut&) const = default;
};

/// Entry (h, g, i) = lo + h_lwc * w_i of that group's LDP grids, narrowed
/// with round-to-nearest-even. params are indexed h * N + g.
DequantLut build_lut(const MatrixD& w, const GroupLayout& layout, std::span<const LdpParams> params);

struct LdpQuantized {
  CodeMatrix codes;
  DequantLut lut;
  MatrixD w_hat;  // binary64 fake-quant output
};

/// Codes, LUT and fake-quantized weights for a whole (H, C) weight.
LdpQuantized quantize_ldp(const MatrixD& w, const GroupLayout& layout, std::span<const LdpParams> params);

struct PayloadSizes {
  std::size_t weight_bytes = 0;
  std::size_t lut_bytes = 0;
  double bits_per_weight = 0.0;       // (weight + LUT bits) / (H * C)
  double compression_vs_fp16 = 0.0;   // 16 / bits_per_weight
};

PayloadSizes payload_sizes(const GroupLayout& layout);

}  // namespace rcp
