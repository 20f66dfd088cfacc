// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#include "rcp/pack.hpp"

#include <algorithm>
#include <string>

namespace rcp {

PackedWeights pack_weight_codes(const CodeMatrix& codes, const GroupLayout& layout) {
  if (codes.rows != layout.out_channels || codes.cols != layout.in_channels) {
    fail(ErrorKind::kShape, "code matrix does not match layout");
  }
  if (codes.cols % 4 != 0) fail(ErrorKind::kShape, "in_channels must be a multiple of 4");
  PackedWeights out;
  out.rows = codes.rows;
  out.cols = codes.cols;
  out.bytes.resize(codes.rows * codes.cols / 4);
  for (std::size_t i = 0; i < out.bytes.size(); ++i) {
    std::uint8_t byte = 0;
    for (unsigned k = 0; k < 4; ++k) {
      const std::uint8_t c = codes.codes[4 * i + k];
      if (c > 3) fail(ErrorKind::kEncode, "weight code " + std::to_string(c) + " at index " + std::to_string(4 * i + k));
      byte = static_cast<std::uint8_t>(byte | (c << (6 - 2 * k)));
    }
    out.bytes[i] = byte;
  }
  return out;
}

CodeMatrix unpack_weight_codes(const PackedWeights& packed) {
  CodeMatrix out{packed.rows, packed.cols, std::vector<std::uint8_t>(packed.rows * packed.cols)};
  for (std::size_t i = 0; i < packed.bytes.size(); ++i)
    for (unsigned k = 0; k < 4; ++k) out.codes[4 * i + k] = weight_code(packed.bytes[i], k);
  return out;
}

PackedActivations pack_activation_codes(std::span<const std::int8_t> codes) {
  if (codes.size() % 2 != 0) fail(ErrorKind::kShape, "activation length must be even");
  PackedActivations out;
  out.length = codes.size();
  out.bytes.resize(codes.size() / 2);
  for (std::size_t i = 0; i < out.bytes.size(); ++i) {
    const std::int8_t hi = codes[2 * i];
    const std::int8_t lo = codes[2 * i + 1];
    if (hi < -8 || hi > 7 || lo < -8 || lo > 7) {
      fail(ErrorKind::kEncode, "activation code out of [-8, 7] at pair " + std::to_string(i));
    }
    const auto byte = static_cast<std::uint8_t>(((static_cast<unsigned>(hi) & 0xFu) << 4) | (static_cast<unsigned>(lo) & 0xFu));
    out.bytes[i] = static_cast<std::int8_t>(byte);
  }
  return out;
}

std::vector<std::int8_t> unpack_activation_codes(const PackedActivations& packed) {
  std::vector<std::int8_t> out(packed.length);
  for (std::size_t i = 0; i < packed.bytes.size(); ++i) {
    out[2 * i] = activation_hi(packed.bytes[i]);
    out[2 * i + 1] = activation_lo(packed.bytes[i]);
  }
  return out;
}

namespace {

void check_params(const MatrixD& w, const GroupLayout& layout, std::span<const LdpParams> params) {
  if (w.rows() != layout.out_channels || w.cols() != layout.in_channels) {
    fail(ErrorKind::kShape, "weight does not match layout");
  }
  if (params.size() != layout.total_groups()) fail(ErrorKind::kShape, "need one LdpParams per group");
}

}  // namespace

DequantLut build_lut(const MatrixD& w, const GroupLayout& layout, std::span<const LdpParams> params) {
  return quantize_ldp(w, layout, params).lut;
}

LdpQuantized quantize_ldp(const MatrixD& w, const GroupLayout& layout, std::span<const LdpParams> params) {
  check_params(w, layout, params);
  const std::size_t n = layout.num_groups();
  const std::size_t gs = layout.group_size;
  LdpQuantized out;
  out.codes = CodeMatrix{w.rows(), w.cols(), std::vector<std::uint8_t>(w.size())};
  out.lut = DequantLut{w.rows(), n, std::vector<std::uint16_t>(w.rows() * n * 4)};
  out.w_hat = MatrixD(w.rows(), w.cols());
  for (std::size_t h = 0; h < w.rows(); ++h) {
    for (std::size_t g = 0; g < n; ++g) {
      std::span<const double> group(w.row(h).data() + g * gs, gs);
      const LdpGrids grids = derive_grids(group, params[h * n + g]);
      for (std::size_t i = 0; i < 4; ++i) {
        const double value = grids.dequant(static_cast<std::uint8_t>(i));
        out.lut.entries[(h * n + g) * 4 + i] = float_to_half(static_cast<float>(value));
      }
      for (std::size_t i = 0; i < gs; ++i) {
        const std::uint8_t c = grids.code(group[i]);
        out.codes(h, g * gs + i) = c;
        out.w_hat(h, g * gs + i) = grids.dequant(c);
      }
    }
  }
  return out;
}

PayloadSizes payload_sizes(const GroupLayout& layout) {
  PayloadSizes s;
  const std::size_t weights = layout.out_channels * layout.in_channels;
  s.weight_bytes = weights / 4;
  s.lut_bytes = layout.out_channels * layout.num_groups() * 4 * sizeof(std::uint16_t);
  s.bits_per_weight = weights ? 8.0 * static_cast<double>(s.weight_bytes + s.lut_bytes) / static_cast<double>(weights) : 0.0;
  s.compression_vs_fp16 = s.bits_per_weight > 0 ? 16.0 / s.bits_per_weight : 0.0;
  return s;
}

}  // namespace rcp
