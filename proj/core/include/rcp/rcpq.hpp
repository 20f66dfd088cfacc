// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

// RCPQ container, all fields little-endian:
//
//   offset  size  field
//        0     4  magic "RCPQ"
//        4     2  version (1)
//        6     1  bits per weight code (2)
//        7     4  H (out channels)
//       11     4  C (in channels)
//       15     4  G (group size)
//       19     1  flags (bit 0: raw LDP params present)
//       20     4  section count
//       24  20*k  section table: (tag u32, offset u64, length u64)
//
// Sections, in table order:
//   "WGTS"  packed 2-bit codes, H * C / 4 bytes
//   "LUTS"  binary16 LUT, H * (C / G) * 4 entries
//   "PRMS"  optional; beta, gamma, s1, s2 per group as binary32, group-major

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "rcp/layout.hpp"
#include "rcp/ldp.hpp"
#include "rcp/pack.hpp"

namespace rcp {

inline constexpr std::uint16_t kRcpqVersion = 1;
inline constexpr std::uint32_t kTagWeights = 0x53544757;  // "WGTS"
inline constexpr std::uint32_t kTagLut = 0x5354554C;      // "LUTS"
inline constexpr std::uint32_t kTagParams = 0x534D5250;   // "PRMS"
inline constexpr std::size_t kRcpqHeaderBytes = 24;
inline constexpr std::size_t kRcpqSectionEntryBytes = 20;

struct RcpqSection {
  std::uint32_t tag = 0;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
};

struct RcpqModel {
  GroupLayout layout;
  PackedWeights weights;
  DequantLut lut;
  std::optional<std::vector<LdpParams>> params;  // stored as binary32

  bool operator==(const RcpqModel&) const = default;
};

std::vector<std::uint8_t> serialize_rcpq(const RcpqModel& model);
RcpqModel parse_rcpq(std::span<const std::uint8_t> bytes);
/// Section table of a serialized container, validated against its header.
std::vector<RcpqSection> rcpq_sections(std::span<const std::uint8_t> bytes);

void write_rcpq(const RcpqModel& model, const std::filesystem::path& path);
RcpqModel read_rcpq(const std::filesystem::path& path);

}  // namespace rcp
