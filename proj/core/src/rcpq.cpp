// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#include "rcp/rcpq.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

static_assert(std::endian::native == std::endian::little, "RCPQ I/O assumes a little-endian host");

namespace rcp {

namespace {

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes.insert(bytes.end(), p, p + n);
  }
  std::vector<std::uint8_t> bytes;
};

template <typename T>
T get(std::span<const std::uint8_t> bytes, std::size_t offset) {
  if (offset + sizeof(T) > bytes.size()) fail(ErrorKind::kCorruption, "container truncated in header");
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  return v;
}

struct Header {
  GroupLayout layout;
  std::uint8_t flags = 0;
  std::uint32_t section_count = 0;
};

Header read_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "RCPQ", 4) != 0) fail(ErrorKind::kFormat, "bad RCPQ magic");
  if (bytes.size() < kRcpqHeaderBytes) fail(ErrorKind::kCorruption, "container shorter than its header");
  const auto version = get<std::uint16_t>(bytes, 4);
  if (version != kRcpqVersion) fail(ErrorKind::kFormat, "unsupported RCPQ version " + std::to_string(version));
  const auto bits = get<std::uint8_t>(bytes, 6);
  if (bits != 2) fail(ErrorKind::kFormat, "unsupported code width " + std::to_string(bits));
  const auto h = get<std::uint32_t>(bytes, 7);
  const auto c = get<std::uint32_t>(bytes, 11);
  const auto g = get<std::uint32_t>(bytes, 15);
  if (g == 0 || c % g != 0 || c % 4 != 0) fail(ErrorKind::kFormat, "inconsistent RCPQ dimensions");
  Header hdr;
  hdr.layout = GroupLayout(h, c, g);
  hdr.flags = get<std::uint8_t>(bytes, 19);
  hdr.section_count = get<std::uint32_t>(bytes, 20);
  return hdr;
}

std::uint64_t expected_length(std::uint32_t tag, const GroupLayout& l) {
  switch (tag) {
    case kTagWeights: return static_cast<std::uint64_t>(l.out_channels) * l.in_channels / 4;
    case kTagLut: return static_cast<std::uint64_t>(l.total_groups()) * 4 * sizeof(std::uint16_t);
    case kTagParams: return static_cast<std::uint64_t>(l.total_groups()) * 4 * sizeof(float);
    default: fail(ErrorKind::kFormat, "unknown RCPQ section tag " + std::to_string(tag));
  }
}

}  // namespace

std::vector<std::uint8_t> serialize_rcpq(const RcpqModel& model) {
  const GroupLayout& l = model.layout;
  if (model.weights.rows != l.out_channels || model.weights.cols != l.in_channels ||
      model.weights.bytes.size() != expected_length(kTagWeights, l)) {
    fail(ErrorKind::kShape, "packed weights do not match layout");
  }
  if (model.lut.rows != l.out_channels || model.lut.groups != l.num_groups() ||
      model.lut.entries.size() * 2 != expected_length(kTagLut, l)) {
    fail(ErrorKind::kShape, "LUT does not match layout");
  }
  if (model.params && model.params->size() != l.total_groups()) fail(ErrorKind::kShape, "params do not match layout");

  const std::uint32_t count = model.params ? 3 : 2;
  std::vector<RcpqSection> sections;
  std::uint64_t offset = kRcpqHeaderBytes + kRcpqSectionEntryBytes * count;
  for (std::uint32_t tag : {kTagWeights, kTagLut, kTagParams}) {
    if (tag == kTagParams && !model.params) continue;
    const std::uint64_t len = expected_length(tag, l);
    sections.push_back({tag, offset, len});
    offset += len;
  }

  Writer w;
  w.put_bytes("RCPQ", 4);
  w.put<std::uint16_t>(kRcpqVersion);
  w.put<std::uint8_t>(2);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(l.out_channels));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(l.in_channels));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(l.group_size));
  w.put<std::uint8_t>(model.params ? 1 : 0);
  w.put<std::uint32_t>(count);
  for (const auto& s : sections) {
    w.put(s.tag);
    w.put(s.offset);
    w.put(s.length);
  }
  w.put_bytes(model.weights.bytes.data(), model.weights.bytes.size());
  w.put_bytes(model.lut.entries.data(), model.lut.entries.size() * sizeof(std::uint16_t));
  if (model.params) {
    for (const auto& p : *model.params) {
      w.put(static_cast<float>(p.beta));
      w.put(static_cast<float>(p.gamma));
      w.put(static_cast<float>(p.s1));
      w.put(static_cast<float>(p.s2));
    }
  }
  return std::move(w.bytes);
}

std::vector<RcpqSection> rcpq_sections(std::span<const std::uint8_t> bytes) {
  const Header hdr = read_header(bytes);
  if (hdr.section_count < 2 || hdr.section_count > 3) fail(ErrorKind::kFormat, "unexpected section count");
  if ((hdr.flags & 1u) != (hdr.section_count == 3 ? 1u : 0u)) fail(ErrorKind::kFormat, "flags disagree with sections");
  std::vector<RcpqSection> sections;
  for (std::uint32_t i = 0; i < hdr.section_count; ++i) {
    const std::size_t at = kRcpqHeaderBytes + kRcpqSectionEntryBytes * i;
    RcpqSection s{get<std::uint32_t>(bytes, at), get<std::uint64_t>(bytes, at + 4), get<std::uint64_t>(bytes, at + 12)};
    if (s.length != expected_length(s.tag, hdr.layout)) {
      fail(ErrorKind::kCorruption, "section " + std::to_string(i) + " declares " + std::to_string(s.length) +
                                       " bytes, layout implies " + std::to_string(expected_length(s.tag, hdr.layout)));
    }
    if (s.offset > bytes.size() || s.length > bytes.size() - s.offset) {
      fail(ErrorKind::kCorruption, "section " + std::to_string(i) + " runs past the end of the container");
    }
    sections.push_back(s);
  }
  return sections;
}

RcpqModel parse_rcpq(std::span<const std::uint8_t> bytes) {
  const Header hdr = read_header(bytes);
  const auto sections = rcpq_sections(bytes);
  RcpqModel m;
  m.layout = hdr.layout;
  bool have_weights = false, have_lut = false;
  for (const auto& s : sections) {
    const std::uint8_t* p = bytes.data() + s.offset;
    switch (s.tag) {
      case kTagWeights:
        m.weights.rows = hdr.layout.out_channels;
        m.weights.cols = hdr.layout.in_channels;
        m.weights.bytes.assign(p, p + s.length);
        have_weights = true;
        break;
      case kTagLut:
        m.lut.rows = hdr.layout.out_channels;
        m.lut.groups = hdr.layout.num_groups();
        m.lut.entries.resize(s.length / 2);
        std::memcpy(m.lut.entries.data(), p, s.length);
        have_lut = true;
        break;
      case kTagParams: {
        std::vector<LdpParams> params(hdr.layout.total_groups());
        for (std::size_t i = 0; i < params.size(); ++i) {
          float v[4];
          std::memcpy(v, p + 16 * i, 16);
          params[i] = LdpParams{v[0], v[1], v[2], v[3]};
        }
        m.params = std::move(params);
        break;
      }
    }
  }
  if (!have_weights || !have_lut) fail(ErrorKind::kFormat, "container lacks weight or LUT section");
  return m;
}

void write_rcpq(const RcpqModel& model, const std::filesystem::path& path) {
  const auto bytes = serialize_rcpq(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

RcpqModel read_rcpq(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_rcpq(bytes);
}

}  // namespace rcp
