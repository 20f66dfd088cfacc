// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#include "rcp/npy.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <string_view>
#include <bit>

static_assert(std::endian::native == std::endian::little, "NPY I/O assumes a little-endian host");

namespace rcp {

namespace {

constexpr std::string_view kMagic = "\x93NUMPY";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\n')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\n' || s.back() == ',')) s.remove_suffix(1);
  return s;
}

// Returns the raw text following "'key':" up to the value end. Values are
// either quoted strings, booleans, or a parenthesized tuple.
std::optional<std::string_view> dict_value(std::string_view dict, std::string_view key) {
  const std::string quoted = "'" + std::string(key) + "'";
  const auto pos = dict.find(quoted);
  if (pos == std::string_view::npos) return std::nullopt;
  auto rest = dict.substr(pos + quoted.size());
  const auto colon = rest.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  rest = trim(rest.substr(colon + 1));
  if (rest.empty()) return std::nullopt;
  if (rest.front() == '\'') {
    const auto end = rest.find('\'', 1);
    if (end == std::string_view::npos) return std::nullopt;
    return rest.substr(1, end - 1);
  }
  if (rest.front() == '(') {
    const auto end = rest.find(')');
    if (end == std::string_view::npos) return std::nullopt;
    return rest.substr(1, end - 1);
  }
  const auto end = rest.find_first_of(",}");
  return trim(rest.substr(0, end));
}

std::vector<std::size_t> parse_shape(std::string_view tuple) {
  std::vector<std::size_t> dims;
  while (true) {
    tuple = trim(tuple);
    if (tuple.empty()) break;
    const auto comma = tuple.find(',');
    const auto token = trim(tuple.substr(0, comma));
    if (!token.empty()) {
      std::size_t value = 0;
      for (char ch : token) {
        if (ch < '0' || ch > '9') fail(ErrorKind::kFormat, "bad shape entry in NPY header");
        value = value * 10 + static_cast<std::size_t>(ch - '0');
      }
      dims.push_back(value);
    }
    if (comma == std::string_view::npos) break;
    tuple.remove_prefix(comma + 1);
  }
  return dims;
}

template <typename T>
T read_le(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

}  // namespace

Matrix parse_npy(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 10 ||
      std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    fail(ErrorKind::kFormat, "missing NPY magic");
  }
  const std::uint8_t major = bytes[6];
  std::size_t header_len = 0;
  std::size_t offset = 0;
  if (major == 1) {
    header_len = read_le<std::uint16_t>(bytes.data() + 8);
    offset = 10;
  } else if (major == 2) {
    if (bytes.size() < 12) fail(ErrorKind::kFormat, "truncated NPY v2 preamble");
    header_len = read_le<std::uint32_t>(bytes.data() + 8);
    offset = 12;
  } else {
    fail(ErrorKind::kFormat, "unsupported NPY version " + std::to_string(major));
  }
  if (offset + header_len > bytes.size()) fail(ErrorKind::kFormat, "truncated NPY header");
  const std::string_view header(reinterpret_cast<const char*>(bytes.data() + offset), header_len);
  if (header.find('{') == std::string_view::npos) fail(ErrorKind::kFormat, "NPY header is not a dict");

  const auto descr = dict_value(header, "descr");
  const auto fortran = dict_value(header, "fortran_order");
  const auto shape_text = dict_value(header, "shape");
  if (!descr || !fortran || !shape_text) fail(ErrorKind::kFormat, "NPY header missing required keys");

  std::size_t elem_size = 0;
  if (*descr == "<f4") {
    elem_size = 4;
  } else if (*descr == "<f8") {
    elem_size = 8;
  } else {
    fail(ErrorKind::kFormat, "unsupported NPY dtype '" + std::string(*descr) + "'");
  }
  if (*fortran == "True") fail(ErrorKind::kLayout, "Fortran-order arrays are not supported");
  if (*fortran != "False") fail(ErrorKind::kFormat, "bad fortran_order value");

  const auto dims = parse_shape(*shape_text);
  if (dims.size() != 2) {
    fail(ErrorKind::kLayout, "expected a 2-D array, got rank " + std::to_string(dims.size()));
  }
  const std::size_t rows = dims[0];
  const std::size_t cols = dims[1];
  const std::size_t payload_offset = offset + header_len;
  const std::size_t need = rows * cols * elem_size;
  if (bytes.size() - payload_offset < need) fail(ErrorKind::kFormat, "NPY payload shorter than shape");

  std::vector<float> data(rows * cols);
  const std::uint8_t* p = bytes.data() + payload_offset;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (elem_size == 4) {
      data[i] = read_le<float>(p + 4 * i);
    } else {
      const double v = read_le<double>(p + 8 * i);
      if (!std::isfinite(v)) fail(ErrorKind::kData, "non-finite element at index " + std::to_string(i));
      data[i] = static_cast<float>(v);
    }
    if (!std::isfinite(data[i])) fail(ErrorKind::kData, "non-finite element at index " + std::to_string(i));
  }
  return Matrix(rows, cols, std::move(data));
}

Matrix load_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorKind::kIo, "read failed for " + path.string());
  return parse_npy(bytes);
}

std::vector<std::uint8_t> serialize_npy(const Matrix& m) {
  std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': (" +
                       std::to_string(m.rows()) + ", " + std::to_string(m.cols()) + "), }";
  // Preamble (10 bytes) + header + '\n' padded to a multiple of 64.
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');

  std::vector<std::uint8_t> out;
  out.reserve(10 + header.size() + m.size() * 4);
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  out.push_back(1);
  out.push_back(0);
  const auto len = static_cast<std::uint16_t>(header.size());
  out.push_back(static_cast<std::uint8_t>(len & 0xFF));
  out.push_back(static_cast<std::uint8_t>(len >> 8));
  out.insert(out.end(), header.begin(), header.end());
  const auto* raw = reinterpret_cast<const std::uint8_t*>(m.data().data());
  out.insert(out.end(), raw, raw + m.size() * sizeof(float));
  return out;
}

void save_npy(const Matrix& m, const std::filesystem::path& path) {
  const auto bytes = serialize_npy(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

}  // namespace rcp
