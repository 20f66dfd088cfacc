// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rcp/matrix.hpp"

namespace rcp {

// NPY v1.0/v2.0 reader for little-endian '<f4' / '<f8' 2-D C-order arrays.
// '<f8' payloads are narrowed to binary32.
Matrix load_npy(const std::filesystem::path& path);
Matrix parse_npy(std::span<const std::uint8_t> bytes);

// Always writes NPY v1.0 '<f4'.
void save_npy(const Matrix& m, const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_npy(const Matrix& m);

}  // namespace rcp
