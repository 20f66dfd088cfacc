// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rcp {

enum class ErrorKind {
  kFormat,          // malformed file header or magic/version mismatch
  kLayout,          // unsupported tensor layout (rank, order)
  kData,            // non-finite payload, non-normalized distribution
  kIo,              // open/read/write failure
  kShape,           // dimension mismatch
  kUnsupportedSize, // Hadamard size not a power of two
  kDegenerate,      // zero variance / zero range / zero side scale
  kInvalidRange,    // LWC produced h <= 0
  kEncode,          // code outside the packing alphabet
  kCorruption,      // truncated or inconsistent container payload
  kConfig,          // bad option value
  kZeroToken,       // all-zero activation token
  kTraining,        // loss became non-finite
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, std::string(to_string(kind)) + ": " + what);
}

}  // namespace rcp
