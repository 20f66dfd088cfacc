// Copyright 2026 The RCP Authors
// SPDX-License-Identifier: Apache-2.0

#include "rcp/error.hpp"

namespace rcp {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kLayout: return "unsupported layout";
    case ErrorKind::kData: return "data error";
    case ErrorKind::kIo: return "I/O error";
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kUnsupportedSize: return "unsupported size";
    case ErrorKind::kDegenerate: return "degenerate distribution";
    case ErrorKind::kInvalidRange: return "invalid range";
    case ErrorKind::kEncode: return "encode error";
    case ErrorKind::kCorruption: return "corruption error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kZeroToken: return "zero token";
    case ErrorKind::kTraining: return "training failure";
  }
  return "error";
}

}  // namespace rcp
