//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "molrl/error.h"

namespace molrl {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::kInvalidGeometry:
    return "invalid_geometry";
  case ErrorKind::kVocabulary:
    return "vocabulary";
  case ErrorKind::kParse:
    return "parse";
  case ErrorKind::kConfig:
    return "config";
  case ErrorKind::kOrdering:
    return "ordering";
  case ErrorKind::kNumeric:
    return "numeric";
  case ErrorKind::kModel:
    return "model";
  case ErrorKind::kDomain:
    return "domain";
  case ErrorKind::kShape:
    return "shape";
  case ErrorKind::kDegenerate:
    return "degenerate";
  case ErrorKind::kUsage:
    return "usage";
  case ErrorKind::kIo:
    return "io";
  }
  return "unknown";
}

}  // namespace molrl
