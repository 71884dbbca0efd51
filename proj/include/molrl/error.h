//
// Project molrl - Copyright 2026 The molrl Authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MOLRL_ERROR_H_
#define MOLRL_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace molrl {

enum class ErrorKind {
  kInvalidGeometry,
  kVocabulary,
  kParse,
  kConfig,
  kOrdering,
  kNumeric,
  kModel,
  kDomain,
  kShape,
  kDegenerate,
  kUsage,
  kIo,
};

std::string_view error_kind_name(ErrorKind kind);

// Every failure raised by the library carries one of the kinds above so the
// CLI can report it as machine-readable JSON.
class Error: public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(what), kind_(kind) { }

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string &what) {
  throw Error(kind, what);
}

}  // namespace molrl

#endif  // MOLRL_ERROR_H_
