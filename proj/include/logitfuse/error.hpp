// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace logitfuse {

enum class ErrorCode {
  kArgument = 1,
  kDimension,
  kNumeric,
  kSampling,
  kTransport,
  kVocabMismatch,
  kUnknownSession,
  kMalformed,
  kConfig,
  kIo,
  kSaturated,
};

const char* error_code_name(ErrorCode code);

// Single exception type for the library; the code carries the category so the
// C API and HTTP layers can map it to status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace logitfuse
