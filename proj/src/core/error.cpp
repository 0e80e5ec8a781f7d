// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "logitfuse/error.hpp"

namespace logitfuse {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kArgument: return "argument";
    case ErrorCode::kDimension: return "dimension";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kSampling: return "sampling";
    case ErrorCode::kTransport: return "transport";
    case ErrorCode::kVocabMismatch: return "vocab_mismatch";
    case ErrorCode::kUnknownSession: return "unknown_session";
    case ErrorCode::kMalformed: return "malformed";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kSaturated: return "saturated";
  }
  return "unknown";
}

}  // namespace logitfuse
