// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "logitfuse/decode.hpp"

namespace logitfuse {

// JSON-lines trace format, schema "logitfuse.trace/1". Each trace is
//   {"type":"header", schema, question_id, request, rng, vocab_hash}
//   {"type":"step", index, token, fused, forced[, logits]}   (one per token)
//   {"type":"end", stop_reason, generated_count, ...}
// Logit snapshots are written as base64 float32 payloads, and only when the
// request asked for them. Several traces may be concatenated in one file.
inline constexpr const char* kTraceSchema = "logitfuse.trace/1";

nlohmann::json request_to_json(const DecodeRequest& request);
DecodeRequest request_from_json(const nlohmann::json& j);

void write_trace_jsonl(std::ostream& out, const DecodeTrace& trace);
std::string trace_to_jsonl(const DecodeTrace& trace);

std::vector<DecodeTrace> read_traces_jsonl(std::istream& in);
std::vector<DecodeTrace> read_traces_file(const std::string& path);

}  // namespace logitfuse
