// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "logitfuse/error.hpp"
#include "logitfuse/fusion.hpp"
#include "logitfuse/provider.hpp"
#include "logitfuse/sampler.hpp"

namespace logitfuse {

enum class DecodeMode { kGuided, kTargetOnly, kBudgetForcing };
enum class StopReason { kEos, kMaxTokens, kAborted };

const char* decode_mode_name(DecodeMode mode);
DecodeMode parse_decode_mode(const std::string& name);
const char* stop_reason_name(StopReason reason);
StopReason parse_stop_reason(const std::string& name);

struct DecodeRequest {
  std::vector<TokenId> prompt_tokens;
  GuidanceConfig guidance;
  SamplingConfig sampling;
  std::size_t max_new_tokens = 8192;
  DecodeMode mode = DecodeMode::kGuided;
  // Emitted in place of a sampled eos in budget-forcing mode.
  std::vector<TokenId> forcing_tokens;
  // Number of eos replacements allowed; unset means unlimited.
  std::optional<std::size_t> forcing_budget;
  bool record_logits = false;

  void validate() const;
};

struct LogitSnapshot {
  LogitVector target;
  LogitVector base;    // empty unless guided
  LogitVector guider;  // empty unless guided
  LogitVector used;    // what the sampler saw
};

struct StepRecord {
  std::size_t index = 0;
  TokenId token = 0;
  bool fused = false;
  bool forced = false;
  std::optional<LogitSnapshot> logits;
};

struct RngMetadata {
  std::string algorithm = Rng::kAlgorithm;
  std::uint64_t base_seed = 0;
  std::uint64_t sample_index = 0;
  std::uint64_t seed = 0;
  std::uint64_t draws = 0;
};

struct DecodeTrace {
  std::string question_id;
  DecodeRequest request;
  RngMetadata rng;
  std::string vocab_hash;
  std::vector<StepRecord> steps;
  StopReason stop_reason = StopReason::kMaxTokens;
  std::size_t generated_count = 0;
  std::size_t forcing_replacements = 0;
  double repeat_rate_4gram = 0.0;
  std::optional<ErrorCode> error_code;
  std::optional<std::string> error;
  std::optional<std::string> text;

  std::vector<TokenId> tokens() const;
  bool ok() const { return !error_code.has_value(); }
};

// Fraction of 4-gram positions whose 4-gram already occurred earlier in the
// sequence; 0 when there are fewer than n tokens. Diagnostic only.
double ngram_repeat_rate(std::span<const TokenId> tokens, std::size_t n = 4);

struct ProviderSet {
  ProviderPtr target;
  ProviderPtr base;
  ProviderPtr guider;
};

struct EngineOptions {
  // Maximum number of decode loops run at once by decode_batch.
  std::size_t parallelism = 1;
  RetryPolicy retry;
  // Used to fill DecodeTrace::text; defaults to the target's own table.
  std::shared_ptr<const VocabTable> vocab_table;
};

using StepObserver = std::function<void(const StepRecord&)>;

struct BatchItem {
  std::size_t request_index = 0;
  std::size_t sample_index = 0;
  DecodeTrace trace;
  bool ok() const { return trace.ok(); }
};

// Runs guided, target-only and budget-forcing generation against a provider
// triple. Construction checks that the three vocabularies agree and throws
// kVocabMismatch otherwise, so no step is ever decoded with mismatched
// vocabularies. The engine is immutable after construction and can be shared
// across threads; every decode owns its own sessions and RNG.
class DecodeEngine {
 public:
  explicit DecodeEngine(ProviderSet providers, EngineOptions options = {});

  const VocabDescriptor& vocab() const { return vocab_; }
  bool has_guidance_models() const { return providers_.base && providers_.guider; }
  const EngineOptions& options() const { return options_; }

  // Provider failures do not throw: they end the trace with
  // StopReason::kAborted, the steps decoded so far and the error cause.
  // Invalid requests throw kArgument.
  DecodeTrace decode(const DecodeRequest& request, const StepObserver& observer = {},
                     std::uint64_t sample_index = 0) const;

  // Same as decode() but insists on budget-forcing mode.
  DecodeTrace decode_budget_forcing(const DecodeRequest& request,
                                    const StepObserver& observer = {}) const;

  // n_samples traces per request; sample i uses seed request.seed + i.
  // Output is ordered by (request, sample) regardless of scheduling.
  std::vector<BatchItem> decode_batch(std::span<const DecodeRequest> requests,
                                      std::size_t n_samples) const;

 private:
  ProviderSet providers_;
  EngineOptions options_;
  VocabDescriptor vocab_;
};

}  // namespace logitfuse
