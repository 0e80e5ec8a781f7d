// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace logitfuse {

using TokenId = std::uint32_t;

// Dense pre-softmax scores over the vocabulary for one decoding step.
using LogitVector = std::vector<float>;

struct GuidanceConfig {
  double alpha = 1.0;
  // Number of generated tokens decoded from the target alone before the
  // guider delta is switched on.
  std::size_t warmup_tokens = 100;

  void validate() const;
};

// target + alpha * (guider - base), elementwise in float32.
// Throws kDimension on length mismatch and kNumeric on non-finite input or
// output.
LogitVector fuse(std::span<const float> target, std::span<const float> guider,
                 std::span<const float> base, float alpha);

// In-place variant used by the decode loop; `out` may alias `target`.
void fuse_into(std::span<const float> target, std::span<const float> guider,
               std::span<const float> base, float alpha, std::span<float> out);

// True when the step that produces token number `generated_count` (0-based)
// uses guidance under `config`.
inline bool guidance_active(const GuidanceConfig& config,
                            std::size_t generated_count) {
  return generated_count >= config.warmup_tokens;
}

// Returns the target verbatim while generated_count < warmup_tokens, the fused
// vector afterwards. Input validation is the same in both regimes.
LogitVector fuse_with_warmup(std::span<const float> target,
                             std::span<const float> guider,
                             std::span<const float> base,
                             const GuidanceConfig& config,
                             std::size_t generated_count);

void require_finite(std::span<const float> values, const char* what);

}  // namespace logitfuse
