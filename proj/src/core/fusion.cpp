// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "logitfuse/fusion.hpp"

#include <cmath>
#include <string>

#include "logitfuse/error.hpp"

namespace logitfuse {

void GuidanceConfig::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    fail(ErrorCode::kArgument, "guidance alpha must be finite and >= 0, got " +
                                   std::to_string(alpha));
  }
}

void require_finite(std::span<const float> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      fail(ErrorCode::kNumeric, std::string(what) + " has non-finite entry at index " +
                                    std::to_string(i));
    }
  }
}

namespace {

void check_operands(std::span<const float> target, std::span<const float> guider,
                    std::span<const float> base, float alpha) {
  if (guider.size() != target.size() || base.size() != target.size()) {
    fail(ErrorCode::kDimension,
         "logit length mismatch: target=" + std::to_string(target.size()) +
             " guider=" + std::to_string(guider.size()) +
             " base=" + std::to_string(base.size()));
  }
  if (!(alpha >= 0.0f) || !std::isfinite(alpha)) {
    fail(ErrorCode::kArgument, "alpha must be finite and >= 0");
  }
  require_finite(target, "target logits");
  require_finite(guider, "guider logits");
  require_finite(base, "base logits");
}

}  // namespace

void fuse_into(std::span<const float> target, std::span<const float> guider,
               std::span<const float> base, float alpha, std::span<float> out) {
  check_operands(target, guider, base, alpha);
  if (out.size() != target.size()) {
    fail(ErrorCode::kDimension, "output length mismatch");
  }
  if (alpha == 0.0f) {
    // Keep the target bit-for-bit (0 * delta could still flip the sign of a zero).
    for (std::size_t i = 0; i < target.size(); ++i) out[i] = target[i];
    return;
  }
  for (std::size_t i = 0; i < target.size(); ++i) {
    // A zero delta leaves the entry untouched, so -0.0 survives too.
    const float delta = guider[i] - base[i];
    out[i] = delta == 0.0f ? target[i] : target[i] + alpha * delta;
  }
  require_finite(out, "fused logits");
}

LogitVector fuse(std::span<const float> target, std::span<const float> guider,
                 std::span<const float> base, float alpha) {
  LogitVector out(target.size());
  fuse_into(target, guider, base, alpha, out);
  return out;
}

LogitVector fuse_with_warmup(std::span<const float> target,
                             std::span<const float> guider,
                             std::span<const float> base,
                             const GuidanceConfig& config,
                             std::size_t generated_count) {
  if (!guidance_active(config, generated_count)) {
    check_operands(target, guider, base, static_cast<float>(config.alpha));
    return LogitVector(target.begin(), target.end());
  }
  return fuse(target, guider, base, static_cast<float>(config.alpha));
}

}  // namespace logitfuse
