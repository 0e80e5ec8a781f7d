// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "logitfuse/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "logitfuse/error.hpp"

namespace logitfuse {

void SamplingConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    fail(ErrorCode::kArgument, "temperature must be > 0");
  }
  if (!(top_p > 0.0 && top_p <= 1.0)) {
    fail(ErrorCode::kArgument, "top_p must lie in (0, 1]");
  }
}

std::vector<double> to_probabilities(std::span<const float> logits, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    fail(ErrorCode::kArgument, "temperature must be > 0");
  }
  if (logits.empty()) fail(ErrorCode::kDimension, "empty logit vector");
  require_finite(logits, "logits");

  const float max_logit = *std::max_element(logits.begin(), logits.end());
  std::vector<double> probs(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp((static_cast<double>(logits[i]) - max_logit) / temperature);
    total += probs[i];
  }
  for (double& p : probs) p /= total;
  return probs;
}

std::vector<double> top_p_filter(std::span<const double> probs, double p) {
  if (!(p > 0.0 && p <= 1.0)) fail(ErrorCode::kArgument, "top_p must lie in (0, 1]");
  if (probs.empty()) fail(ErrorCode::kDimension, "empty probability vector");

  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });

  // 1e-12 absorbs summation noise when p sits exactly on a reachable mass.
  std::vector<double> out(probs.size(), 0.0);
  double mass = 0.0;
  std::size_t kept = 0;
  while (kept < order.size()) {
    mass += probs[order[kept]];
    ++kept;
    if (mass >= p - 1e-12) break;
  }
  if (!(mass > 0.0)) fail(ErrorCode::kSampling, "distribution has no mass");
  for (std::size_t j = 0; j < kept; ++j) {
    out[order[j]] = probs[order[j]] / mass;
  }
  return out;
}

TokenId argmax(std::span<const float> logits) {
  if (logits.empty()) fail(ErrorCode::kDimension, "empty logit vector");
  return static_cast<TokenId>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

TokenId argmax(std::span<const double> probs) {
  if (probs.empty()) fail(ErrorCode::kDimension, "empty probability vector");
  return static_cast<TokenId>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

TokenId sample(std::span<const double> probs, Rng& rng) {
  double total = 0.0;
  std::size_t last_nonzero = probs.size();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!(probs[i] >= 0.0) || !std::isfinite(probs[i])) {
      fail(ErrorCode::kSampling, "invalid probability at index " + std::to_string(i));
    }
    total += probs[i];
    if (probs[i] > 0.0) last_nonzero = i;
  }
  if (last_nonzero == probs.size()) fail(ErrorCode::kSampling, "distribution has no mass");

  const double u = rng.uniform() * total;
  double cumulative = 0.0;
  for (std::size_t i = 0; i <= last_nonzero; ++i) {
    cumulative += probs[i];
    if (u < cumulative && probs[i] > 0.0) return static_cast<TokenId>(i);
  }
  return static_cast<TokenId>(last_nonzero);
}

TokenId sample_token(std::span<const float> logits, const SamplingConfig& config, Rng& rng) {
  if (config.greedy) {
    require_finite(logits, "logits");
    return argmax(logits);
  }
  const auto probs = to_probabilities(logits, config.temperature);
  const auto nucleus = top_p_filter(probs, config.top_p);
  return sample(nucleus, rng);
}

}  // namespace logitfuse
