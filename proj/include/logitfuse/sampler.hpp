// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "logitfuse/fusion.hpp"

namespace logitfuse {

struct SamplingConfig {
  double temperature = 0.6;
  double top_p = 0.95;
  std::uint64_t seed = 0;
  bool greedy = false;

  void validate() const;
};

// Seedable generator with a fixed, documented output sequence.
//
// The engine is std::mt19937_64 (its output sequence is pinned by the C++
// standard) and uniforms are formed from the top 53 bits of each 64-bit word,
// so draws are identical on every conforming platform. A decode stream for
// sample i of a batch is seeded with base_seed + i.
class Rng {
 public:
  static constexpr const char* kAlgorithm = "mt19937_64/u53";

  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  // Uniform double in [0, 1).
  double uniform() {
    ++draws_;
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t draws() const { return draws_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
  std::uint64_t draws_ = 0;
};

// Softmax of logits / temperature with max-subtraction. Throws kNumeric on
// non-finite logits, kArgument on temperature <= 0.
std::vector<double> to_probabilities(std::span<const float> logits, double temperature);

// Keeps the smallest set of most probable tokens whose mass reaches p (the
// token that crosses p is kept; equal probabilities are ordered by ascending
// token id), zeroes the rest and renormalizes.
std::vector<double> top_p_filter(std::span<const double> probs, double p);

// Lowest token id among the maxima.
TokenId argmax(std::span<const float> logits);
TokenId argmax(std::span<const double> probs);

// Inverse-CDF draw in token-id order using one uniform from `rng`.
// Throws kSampling when the distribution carries no mass.
TokenId sample(std::span<const double> probs, Rng& rng);

// temperature -> top-p -> sample. Greedy mode consumes no randomness and
// returns argmax of the raw logits.
TokenId sample_token(std::span<const float> logits, const SamplingConfig& config, Rng& rng);

}  // namespace logitfuse
