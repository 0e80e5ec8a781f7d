// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstring>
#include <limits>

#include "doctest.h"
#include "generators.hpp"
#include "logitfuse/error.hpp"
#include "logitfuse/fusion.hpp"
#include "oracles.hpp"

using namespace logitfuse;

namespace {

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("fuse adds the guider delta") {
  const LogitVector out = fuse(std::vector<float>{2.0f, 0.0f}, std::vector<float>{0.0f, 1.0f},
                               std::vector<float>{0.0f, 0.0f}, 1.0f);
  CHECK(out == LogitVector{2.0f, 1.0f});
}

TEST_CASE("fuse matches a scalar loop on random vectors") {
  gen::Rng rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    const auto t = gen::logits(rng, 32), g = gen::logits(rng, 32), b = gen::logits(rng, 32);
    const float alpha = trial == 0 ? 0.5f : static_cast<float>(gen::uniform_real(rng, 0, 3));
    CHECK(same_bits(fuse(t, g, b, alpha), oracle::fuse(t, g, b, alpha)));
  }
}

TEST_CASE("fuse is the identity when the delta vanishes or alpha is zero") {
  gen::Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = gen::uniform_int(rng, 1, 64);
    auto t = gen::logits(rng, n);
    if (trial % 10 == 0) t[0] = -0.0f;
    const auto g = gen::logits(rng, n), b = gen::logits(rng, n);
    const float alpha = static_cast<float>(gen::uniform_real(rng, 0, 5));
    CHECK(same_bits(fuse(t, g, g, alpha), t));
    CHECK(same_bits(fuse(t, g, b, 0.0f), t));
  }
}

TEST_CASE("fuse is linear in alpha") {
  // Exact in float when every operand is a small dyadic rational.
  gen::Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<float> t(16), g(16), b(16);
    for (std::size_t i = 0; i < 16; ++i) {
      t[i] = static_cast<float>(gen::uniform_int(rng, 0, 64)) / 8.0f - 4.0f;
      g[i] = static_cast<float>(gen::uniform_int(rng, 0, 64)) / 8.0f - 4.0f;
      b[i] = static_cast<float>(gen::uniform_int(rng, 0, 64)) / 8.0f - 4.0f;
    }
    const auto one = fuse(t, g, b, 1.0f), two = fuse(t, g, b, 2.0f);
    for (std::size_t i = 0; i < 16; ++i) CHECK(two[i] - one[i] == one[i] - t[i]);
  }
}

TEST_CASE("fuse rejects bad input") {
  const std::vector<float> a{1, 2}, b{1, 2, 3};
  CHECK_THROWS_AS(fuse(a, b, a, 1.0f), Error);
  try {
    fuse(a, b, a, 1.0f);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDimension);
  }
  const std::vector<float> bad{1.0f, std::numeric_limits<float>::quiet_NaN()};
  try {
    fuse(a, bad, a, 1.0f);
    FAIL("expected a numeric error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNumeric);
  }
  const std::vector<float> inf{1.0f, std::numeric_limits<float>::infinity()};
  CHECK_THROWS_AS(fuse(inf, a, a, 0.0f), Error);
  CHECK_THROWS_AS(fuse(a, a, a, -1.0f), Error);
  // Finite inputs whose fused value overflows are caught on the way out.
  const std::vector<float> big{3e38f}, neg{-3e38f};
  CHECK_THROWS_AS(fuse(big, big, neg, 1.0f), Error);
}

TEST_CASE("warm-up boundary") {
  const std::vector<float> t{2.0f, 0.0f}, g{0.0f, 1.0f}, b{0.0f, 0.0f};
  GuidanceConfig cfg;
  CHECK(cfg.alpha == 1.0);
  CHECK(cfg.warmup_tokens == 100);
  CHECK(fuse_with_warmup(t, g, b, cfg, 99) == t);
  CHECK(fuse_with_warmup(t, g, b, cfg, 100) == LogitVector{2.0f, 1.0f});
  cfg.warmup_tokens = 0;
  CHECK(fuse_with_warmup(t, g, b, cfg, 0) == LogitVector{2.0f, 1.0f});
}

TEST_CASE("warm-up gating is exact over every step") {
  gen::Rng rng(11);
  for (std::size_t warmup : {0u, 1u, 5u, 100u}) {
    GuidanceConfig cfg{1.25, warmup};
    for (std::size_t step = 0; step < 300; ++step) {
      const auto t = gen::logits(rng, 8), g = gen::logits(rng, 8), b = gen::logits(rng, 8);
      const auto out = fuse_with_warmup(t, g, b, cfg, step);
      const bool active = step >= warmup;
      CHECK(guidance_active(cfg, step) == active);
      CHECK(same_bits(out, active ? oracle::fuse(t, g, b, 1.25f) : t));
    }
  }
}

TEST_CASE("warm-up still validates its inputs") {
  GuidanceConfig cfg;
  const std::vector<float> a{1, 2}, b{1};
  CHECK_THROWS_AS(fuse_with_warmup(a, b, a, cfg, 0), Error);
  cfg.alpha = -0.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
