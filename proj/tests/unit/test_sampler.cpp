// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "generators.hpp"
#include "logitfuse/error.hpp"
#include "logitfuse/sampler.hpp"
#include "oracles.hpp"

using namespace logitfuse;

TEST_CASE("softmax examples") {
  auto p = to_probabilities(std::vector<float>{0, 0, 0}, 1.0);
  for (double v : p) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));

  p = to_probabilities(std::vector<float>{static_cast<float>(std::log(2.0)), 0.0f}, 1.0);
  CHECK(p[0] == doctest::Approx(2.0 / 3).epsilon(1e-7));
  CHECK(p[1] == doctest::Approx(1.0 / 3).epsilon(1e-7));

  p = to_probabilities(std::vector<float>{1000.0f, 999.0f}, 1.0);
  const long double e = std::exp(1.0L);
  CHECK(std::isfinite(p[0]));
  CHECK(p[0] == doctest::Approx(static_cast<double>(e / (e + 1))).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(static_cast<double>(1 / (e + 1))).epsilon(1e-15));
}

TEST_CASE("softmax agrees with an extended-precision oracle") {
  gen::Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = gen::uniform_int(rng, 1, 50);
    const auto logits = gen::logits(rng, n, 30.0);
    const double tau = gen::uniform_real(rng, 0.1, 2.0);
    const auto p = to_probabilities(logits, tau);
    const auto q = oracle::softmax(logits, tau);
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::abs(p[i] - static_cast<double>(q[i])) <= 1e-12);
      total += p[i];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("softmax rejects bad input") {
  CHECK_THROWS_AS(to_probabilities(std::vector<float>{1.0f, NAN}, 1.0), Error);
  CHECK_THROWS_AS(to_probabilities(std::vector<float>{1.0f}, 0.0), Error);
  CHECK_THROWS_AS(to_probabilities(std::vector<float>{}, 1.0), Error);
}

TEST_CASE("top-p examples") {
  const std::vector<double> p{0.5, 0.3, 0.2};
  CHECK(top_p_filter(p, 1.0) == p);
  const auto q = top_p_filter(p, 0.7);
  CHECK(q[0] == doctest::Approx(0.625).epsilon(1e-15));
  CHECK(q[1] == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(q[2] == 0.0);
  CHECK(top_p_filter(std::vector<double>{0.25, 0.25, 0.25, 0.25}, 0.5) ==
        std::vector<double>{0.5, 0.5, 0.0, 0.0});
  CHECK_THROWS_AS(top_p_filter(p, 0.0), Error);
  CHECK_THROWS_AS(top_p_filter(p, 1.5), Error);
}

TEST_CASE("top-p matches brute force on random sixteenth grids") {
  // The acceptance binary sweeps the grid exhaustively; this samples it.
  gen::Rng rng(17);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = gen::uniform_int(rng, 1, 8);
    std::vector<int> mass(n, 0);
    for (int unit = 0; unit < 16; ++unit) ++mass[gen::uniform_int(rng, 0, n - 1)];
    std::vector<double> probs(n);
    for (std::size_t i = 0; i < n; ++i) probs[i] = mass[i] / 16.0;
    const double p = static_cast<double>(gen::uniform_int(rng, 1, 16)) / 16.0;
    const auto kept = oracle::smallest_covering_subset(mass, 16.0 * p);
    int kept_mass = 0;
    for (auto i : kept) kept_mass += mass[i];
    std::vector<double> expect(n, 0.0);
    for (auto i : kept) expect[i] = static_cast<double>(mass[i]) / kept_mass;
    CHECK(top_p_filter(probs, p) == expect);
  }
}

TEST_CASE("sample") {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) CHECK(sample(std::vector<double>{1.0, 0.0, 0.0}, rng) == 0);
  CHECK_THROWS_AS(sample(std::vector<double>{0.0, 0.0}, rng), Error);
  CHECK_THROWS_AS(sample(std::vector<double>{-0.5, 1.5}, rng), Error);

  SamplingConfig greedy;
  greedy.greedy = true;
  const auto before = rng.draws();
  const std::vector<float> logits{std::log(0.2f), std::log(0.5f), std::log(0.3f)};
  CHECK(sample_token(logits, greedy, rng) == 1);
  CHECK(rng.draws() == before);
  CHECK(argmax(std::vector<float>{1.0f, 3.0f, 3.0f}) == 1);
}

TEST_CASE("sample frequency") {
  Rng rng(2024);
  int zeros = 0;
  for (int i = 0; i < 10000; ++i) zeros += sample(std::vector<double>{0.5, 0.5}, rng) == 0;
  CHECK(std::abs(zeros / 10000.0 - 0.5) <= 0.02);
}

TEST_CASE("rng stream is mt19937_64 with 53-bit uniforms") {
  Rng rng(42);
  std::mt19937_64 ref(42);
  for (int i = 0; i < 1000; ++i) {
    const double expect = static_cast<double>(ref() >> 11) / 9007199254740992.0;
    CHECK(rng.uniform() == expect);
  }
  CHECK(rng.draws() == 1000);
  CHECK(std::string(Rng::kAlgorithm) == "mt19937_64/u53");
}

TEST_CASE("sample_token is the inverse CDF of the oracle nucleus") {
  gen::Rng rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = gen::uniform_int(rng, 2, 20);
    const auto logits = gen::logits(rng, n, 4.0);
    SamplingConfig cfg;
    cfg.temperature = gen::uniform_real(rng, 0.3, 1.5);
    cfg.top_p = gen::uniform_real(rng, 0.3, 1.0);
    const std::uint64_t seed = rng();
    Rng a(seed);
    const TokenId got = sample_token(logits, cfg, a);

    const auto nucleus = oracle::top_p(oracle::softmax(logits, cfg.temperature), cfg.top_p);
    const long double u = static_cast<long double>(std::mt19937_64(seed)() >> 11) / 9007199254740992.0L;
    long double acc = 0;
    std::size_t expect = n;
    for (std::size_t i = 0; i < n; ++i) {
      acc += nucleus[i];
      if (nucleus[i] > 0 && u < acc) {
        expect = i;
        break;
      }
    }
    // Skip draws within rounding distance of a CDF boundary.
    bool near_edge = false;
    acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += nucleus[i];
      near_edge = near_edge || std::abs(acc - u) < 1e-9L;
    }
    if (!near_edge) CHECK(got == expect);
  }
}

TEST_CASE("greedy pipeline equals argmax of raw logits when top-p covers the mode") {
  gen::Rng rng(29);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = gen::uniform_int(rng, 1, 30);
    const auto logits = gen::logits(rng, n);
    SamplingConfig cfg;
    cfg.greedy = true;
    const auto probs = to_probabilities(logits, cfg.temperature);
    const double max_p = *std::max_element(probs.begin(), probs.end());
    const auto nucleus = top_p_filter(probs, std::min(1.0, max_p));
    Rng r(0);
    CHECK(argmax(nucleus) == sample_token(logits, cfg, r));
    CHECK(argmax(logits) == sample_token(logits, cfg, r));
  }
}

TEST_CASE("sampling determinism") {
  gen::Rng rng(31);
  const auto logits = gen::logits(rng, 40);
  SamplingConfig cfg;
  Rng a(9), b(9);
  for (int i = 0; i < 200; ++i) CHECK(sample_token(logits, cfg, a) == sample_token(logits, cfg, b));
}
