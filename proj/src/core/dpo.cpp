// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "logitfuse/dpo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "logitfuse/error.hpp"

namespace logitfuse::dpo {

using nlohmann::json;

namespace {

double log_sigmoid(double m) {
  return m >= 0.0 ? -std::log1p(std::exp(-m)) : m - std::log1p(std::exp(m));
}

// sigma(-m), the derivative of -log sigma(m) up to sign.
double sigmoid_neg(double m) {
  if (m >= 0.0) {
    const double e = std::exp(-m);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(m));
}

}  // namespace

ToyPolicy::ToyPolicy(std::size_t vocab_size) : ToyPolicy(vocab_size, {}) {}

ToyPolicy::ToyPolicy(std::size_t vocab_size, std::vector<double> logits)
    : vocab_(vocab_size), logits_(std::move(logits)) {
  if (vocab_ == 0 || vocab_ > kMaxVocab) {
    fail(ErrorCode::kArgument, "toy policy vocabulary must have 1.." +
                                   std::to_string(kMaxVocab) + " tokens");
  }
  if (logits_.empty()) logits_.assign(rows() * vocab_, 0.0);
  if (logits_.size() != rows() * vocab_) {
    fail(ErrorCode::kDimension, "toy policy needs (V+1)*V logits");
  }
  for (std::size_t r = 0; r < rows(); ++r) {
    bool any_finite = false;
    for (std::size_t v = 0; v < vocab_; ++v) {
      const double x = logits_[r * vocab_ + v];
      if (std::isnan(x) || x == std::numeric_limits<double>::infinity()) {
        fail(ErrorCode::kNumeric, "toy policy logits must be finite or -inf");
      }
      any_finite = any_finite || std::isfinite(x);
    }
    if (!any_finite) fail(ErrorCode::kNumeric, "toy policy row with no support");
  }
}

ToyPolicy ToyPolicy::random(std::size_t vocab_size, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> logits((vocab_size + 1) * vocab_size);
  for (double& x : logits) x = normal(rng);
  return ToyPolicy(vocab_size, std::move(logits));
}

ToyPolicy ToyPolicy::from_probabilities(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) fail(ErrorCode::kArgument, "no probability rows");
  const std::size_t v = rows.front().size();
  if (rows.size() != v + 1) fail(ErrorCode::kDimension, "need V + 1 probability rows");
  std::vector<double> logits;
  for (const auto& row : rows) {
    if (row.size() != v) fail(ErrorCode::kDimension, "ragged probability rows");
    double total = 0.0;
    for (double p : row) {
      if (!(p >= 0.0)) fail(ErrorCode::kNumeric, "negative probability");
      total += p;
      logits.push_back(p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity());
    }
    if (std::abs(total - 1.0) > 1e-9) fail(ErrorCode::kNumeric, "probability row must sum to 1");
  }
  return ToyPolicy(v, std::move(logits));
}

std::vector<double> ToyPolicy::row_probabilities(std::size_t row) const {
  const double* r = logits_.data() + row * vocab_;
  const double m = *std::max_element(r, r + vocab_);
  std::vector<double> p(vocab_);
  double total = 0.0;
  for (std::size_t v = 0; v < vocab_; ++v) {
    p[v] = std::exp(r[v] - m);
    total += p[v];
  }
  for (double& x : p) x /= total;
  return p;
}

void ToyPolicy::check_ids(const Sequence& s) const {
  for (TokenId t : s) {
    if (t >= vocab_) fail(ErrorCode::kArgument, "token id outside toy vocabulary");
  }
}

std::size_t ToyPolicy::context_row(const Sequence& x, const Sequence& y, std::size_t t) const {
  if (t > 0) return y[t - 1];
  if (!x.empty()) return x.back();
  return start_row();
}

double ToyPolicy::log_prob(const Sequence& x, const Sequence& y) const {
  check_ids(x);
  check_ids(y);
  double total = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    const std::size_t row = context_row(x, y, t);
    const double* r = logits_.data() + row * vocab_;
    const double m = *std::max_element(r, r + vocab_);
    double z = 0.0;
    for (std::size_t v = 0; v < vocab_; ++v) z += std::exp(r[v] - m);
    const double lp = r[y[t]] - m - std::log(z);
    if (!std::isfinite(lp)) {
      fail(ErrorCode::kNumeric, "token " + std::to_string(y[t]) + " has zero probability at step " +
                                    std::to_string(t));
    }
    total += lp;
  }
  return total;
}

void ToyPolicy::accumulate_log_prob_gradient(const Sequence& x, const Sequence& y, double scale,
                                             std::span<double> grad) const {
  if (grad.size() != logits_.size()) fail(ErrorCode::kDimension, "gradient buffer size");
  check_ids(x);
  check_ids(y);
  for (std::size_t t = 0; t < y.size(); ++t) {
    const std::size_t row = context_row(x, y, t);
    const auto p = row_probabilities(row);
    double* g = grad.data() + row * vocab_;
    for (std::size_t v = 0; v < vocab_; ++v) g[v] -= scale * p[v];
    g[y[t]] += scale;
  }
}

json ToyPolicy::to_json() const {
  json rows_json = json::array();
  for (std::size_t r = 0; r < rows(); ++r) {
    json row = json::array();
    for (std::size_t v = 0; v < vocab_; ++v) {
      const double x = logits_[r * vocab_ + v];
      row.push_back(std::isfinite(x) ? json(x) : json(nullptr));
    }
    rows_json.push_back(std::move(row));
  }
  return {{"vocab_size", vocab_}, {"logits", std::move(rows_json)}};
}

ToyPolicy ToyPolicy::from_json(const json& j) {
  try {
    const auto v = j.at("vocab_size").get<std::size_t>();
    if (j.contains("logits")) {
      std::vector<double> logits;
      for (const auto& row : j["logits"]) {
        for (const auto& x : row) {
          logits.push_back(x.is_null() ? -std::numeric_limits<double>::infinity()
                                       : x.get<double>());
        }
      }
      return ToyPolicy(v, std::move(logits));
    }
    if (j.contains("probabilities")) {
      auto rows = j["probabilities"].get<std::vector<std::vector<double>>>();
      auto policy = from_probabilities(rows);
      if (policy.vocab_size() != v) fail(ErrorCode::kDimension, "vocab_size disagrees with rows");
      return policy;
    }
    if (j.contains("random_seed")) {
      return random(v, j["random_seed"].get<std::uint64_t>(), j.value("scale", 1.0));
    }
    return ToyPolicy(v);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("invalid toy policy: ") + e.what());
  }
}

void DpoConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) fail(ErrorCode::kArgument, "beta must be > 0");
  if (!(lambda >= 0.0 && lambda <= 1.0)) fail(ErrorCode::kArgument, "lambda must lie in [0, 1]");
}

double implicit_reward(const ToyPolicy& policy, const ToyPolicy& reference, const Sequence& x,
                       const Sequence& y, double beta) {
  return beta * (policy.log_prob(x, y) - reference.log_prob(x, y));
}

PairLogProbs pair_log_probs(const ToyPolicy& policy, const ToyPolicy& reference,
                            const TokenPair& pair) {
  return {policy.log_prob(pair.prompt, pair.chosen), policy.log_prob(pair.prompt, pair.rejected),
          reference.log_prob(pair.prompt, pair.chosen),
          reference.log_prob(pair.prompt, pair.rejected)};
}

namespace {

struct Weights {
  double d1 = 0.0;
  double d2 = 0.0;
};

Weights dataset_weights(std::size_t n1, std::size_t n2, const DpoConfig& config) {
  config.validate();
  if (n1 == 0 && n2 == 0) fail(ErrorCode::kArgument, "DPO needs at least one pair");
  if (n2 == 0) return {1.0, 0.0};
  if (n1 == 0) return {0.0, 1.0};
  return {config.lambda, 1.0 - config.lambda};
}

double margin(const PairLogProbs& lp, double beta) {
  return beta * (lp.policy_chosen - lp.reference_chosen) -
         beta * (lp.policy_rejected - lp.reference_rejected);
}

double mean_log_sigmoid(std::span<const PairLogProbs> d, double beta) {
  if (d.empty()) return 0.0;
  double total = 0.0;
  for (const auto& lp : d) total += log_sigmoid(margin(lp, beta));
  return total / static_cast<double>(d.size());
}

std::vector<PairLogProbs> log_probs_for(const ToyPolicy& policy, const ToyPolicy& reference,
                                        std::span<const TokenPair> pairs) {
  std::vector<PairLogProbs> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(pair_log_probs(policy, reference, p));
  return out;
}

}  // namespace

double dpo_objective(std::span<const PairLogProbs> d1, std::span<const PairLogProbs> d2,
                     const DpoConfig& config) {
  const auto w = dataset_weights(d1.size(), d2.size(), config);
  double objective = 0.0;
  if (w.d1 != 0.0) objective += w.d1 * mean_log_sigmoid(d1, config.beta);
  if (w.d2 != 0.0) objective += w.d2 * mean_log_sigmoid(d2, config.beta);
  return -objective;
}

double dpo_loss(const ToyPolicy& policy, const ToyPolicy& reference,
                std::span<const TokenPair> d1, std::span<const TokenPair> d2,
                const DpoConfig& config) {
  return dpo_objective(log_probs_for(policy, reference, d1),
                       log_probs_for(policy, reference, d2), config);
}

std::vector<double> dpo_gradient(const ToyPolicy& policy, const ToyPolicy& reference,
                                 std::span<const TokenPair> d1, std::span<const TokenPair> d2,
                                 const DpoConfig& config) {
  const auto w = dataset_weights(d1.size(), d2.size(), config);
  std::vector<double> grad(policy.num_params(), 0.0);
  auto accumulate = [&](std::span<const TokenPair> pairs, double weight) {
    if (weight == 0.0 || pairs.empty()) return;
    const double per_pair = weight / static_cast<double>(pairs.size());
    for (const auto& pair : pairs) {
      const double m = margin(pair_log_probs(policy, reference, pair), config.beta);
      // d/dtheta of -log sigma(m) = -sigma(-m) * dm/dtheta
      const double coeff = -per_pair * sigmoid_neg(m) * config.beta;
      policy.accumulate_log_prob_gradient(pair.prompt, pair.chosen, coeff, grad);
      policy.accumulate_log_prob_gradient(pair.prompt, pair.rejected, -coeff, grad);
    }
  };
  accumulate(d1, w.d1);
  accumulate(d2, w.d2);
  return grad;
}

std::vector<double> finite_difference_gradient(const ToyPolicy& policy,
                                               const ToyPolicy& reference,
                                               std::span<const TokenPair> d1,
                                               std::span<const TokenPair> d2,
                                               const DpoConfig& config, double h) {
  ToyPolicy probe = policy;
  std::vector<double> grad(policy.num_params(), 0.0);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double x = probe.params()[i];
    if (!std::isfinite(x)) continue;
    probe.params()[i] = x + h;
    const double up = dpo_loss(probe, reference, d1, d2, config);
    probe.params()[i] = x - h;
    const double down = dpo_loss(probe, reference, d1, d2, config);
    probe.params()[i] = x;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

StepReport gradient_step_improves(const ToyPolicy& policy, const ToyPolicy& reference,
                                  std::span<const TokenPair> d1, std::span<const TokenPair> d2,
                                  const DpoConfig& config, double step_size) {
  if (!(step_size >= 0.0)) fail(ErrorCode::kArgument, "step size must be >= 0");
  StepReport report;
  report.loss_before = dpo_loss(policy, reference, d1, d2, config);
  const auto grad = dpo_gradient(policy, reference, d1, d2, config);
  ToyPolicy next = policy;
  for (std::size_t i = 0; i < grad.size(); ++i) next.params()[i] -= step_size * grad[i];
  report.loss_after = dpo_loss(next, reference, d1, d2, config);
  report.improved = report.loss_after <= report.loss_before;
  return report;
}

Sequence tokenize_words(const std::string& text, const std::vector<std::string>& vocab) {
  Sequence out;
  std::istringstream in(text);
  std::string word;
  while (in >> word) {
    const auto it = std::find(vocab.begin(), vocab.end(), word);
    if (it == vocab.end()) fail(ErrorCode::kMalformed, "word '" + word + "' not in toy vocabulary");
    out.push_back(static_cast<TokenId>(it - vocab.begin()));
  }
  return out;
}

TokenPair tokenize_pair(const prefs::PreferencePair& pair, const std::vector<std::string>& vocab) {
  return {tokenize_words(pair.prompt, vocab), tokenize_words(pair.chosen, vocab),
          tokenize_words(pair.rejected, vocab)};
}

}  // namespace logitfuse::dpo
