// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "logitfuse/fusion.hpp"
#include "logitfuse/prefs.hpp"

namespace logitfuse::dpo {

using Sequence = std::vector<TokenId>;

// Tabular autoregressive policy over a small vocabulary.
//
// Parameters are one logit row per context; the context of y_t is y_{t-1},
// or the last prompt token for t = 0, or a dedicated start row when the prompt
// is empty. With V tokens there are V + 1 rows of V logits. Entries may be
// -inf to give a token zero probability.
class ToyPolicy {
 public:
  static constexpr std::size_t kMaxVocab = 10;

  explicit ToyPolicy(std::size_t vocab_size);
  ToyPolicy(std::size_t vocab_size, std::vector<double> logits);

  static ToyPolicy random(std::size_t vocab_size, std::uint64_t seed, double scale = 1.0);
  // Rows of probabilities (each summing to 1); stored as log-probabilities.
  static ToyPolicy from_probabilities(const std::vector<std::vector<double>>& rows);

  std::size_t vocab_size() const { return vocab_; }
  std::size_t rows() const { return vocab_ + 1; }
  std::size_t num_params() const { return logits_.size(); }
  std::span<const double> params() const { return logits_; }
  std::span<double> params() { return logits_; }
  std::size_t start_row() const { return vocab_; }

  std::vector<double> row_probabilities(std::size_t row) const;

  // log pi(y | x) = sum_t log pi(y_t | x, y_<t). Throws kNumeric naming the
  // step when a token has zero probability, kArgument on out-of-vocab ids.
  double log_prob(const Sequence& x, const Sequence& y) const;

  // grad += scale * d log pi(y|x) / d params.
  void accumulate_log_prob_gradient(const Sequence& x, const Sequence& y, double scale,
                                    std::span<double> grad) const;

  nlohmann::json to_json() const;
  // {"vocab_size", "logits": [[...]...]} or {"vocab_size", "probabilities": ...}
  // or {"vocab_size", "random_seed", "scale"?}.
  static ToyPolicy from_json(const nlohmann::json& j);

 private:
  std::size_t context_row(const Sequence& x, const Sequence& y, std::size_t t) const;
  void check_ids(const Sequence& s) const;

  std::size_t vocab_;
  std::vector<double> logits_;
};

struct TokenPair {
  Sequence prompt;
  Sequence chosen;
  Sequence rejected;
};

struct DpoConfig {
  double beta = 0.1;
  // Weight of the type-1 dataset; the type-2 dataset gets 1 - lambda.
  double lambda = 0.5;

  void validate() const;
};

// beta * (log pi_theta(y|x) - log pi_ref(y|x))
double implicit_reward(const ToyPolicy& policy, const ToyPolicy& reference, const Sequence& x,
                       const Sequence& y, double beta);

struct PairLogProbs {
  double policy_chosen = 0.0;
  double policy_rejected = 0.0;
  double reference_chosen = 0.0;
  double reference_rejected = 0.0;
};

PairLogProbs pair_log_probs(const ToyPolicy& policy, const ToyPolicy& reference,
                            const TokenPair& pair);

// Minimisation form of the two-dataset objective:
//   -[ lambda * mean_{D1} log sigma(margin) + (1 - lambda) * mean_{D2} log sigma(margin) ]
// with margin = r(chosen) - r(rejected). When one dataset is empty the other
// carries the full weight. kArgument when both are empty.
double dpo_objective(std::span<const PairLogProbs> d1, std::span<const PairLogProbs> d2,
                     const DpoConfig& config);

double dpo_loss(const ToyPolicy& policy, const ToyPolicy& reference,
                std::span<const TokenPair> d1, std::span<const TokenPair> d2,
                const DpoConfig& config);

// Exact gradient of dpo_loss with respect to policy.params().
std::vector<double> dpo_gradient(const ToyPolicy& policy, const ToyPolicy& reference,
                                 std::span<const TokenPair> d1, std::span<const TokenPair> d2,
                                 const DpoConfig& config);

// Central differences of dpo_loss; used for the CLI's self-check report.
std::vector<double> finite_difference_gradient(const ToyPolicy& policy,
                                               const ToyPolicy& reference,
                                               std::span<const TokenPair> d1,
                                               std::span<const TokenPair> d2,
                                               const DpoConfig& config, double h = 1e-5);

struct StepReport {
  double loss_before = 0.0;
  double loss_after = 0.0;
  bool improved = false;  // loss_after <= loss_before
};

// One plain gradient-descent step of size `step_size` on dpo_loss.
StepReport gradient_step_improves(const ToyPolicy& policy, const ToyPolicy& reference,
                                  std::span<const TokenPair> d1, std::span<const TokenPair> d2,
                                  const DpoConfig& config, double step_size);

// Whitespace-separated words looked up in `vocab` (kMalformed on unknown words).
Sequence tokenize_words(const std::string& text, const std::vector<std::string>& vocab);
TokenPair tokenize_pair(const prefs::PreferencePair& pair, const std::vector<std::string>& vocab);

}  // namespace logitfuse::dpo
