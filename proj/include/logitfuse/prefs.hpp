// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace logitfuse::prefs {

enum class Origin { kTarget, kGuider };  // "L" and "S" in the data files

enum class PairType { kType1, kType2, kGuiderOnly };

const char* origin_name(Origin o);
Origin parse_origin(const std::string& s);
const char* pair_type_name(PairType t);
PairType parse_pair_type(const std::string& s);

struct GradedCompletion {
  std::string question_id;
  std::string prompt;
  Origin origin = Origin::kTarget;
  std::string text;
  bool correct = false;
};

// type1: target-correct over guider-incorrect.
// type2: guider-correct over target-incorrect.
// guider_only: guider-correct over guider-incorrect.
struct PreferencePair {
  std::string question_id;
  std::string prompt;
  std::string chosen;
  std::string rejected;
  PairType type = PairType::kType1;

  friend bool operator==(const PreferencePair&, const PreferencePair&) = default;
};

struct PairCounts {
  std::size_t type1 = 0;
  std::size_t type2 = 0;
  std::size_t guider_only = 0;
  std::size_t total() const { return type1 + type2 + guider_only; }
};

struct PairSet {
  std::vector<PreferencePair> pairs;
  PairCounts counts;
};

struct BuildOptions {
  // Drop completions whose (origin, text) repeats within a question.
  bool dedup = false;
};

// Per question (ascending id), the Cartesian products
// {L correct} x {S incorrect} (type1) followed by {S correct} x {L incorrect}
// (type2), each in input order.
PairSet build_pairs(std::span<const GradedCompletion> completions, BuildOptions options = {});

// {S correct} x {S incorrect} per question.
PairSet build_guider_only_pairs(std::span<const GradedCompletion> completions,
                                BuildOptions options = {});

// n_type1 / (n_type1 + n_type2); kArgument when both are zero.
double compute_lambda(std::size_t n_type1, std::size_t n_type2);

PairCounts count_pairs(std::span<const PreferencePair> pairs);

// Uniform random subset of size n that keeps the input order.
std::vector<PreferencePair> subsample(std::span<const PreferencePair> pairs, std::size_t n,
                                      std::uint64_t seed);

std::vector<GradedCompletion> load_graded(std::istream& in);
std::vector<GradedCompletion> load_graded_file(const std::string& path);
nlohmann::json graded_to_json(const GradedCompletion& c);

// {prompt, chosen, rejected, type, question_id}
nlohmann::json pair_to_json(const PreferencePair& p);
PreferencePair pair_from_json(const nlohmann::json& j);
std::vector<PreferencePair> load_pairs(std::istream& in);
std::vector<PreferencePair> load_pairs_file(const std::string& path);

nlohmann::json counts_manifest(const PairCounts& counts);

// Training settings an external DPO trainer should use for the guider.
nlohmann::json training_config_manifest(double lambda);

}  // namespace logitfuse::prefs
