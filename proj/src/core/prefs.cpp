// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "logitfuse/prefs.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <random>
#include <set>

#include "logitfuse/error.hpp"

namespace logitfuse::prefs {

using nlohmann::json;

const char* origin_name(Origin o) { return o == Origin::kTarget ? "L" : "S"; }

Origin parse_origin(const std::string& s) {
  if (s == "L" || s == "target") return Origin::kTarget;
  if (s == "S" || s == "guider") return Origin::kGuider;
  fail(ErrorCode::kMalformed, "origin must be L or S, got '" + s + "'");
}

const char* pair_type_name(PairType t) {
  switch (t) {
    case PairType::kType1: return "type1";
    case PairType::kType2: return "type2";
    case PairType::kGuiderOnly: return "guider_only";
  }
  return "?";
}

PairType parse_pair_type(const std::string& s) {
  if (s == "type1") return PairType::kType1;
  if (s == "type2") return PairType::kType2;
  if (s == "guider_only") return PairType::kGuiderOnly;
  fail(ErrorCode::kMalformed, "unknown pair type '" + s + "'");
}

namespace {

struct Buckets {
  std::string prompt;
  std::vector<const GradedCompletion*> target_correct, target_wrong, guider_correct,
      guider_wrong;
};

std::map<std::string, Buckets> bucket(std::span<const GradedCompletion> completions,
                                      const BuildOptions& options) {
  std::map<std::string, Buckets> out;
  std::set<std::tuple<std::string, Origin, std::string>> seen;
  for (const auto& c : completions) {
    if (options.dedup && !seen.emplace(c.question_id, c.origin, c.text).second) continue;
    auto& b = out[c.question_id];
    if (b.prompt.empty()) b.prompt = c.prompt;
    if (c.origin == Origin::kTarget) {
      (c.correct ? b.target_correct : b.target_wrong).push_back(&c);
    } else {
      (c.correct ? b.guider_correct : b.guider_wrong).push_back(&c);
    }
  }
  return out;
}

void cross(const std::string& qid, const std::string& prompt,
           const std::vector<const GradedCompletion*>& chosen,
           const std::vector<const GradedCompletion*>& rejected, PairType type, PairSet& set) {
  for (const auto* c : chosen) {
    for (const auto* r : rejected) {
      set.pairs.push_back({qid, prompt, c->text, r->text, type});
    }
  }
}

}  // namespace

PairSet build_pairs(std::span<const GradedCompletion> completions, BuildOptions options) {
  PairSet set;
  for (const auto& [qid, b] : bucket(completions, options)) {
    cross(qid, b.prompt, b.target_correct, b.guider_wrong, PairType::kType1, set);
    cross(qid, b.prompt, b.guider_correct, b.target_wrong, PairType::kType2, set);
    set.counts.type1 += b.target_correct.size() * b.guider_wrong.size();
    set.counts.type2 += b.guider_correct.size() * b.target_wrong.size();
  }
  return set;
}

PairSet build_guider_only_pairs(std::span<const GradedCompletion> completions,
                                BuildOptions options) {
  PairSet set;
  for (const auto& [qid, b] : bucket(completions, options)) {
    cross(qid, b.prompt, b.guider_correct, b.guider_wrong, PairType::kGuiderOnly, set);
    set.counts.guider_only += b.guider_correct.size() * b.guider_wrong.size();
  }
  return set;
}

double compute_lambda(std::size_t n_type1, std::size_t n_type2) {
  if (n_type1 + n_type2 == 0) fail(ErrorCode::kArgument, "lambda needs at least one pair");
  return static_cast<double>(n_type1) / static_cast<double>(n_type1 + n_type2);
}

PairCounts count_pairs(std::span<const PreferencePair> pairs) {
  PairCounts counts;
  for (const auto& p : pairs) {
    switch (p.type) {
      case PairType::kType1: ++counts.type1; break;
      case PairType::kType2: ++counts.type2; break;
      case PairType::kGuiderOnly: ++counts.guider_only; break;
    }
  }
  return counts;
}

std::vector<PreferencePair> subsample(std::span<const PreferencePair> pairs, std::size_t n,
                                      std::uint64_t seed) {
  if (n > pairs.size()) {
    fail(ErrorCode::kArgument, "cannot draw " + std::to_string(n) + " pairs from " +
                                   std::to_string(pairs.size()));
  }
  std::vector<PreferencePair> out;
  out.reserve(n);
  std::mt19937_64 rng(seed);
  std::sample(pairs.begin(), pairs.end(), std::back_inserter(out), n, rng);
  return out;
}

json graded_to_json(const GradedCompletion& c) {
  return {{"question_id", c.question_id},
          {"prompt", c.prompt},
          {"origin", origin_name(c.origin)},
          {"text", c.text},
          {"correct", c.correct}};
}

std::vector<GradedCompletion> load_graded(std::istream& in) {
  std::vector<GradedCompletion> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      GradedCompletion c;
      c.question_id = j.at("question_id").get<std::string>();
      c.prompt = j.value("prompt", "");
      c.origin = parse_origin(j.at("origin").get<std::string>());
      c.text = j.at("text").get<std::string>();
      c.correct = j.at("correct").get<bool>();
      out.push_back(std::move(c));
    } catch (const json::exception& e) {
      fail(ErrorCode::kMalformed, "graded line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<GradedCompletion> load_graded_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open graded completions " + path);
  return load_graded(in);
}

json pair_to_json(const PreferencePair& p) {
  return {{"prompt", p.prompt},
          {"chosen", p.chosen},
          {"rejected", p.rejected},
          {"type", pair_type_name(p.type)},
          {"question_id", p.question_id}};
}

PreferencePair pair_from_json(const json& j) {
  PreferencePair p;
  p.prompt = j.value("prompt", "");
  p.chosen = j.at("chosen").get<std::string>();
  p.rejected = j.at("rejected").get<std::string>();
  p.type = parse_pair_type(j.at("type").get<std::string>());
  p.question_id = j.value("question_id", "");
  return p;
}

std::vector<PreferencePair> load_pairs(std::istream& in) {
  std::vector<PreferencePair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(pair_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      fail(ErrorCode::kMalformed, "pairs line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<PreferencePair> load_pairs_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open pairs file " + path);
  return load_pairs(in);
}

json counts_manifest(const PairCounts& counts) {
  json m = {{"type1", counts.type1},
            {"type2", counts.type2},
            {"guider_only", counts.guider_only},
            {"total", counts.total()},
            {"lambda", nullptr}};
  if (counts.type1 + counts.type2 > 0) m["lambda"] = compute_lambda(counts.type1, counts.type2);
  json proportions = json::object();
  if (counts.total() > 0) {
    const double t = static_cast<double>(counts.total());
    proportions = {{"type1", static_cast<double>(counts.type1) / t},
                   {"type2", static_cast<double>(counts.type2) / t},
                   {"guider_only", static_cast<double>(counts.guider_only) / t}};
  }
  m["proportions"] = std::move(proportions);
  return m;
}

json training_config_manifest(double lambda) {
  return {{"objective", "dpo_two_dataset"},
          {"lambda", lambda},
          {"beta", 0.1},
          {"length_normalization", false},
          {"lora", {{"rank", 64},
                    {"alpha", 128},
                    {"target_modules", {"q_proj", "k_proj", "v_proj", "o_proj"}},
                    {"bias", "none"}}},
          {"optimizer", "adamw"},
          {"learning_rate", 5e-6},
          {"lr_scheduler", "cosine"},
          {"warmup_ratio", 0.1},
          {"batch_size", 32},
          {"epochs", 1},
          {"cutoff_length", 8192}};
}

}  // namespace logitfuse::prefs
