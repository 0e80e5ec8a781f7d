// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "logitfuse/fusion.hpp"

namespace logitfuse::eval {

inline constexpr const char* kResultsSchema = "logitfuse.eval/1";

struct EvalQuestion {
  std::string id;
  std::string prompt;
  std::string gold_answer;
  std::string source;
  // Needed only for decoding; the engine works in token-id space.
  std::vector<TokenId> prompt_tokens;
};

// JSON-lines {id, prompt, answer, source?, prompt_tokens?}. Rejects duplicate
// ids and empty answers with the offending line number.
std::vector<EvalQuestion> load_questions(std::istream& in);
std::vector<EvalQuestion> load_questions_file(const std::string& path);

// Content of the last \boxed{...} in `text`, or nullopt when there is none or
// its braces never close.
std::optional<std::string> extract_boxed(std::string_view text);

// Exact-match normalisation, applied until it reaches a fixed point:
// drop whitespace and `$`, strip \left / \right, rewrite \dfrac as \frac,
// strip trailing `.` and `\%`.
std::string normalize_answer(std::string_view answer);

bool grade(const std::optional<std::string>& extracted, const std::string& gold);

// 1 iff any of the first k flags is set. Throws kArgument when k exceeds the
// number of samples or is zero.
int pass_at_k_any(const std::vector<bool>& correct, std::size_t k);

// 1 - C(n-c, k) / C(n, k). Uses exact integer binomials while they fit in 64
// bits and the running product form otherwise.
double pass_at_k_unbiased(std::size_t n, std::size_t c, std::size_t k);

enum class PassAtKEstimator { kAnyOf, kUnbiased };
const char* estimator_name(PassAtKEstimator e);

struct GradedCompletion {
  std::string text;
  std::size_t token_count = 0;
  std::optional<std::string> extracted;
  bool correct = false;
};

struct EvalRecord {
  std::string question_id;
  std::string source;
  std::vector<GradedCompletion> completions;
  // pass@1 (mean sample correctness) always; pass@k for the larger k values
  // the sample count supports.
  std::map<std::size_t, double> pass_at;
  double avg_tokens = 0.0;

  std::size_t n_correct() const;
};

struct CompletionInput {
  std::string text;
  std::size_t token_count = 0;
};

// Grades every completion and fills pass_at for each k in `ks` that does not
// exceed the sample count (k = 1 is always included).
EvalRecord evaluate_question(const EvalQuestion& question,
                             std::span<const CompletionInput> completions,
                             std::span<const std::size_t> ks = {},
                             PassAtKEstimator estimator = PassAtKEstimator::kAnyOf);

struct SummaryRow {
  std::string dataset;
  std::size_t questions = 0;
  std::size_t samples_per_question = 0;
  double pass_at_1 = 0.0;
  // Absent when fewer than 8 samples were drawn per question.
  std::optional<double> pass_at_8;
  double avg_tokens = 0.0;
};

// One row per dataset tag, in tag order. pass@1 is the mean correctness over
// every sample of every question; pass@8 the mean of per-question pass@8.
std::vector<SummaryRow> aggregate(std::span<const EvalRecord> records);

std::string format_table_text(std::span<const SummaryRow> rows,
                              PassAtKEstimator estimator = PassAtKEstimator::kAnyOf);
std::string format_table_tsv(std::span<const SummaryRow> rows);
nlohmann::json record_to_json(const EvalRecord& record, PassAtKEstimator estimator);
nlohmann::json row_to_json(const SummaryRow& row);

}  // namespace logitfuse::eval
