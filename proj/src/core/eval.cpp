// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "logitfuse/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "logitfuse/error.hpp"

namespace logitfuse::eval {

using nlohmann::json;

std::vector<EvalQuestion> load_questions(std::istream& in) {
  std::vector<EvalQuestion> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    const auto where = "dataset line " + std::to_string(line_no) + ": ";
    EvalQuestion q;
    try {
      const auto j = json::parse(line);
      q.id = j.at("id").is_string() ? j["id"].get<std::string>() : j["id"].dump();
      q.prompt = j.value("prompt", "");
      q.gold_answer = j.at("answer").is_string() ? j["answer"].get<std::string>()
                                                 : j["answer"].dump();
      q.source = j.value("source", "default");
      q.prompt_tokens = j.value("prompt_tokens", std::vector<TokenId>{});
    } catch (const json::exception& e) {
      fail(ErrorCode::kConfig, where + e.what());
    }
    if (q.gold_answer.empty()) fail(ErrorCode::kConfig, where + "empty answer for id " + q.id);
    if (!ids.insert(q.id).second) fail(ErrorCode::kConfig, where + "duplicate id " + q.id);
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<EvalQuestion> load_questions_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open dataset " + path);
  try {
    return load_questions(in);
  } catch (const Error& e) {
    fail(e.code(), path + ": " + e.what());
  }
}

std::optional<std::string> extract_boxed(std::string_view text) {
  static constexpr std::string_view kOpen = "\\boxed{";
  const auto start = text.rfind(kOpen);
  if (start == std::string_view::npos) return std::nullopt;
  const std::size_t body = start + kOpen.size();
  int depth = 1;
  for (std::size_t i = body; i < text.size(); ++i) {
    if (text[i] == '{') {
      ++depth;
    } else if (text[i] == '}') {
      if (--depth == 0) return std::string(text.substr(body, i - body));
    }
  }
  return std::nullopt;
}

namespace {

bool is_letter(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

// Removes the control word `word` wherever it is not the prefix of a longer
// control word (so \right goes but \rightarrow stays).
std::string strip_control_word(const std::string& s, std::string_view word) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s.compare(i, word.size(), word) == 0 &&
        (i + word.size() == s.size() || !is_letter(s[i + word.size()]))) {
      i += word.size();
      continue;
    }
    out.push_back(s[i++]);
  }
  return out;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

std::string normalize_once(std::string_view input) {
  std::string s;
  s.reserve(input.size());
  for (char c : input) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '$') continue;
    s.push_back(c);
  }
  s = strip_control_word(s, "\\left");
  s = strip_control_word(s, "\\right");
  s = replace_all(std::move(s), "\\dfrac", "\\frac");
  for (;;) {
    if (!s.empty() && s.back() == '.') {
      s.pop_back();
    } else if (s.size() >= 2 && s.compare(s.size() - 2, 2, "\\%") == 0) {
      s.resize(s.size() - 2);
    } else {
      break;
    }
  }
  return s;
}

}  // namespace

std::string normalize_answer(std::string_view answer) {
  std::string current = normalize_once(answer);
  for (;;) {
    std::string next = normalize_once(current);
    if (next == current) return current;
    current = std::move(next);
  }
}

bool grade(const std::optional<std::string>& extracted, const std::string& gold) {
  if (!extracted) return false;
  return normalize_answer(*extracted) == normalize_answer(gold);
}

int pass_at_k_any(const std::vector<bool>& correct, std::size_t k) {
  if (k == 0 || k > correct.size()) {
    fail(ErrorCode::kArgument, "pass@k needs 1 <= k <= n (k=" + std::to_string(k) +
                                   ", n=" + std::to_string(correct.size()) + ")");
  }
  return std::any_of(correct.begin(), correct.begin() + static_cast<std::ptrdiff_t>(k),
                     [](bool b) { return b; })
             ? 1
             : 0;
}

namespace {

std::optional<std::uint64_t> binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 value = 1;
  for (std::uint64_t i = 0; i < k; ++i) {
    value = value * (n - i) / (i + 1);
    if (value > UINT64_MAX) return std::nullopt;
  }
  return static_cast<std::uint64_t>(value);
}

}  // namespace

double pass_at_k_unbiased(std::size_t n, std::size_t c, std::size_t k) {
  if (c > n) fail(ErrorCode::kArgument, "pass@k needs c <= n");
  if (k == 0 || k > n) fail(ErrorCode::kArgument, "pass@k needs 1 <= k <= n");
  if (n - c < k) return 1.0;
  const auto total = binomial(n, k);
  const auto miss = binomial(n - c, k);
  if (total && miss) {
    // One rounding of the exact rational (total - miss) / total.
    return static_cast<double>(*total - *miss) / static_cast<double>(*total);
  }
  double keep = 1.0;
  for (std::size_t i = n - c + 1; i <= n; ++i) {
    keep *= 1.0 - static_cast<double>(k) / static_cast<double>(i);
  }
  return 1.0 - keep;
}

const char* estimator_name(PassAtKEstimator e) {
  return e == PassAtKEstimator::kAnyOf ? "any_of" : "unbiased";
}

std::size_t EvalRecord::n_correct() const {
  return static_cast<std::size_t>(std::count_if(completions.begin(), completions.end(),
                                                [](const auto& c) { return c.correct; }));
}

EvalRecord evaluate_question(const EvalQuestion& question,
                             std::span<const CompletionInput> completions,
                             std::span<const std::size_t> ks, PassAtKEstimator estimator) {
  EvalRecord record;
  record.question_id = question.id;
  record.source = question.source;
  std::vector<bool> flags;
  double tokens = 0.0;
  for (const auto& c : completions) {
    GradedCompletion g;
    g.text = c.text;
    g.token_count = c.token_count;
    g.extracted = extract_boxed(c.text);
    g.correct = grade(g.extracted, question.gold_answer);
    flags.push_back(g.correct);
    tokens += static_cast<double>(c.token_count);
    record.completions.push_back(std::move(g));
  }
  const std::size_t n = record.completions.size();
  if (n == 0) return record;

  record.avg_tokens = tokens / static_cast<double>(n);
  const std::size_t c = record.n_correct();
  record.pass_at[1] = static_cast<double>(c) / static_cast<double>(n);
  for (std::size_t k : ks) {
    if (k <= 1 || k > n) continue;
    if (estimator == PassAtKEstimator::kAnyOf) {
      record.pass_at[k] = pass_at_k_any(flags, k);
    } else {
      record.pass_at[k] = pass_at_k_unbiased(n, c, k);
    }
  }
  return record;
}

std::vector<SummaryRow> aggregate(std::span<const EvalRecord> records) {
  std::map<std::string, std::vector<const EvalRecord*>> by_source;
  for (const auto& r : records) by_source[r.source].push_back(&r);

  std::vector<SummaryRow> rows;
  for (const auto& [source, group] : by_source) {
    SummaryRow row;
    row.dataset = source;
    row.questions = group.size();
    std::size_t samples = 0, correct = 0, min_samples = SIZE_MAX;
    double tokens = 0.0, pass8 = 0.0;
    bool has_pass8 = true;
    for (const auto* r : group) {
      samples += r->completions.size();
      correct += r->n_correct();
      min_samples = std::min(min_samples, r->completions.size());
      for (const auto& c : r->completions) tokens += static_cast<double>(c.token_count);
      const auto it = r->pass_at.find(8);
      if (it == r->pass_at.end()) {
        has_pass8 = false;
      } else {
        pass8 += it->second;
      }
    }
    row.samples_per_question = min_samples == SIZE_MAX ? 0 : min_samples;
    if (samples > 0) {
      row.pass_at_1 = static_cast<double>(correct) / static_cast<double>(samples);
      row.avg_tokens = tokens / static_cast<double>(samples);
    }
    if (has_pass8 && !group.empty()) pass8 /= static_cast<double>(group.size());
    if (has_pass8 && !group.empty()) row.pass_at_8 = pass8;
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, v);
  return buf;
}

}  // namespace

std::string format_table_text(std::span<const SummaryRow> rows, PassAtKEstimator estimator) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-20s %9s %6s %8s %8s %10s\n", "dataset", "questions", "n",
                "pass@1", "pass@8", "# token");
  out << line;
  for (const auto& r : rows) {
    const std::string p8 = r.pass_at_8 ? fmt("%.1f", 100.0 * *r.pass_at_8) : "-";
    std::snprintf(line, sizeof(line), "%-20s %9zu %6zu %8.1f %8s %10.1f\n", r.dataset.c_str(),
                  r.questions, r.samples_per_question, 100.0 * r.pass_at_1, p8.c_str(),
                  r.avg_tokens);
    out << line;
  }
  out << "(pass@k in percent; pass@8 estimator: " << estimator_name(estimator) << ")\n";
  return out.str();
}

std::string format_table_tsv(std::span<const SummaryRow> rows) {
  std::ostringstream out;
  out << "dataset\tquestions\tsamples\tpass@1\tpass@8\tavg_tokens\n";
  for (const auto& r : rows) {
    out << r.dataset << '\t' << r.questions << '\t' << r.samples_per_question << '\t'
        << fmt("%.6f", r.pass_at_1) << '\t' << (r.pass_at_8 ? fmt("%.6f", *r.pass_at_8) : "NA")
        << '\t' << fmt("%.3f", r.avg_tokens) << '\n';
  }
  return out.str();
}

json record_to_json(const EvalRecord& record, PassAtKEstimator estimator) {
  json completions = json::array();
  for (const auto& c : record.completions) {
    completions.push_back({{"text", c.text},
                           {"token_count", c.token_count},
                           {"extracted", c.extracted ? json(*c.extracted) : json(nullptr)},
                           {"correct", c.correct}});
  }
  json pass = json::object();
  for (const auto& [k, v] : record.pass_at) pass[std::to_string(k)] = v;
  return {{"schema", kResultsSchema},
          {"question_id", record.question_id},
          {"source", record.source},
          {"completions", std::move(completions)},
          {"pass_at", std::move(pass)},
          {"pass_at_estimator", estimator_name(estimator)},
          {"avg_tokens", record.avg_tokens}};
}

json row_to_json(const SummaryRow& row) {
  return {{"dataset", row.dataset},
          {"questions", row.questions},
          {"samples", row.samples_per_question},
          {"pass@1", row.pass_at_1},
          {"pass@8", row.pass_at_8 ? json(*row.pass_at_8) : json(nullptr)},
          {"avg_tokens", row.avg_tokens}};
}

}  // namespace logitfuse::eval
