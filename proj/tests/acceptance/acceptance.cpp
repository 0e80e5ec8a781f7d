// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <sys/wait.h>
#include <unistd.h>

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "generators.hpp"
#include "json.hpp"
#include "logitfuse/decode.hpp"
#include "logitfuse/dpo.hpp"
#include "logitfuse/error.hpp"
#include "logitfuse/eval.hpp"
#include "logitfuse/prefs.hpp"
#include "logitfuse/remote_provider.hpp"
#include "logitfuse/sampler.hpp"
#include "logitfuse/wire.hpp"
#include "oracles.hpp"
#include "test_providers.hpp"

using namespace logitfuse;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = LOGITFUSE_FIXTURE_DIR;

// Collects failure notes for one criterion.
struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
    if (!ok) ++failed;
  }
  std::size_t failed = 0;
  std::string detail;
};

bool same_bits(const LogitVector& a, const LogitVector& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

DecodeEngine engine_for(const gen::Triple& t) { return DecodeEngine({t.target, t.base, t.guider}); }

// ---- 1 --------------------------------------------------------------------

void fusion_identities(Check& c) {
  const auto start = std::chrono::steady_clock::now();
  gen::Rng rng(1001);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto t = gen::random_triple(rng);
    DecodeRequest r;
    r.prompt_tokens = gen::prompt(rng, t.vocab);
    r.guidance.alpha = gen::uniform_real(rng, 0.0, 2.0);
    r.guidance.warmup_tokens = gen::uniform_int(rng, 0, 5);
    r.sampling.seed = rng();
    r.max_new_tokens = gen::uniform_int(rng, 10, 60);

    auto to = r;
    to.mode = DecodeMode::kTargetOnly;
    const auto expect = engine_for(t).decode(to).tokens();

    auto zero = r;
    zero.guidance.alpha = 0.0;
    auto same = t;
    same.guider = gen::clone(*t.base, "guider");
    const bool ok = engine_for(t).decode(zero).tokens() == expect &&
                    engine_for(same).decode(r).tokens() == expect;
    if (!ok) ++mismatches;
    c.expect(ok, "scenario " + std::to_string(trial));
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.expect(secs < 5.0, "took " + std::to_string(secs) + " s");
  char buf[96];
  std::snprintf(buf, sizeof buf, "100 scenarios, %zu mismatches, %.2f s", mismatches, secs);
  c.detail = buf;
}

// ---- 2 --------------------------------------------------------------------

void warmup_gating(Check& c) {
  gen::Rng rng(1002);
  std::size_t runs = 0, diverged_after = 0;
  for (int trial = 0; trial < 60; ++trial) {
    auto t = gen::random_triple(rng);
    // Push eos far down so runs reach the 300-token cap.
    auto tame = [&](const std::shared_ptr<TableLM>& lm, const char* name) {
      auto j = json::parse(lm->to_json_text());
      for (auto& row : j.at("table")) row.at("logits")[t.eos] = -30.0;
      j.at("default_logits")[t.eos] = -30.0;
      return TableLM::from_json_text(j.dump(), name);
    };
    t.target = tame(t.target, "target");
    t.base = tame(t.base, "base");
    t.guider = tame(t.guider, "guider");
    for (int s = 0; s < 3; ++s) {
      DecodeRequest r;
      r.prompt_tokens = gen::prompt(rng, t.vocab);
      r.guidance.alpha = gen::uniform_real(rng, 0.5, 2.0);
      r.sampling.seed = rng();
      r.max_new_tokens = 300;
      auto to = r;
      to.mode = DecodeMode::kTargetOnly;
      const auto g = engine_for(t).decode(r).tokens();
      const auto b = engine_for(t).decode(to).tokens();
      ++runs;
      c.expect(g.size() == 300 && b.size() == 300, "run did not reach 300 tokens");
      c.expect(std::equal(g.begin(), g.begin() + 100, b.begin()),
               "first 100 tokens differ in run " + std::to_string(runs));
      if (g != b) ++diverged_after;
    }
  }
  c.expect(diverged_after > 0, "guidance never changed a token after warm-up");
  c.detail = std::to_string(runs) + " runs of 300, prefix(100) equal; " +
             std::to_string(diverged_after) + " diverge later";
}

// ---- 3 --------------------------------------------------------------------

void guidance_effect(Check& c) {
  // First-order chain over {eos, a, b, c}. The target ends quickly; the
  // guider-minus-base delta pushes mass away from eos.
  const std::vector<std::string> tokens{"<eos>", "a", "b", "c"};
  const VocabTable vocab(tokens, 0);
  auto model = [&](const std::vector<LogitVector>& rows, const char* name) {
    TableLM::Table table;
    for (TokenId s = 0; s < 4; ++s) table[{s}] = rows[s];
    return std::make_shared<TableLM>(vocab, 1, table, LogitVector(4, 0.0f), name);
  };
  const std::vector<LogitVector> target_rows{
      {0.0f, 0.0f, 0.0f, 0.0f}, {-0.5f, 0.2f, 0.0f, -0.5f}, {-0.8f, 0.0f, 0.4f, 0.0f}, {-0.3f, 0.3f, 0.0f, 0.1f}};
  const std::vector<LogitVector> base_rows{
      {0.0f, 0.0f, 0.0f, 0.0f}, {0.5f, 0.0f, 0.0f, 0.0f}, {0.5f, 0.0f, 0.0f, 0.0f}, {0.5f, 0.0f, 0.0f, 0.0f}};
  const std::vector<LogitVector> guider_rows{
      {0.0f, 0.0f, 0.0f, 0.0f}, {-0.5f, 0.3f, 0.0f, 0.0f}, {-0.6f, 0.0f, 0.2f, 0.0f}, {-0.4f, 0.0f, 0.0f, 0.4f}};
  const auto target = model(target_rows, "target"), base = model(base_rows, "base"),
             guider = model(guider_rows, "guider");
  DecodeEngine engine({target, base, guider}, EngineOptions{4, {}, {}});

  DecodeRequest r;
  r.prompt_tokens = {1};
  r.guidance.alpha = 1.0;
  r.guidance.warmup_tokens = 3;
  r.max_new_tokens = 120;
  r.sampling.seed = 30001;
  const std::size_t n = 1000;

  auto analyse = [&](DecodeMode mode, const char* label) {
    auto q = r;
    q.mode = mode;
    const bool guided = mode == DecodeMode::kGuided;
    const auto dist = oracle::length_distribution(
        4, 1, 0, r.max_new_tokens, [&](std::size_t step, std::size_t state) {
          auto used = target_rows[state];
          if (guided && step >= r.guidance.warmup_tokens) {
            used = oracle::fuse(used, guider_rows[state], base_rows[state], 1.0f);
          }
          return oracle::top_p(oracle::softmax(used, r.sampling.temperature), r.sampling.top_p);
        });
    const auto [mean, var] = oracle::mean_variance(dist);
    const std::vector<DecodeRequest> one{q};
    double sum = 0;
    for (const auto& item : engine.decode_batch(one, n)) {
      sum += static_cast<double>(item.trace.generated_count);
    }
    const double observed = sum / static_cast<double>(n);
    const double sigma = std::sqrt(static_cast<double>(var) / static_cast<double>(n));
    const double z = (observed - static_cast<double>(mean)) / sigma;
    c.expect(std::abs(z) <= 3.0, std::string(label) + " sample mean off by " + std::to_string(z) + " sigma");
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s exact %.3f sampled %.3f (z=%+.2f)", label,
                  static_cast<double>(mean), observed, z);
    return std::pair<double, std::string>(observed, buf);
  };
  const auto [g, gd] = analyse(DecodeMode::kGuided, "guided");
  const auto [b, bd] = analyse(DecodeMode::kTargetOnly, "target_only");
  c.expect(g > b, "guided mean length not above target-only");
  c.detail = gd + "; " + bd;
}

// ---- 4 --------------------------------------------------------------------

// Best subset per size (max mass, then lexicographically smallest ids). For a
// fixed size the smallest covering subset is this one whenever it covers.
struct SizeBest {
  int mass = -1;
  std::uint32_t set = 0;
};

bool lex_smaller(std::uint32_t a, std::uint32_t b) {
  const std::uint32_t d = a ^ b;
  return d != 0 && (a & (d & -d)) != 0;
}

void top_p_exhaustive(Check& c) {
  std::vector<double> ps;
  for (int k = 1; k <= 16; ++k) ps.push_back(k / 16.0);
  for (double p : {0.3, 0.7, 0.95}) ps.push_back(p);

  std::size_t distributions = 0, comparisons = 0, oracle_cross = 0;
  gen::Rng pick(1004);
  for (std::size_t n = 1; n <= 8; ++n) {
    std::vector<int> mass(n, 0);
    // Enumerate every composition of 16 into n non-negative parts.
    std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
      if (i + 1 == n) {
        mass[i] = left;
        ++distributions;
        std::vector<SizeBest> best(n + 1);
        for (std::uint32_t s = 1; s < (1u << n); ++s) {
          int m = 0;
          for (std::size_t j = 0; j < n; ++j) {
            if (s & (1u << j)) m += mass[j];
          }
          auto& b = best[std::popcount(s)];
          if (m > b.mass || (m == b.mass && lex_smaller(s, b.set))) b = {m, s};
        }
        std::vector<double> probs(n);
        for (std::size_t j = 0; j < n; ++j) probs[j] = mass[j] / 16.0;
        const bool cross = pick() % 997 == 0;
        for (double p : ps) {
          const double need = 16.0 * p;
          std::size_t size = 1;
          while (static_cast<double>(best[size].mass) < need) ++size;
          const auto& b = best[size];
          std::vector<double> expect(n, 0.0);
          for (std::size_t j = 0; j < n; ++j) {
            if (b.set & (1u << j)) expect[j] = static_cast<double>(mass[j]) / b.mass;
          }
          ++comparisons;
          c.expect(top_p_filter(probs, p) == expect, "top-p differs from brute force");
          if (cross) {
            // The per-size shortcut must agree with the plain enumeration.
            std::vector<std::size_t> ids;
            for (std::size_t j = 0; j < n; ++j) {
              if (b.set & (1u << j)) ids.push_back(j);
            }
            ++oracle_cross;
            c.expect(oracle::smallest_covering_subset(mass, need) == ids, "oracle shortcut differs");
          }
        }
        return;
      }
      for (int v = 0; v <= left; ++v) {
        mass[i] = v;
        rec(i + 1, left - v);
      }
    };
    rec(0, 16);
  }
  c.detail = std::to_string(distributions) + " distributions x " + std::to_string(ps.size()) +
             " p values = " + std::to_string(comparisons) + " comparisons";
}

// ---- 5 --------------------------------------------------------------------

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

void pass_at_k(Check& c) {
  std::size_t exact = 0;
  for (int n = 1; n <= 12; ++n) {
    for (int k = 1; k <= n; ++k) {
      for (int correct = 0; correct <= n; ++correct) {
        const auto [hits, total] = oracle::pass_at_k_enumerated(n, correct, k);
        ++exact;
        c.expect(eval::pass_at_k_unbiased(n, correct, k) ==
                     static_cast<double>(hits) / static_cast<double>(total),
                 "enumeration n=" + std::to_string(n));
      }
    }
  }

  // Monte Carlo over a fixed grid of (n, c, k) for n <= 20.
  const int draws = 100000;
  std::size_t mc = 0;
  double worst = 0;
  for (int n = 2; n <= 20; n += 2) {
    for (int correct : std::set<int>{1, n / 2}) {
      // One independent stream per (n, c) cell.
      gen::Rng rng(1005 + 100 * static_cast<std::uint64_t>(n) + static_cast<std::uint64_t>(correct));
      const int k = (n + 2) / 3;
      const double expect = eval::pass_at_k_unbiased(n, correct, k);
      std::vector<int> idx(n);
      for (int i = 0; i < n; ++i) idx[i] = i;
      int hit = 0;
      for (int d = 0; d < draws; ++d) {
        std::shuffle(idx.begin(), idx.end(), rng);
        bool any = false;
        for (int i = 0; i < k; ++i) any = any || idx[i] < correct;
        hit += any;
      }
      const double obs = static_cast<double>(hit) / draws;
      const double sigma = std::sqrt(expect * (1 - expect) / draws);
      ++mc;
      if (sigma == 0) {
        c.expect(obs == expect, "degenerate Monte Carlo mismatch");
      } else {
        worst = std::max(worst, std::abs(obs - expect) / sigma);
        c.expect(std::abs(obs - expect) <= 3 * sigma,
                 "Monte Carlo n=" + std::to_string(n) + " c=" + std::to_string(correct));
      }
    }
  }

  const auto doc = read_json(kFixtures / "eval" / "hand_table.json");
  const std::size_t ks[] = {8};
  for (auto estimator : {eval::PassAtKEstimator::kAnyOf, eval::PassAtKEstimator::kUnbiased}) {
    std::vector<eval::EvalRecord> records;
    for (const auto& q : doc.at("questions")) {
      eval::EvalQuestion question;
      question.id = q.at("id");
      question.gold_answer = q.at("answer");
      question.source = q.at("source");
      std::vector<eval::CompletionInput> inputs;
      for (const auto& comp : q.at("completions")) {
        inputs.push_back({comp.at("text").get<std::string>(), comp.at("token_count").get<std::size_t>()});
      }
      records.push_back(eval::evaluate_question(question, inputs, ks, estimator));
    }
    c.expect(eval::format_table_tsv(eval::aggregate(records)) == doc.at("expected_tsv").get<std::string>(),
             std::string("hand table differs under ") + eval::estimator_name(estimator));
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu exact cases, %zu Monte Carlo cases (max %.2f sigma), hand table",
                exact, mc, worst);
  c.detail = buf;
}

// ---- 6 --------------------------------------------------------------------

void grader(Check& c) {
  std::ifstream in(kFixtures / "eval" / "grader_cases.jsonl");
  std::string line;
  std::size_t cases = 0, agree = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    ++cases;
    const auto extracted = eval::extract_boxed(j.at("text").get<std::string>());
    const bool ok = eval::grade(extracted, j.at("gold").get<std::string>()) == j.at("correct").get<bool>();
    agree += ok;
    c.expect(ok, "case " + j.at("case").dump());
  }
  c.expect(cases == 50, "fixture does not hold 50 cases");

  gen::Rng rng(1006);
  static const std::vector<std::string> pieces{"\\boxed{", "{", "}", "x", "2", " ", "\\frac", "\\boxed", "\\"};
  const int fuzz = 50000;
  for (int trial = 0; trial < fuzz; ++trial) {
    std::string text;
    const std::size_t n = gen::uniform_int(rng, 0, 16);
    for (std::size_t i = 0; i < n; ++i) text += pieces[gen::uniform_int(rng, 0, pieces.size() - 1)];
    const auto got = eval::extract_boxed(text);
    c.expect(!got || oracle::braces_balanced(*got), "unbalanced extraction from " + text);
  }
  c.detail = std::to_string(agree) + "/" + std::to_string(cases) + " hand labels, " +
             std::to_string(fuzz) + " fuzz inputs balanced";
}

// ---- 7 --------------------------------------------------------------------

void pair_construction(Check& c) {
  gen::Rng rng(1007);
  std::size_t total_pairs = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<prefs::GradedCompletion> corpus;
    std::vector<oracle::Graded> plain;
    const std::size_t questions = gen::uniform_int(rng, 1, 5);
    const std::size_t n = gen::uniform_int(rng, 0, 40);
    for (std::size_t i = 0; i < n; ++i) {
      const auto qid = "q" + std::to_string(gen::uniform_int(rng, 0, questions - 1));
      const bool target = gen::coin(rng);
      const auto text = "t" + std::to_string(gen::uniform_int(rng, 0, 6));
      const bool correct = gen::coin(rng, 0.4);
      corpus.push_back({qid, "prompt", target ? prefs::Origin::kTarget : prefs::Origin::kGuider, text, correct});
      plain.push_back({qid, target, text, correct});
    }
    const auto set = prefs::build_pairs(corpus);
    std::vector<oracle::Pair> got;
    for (const auto& p : set.pairs) got.push_back({p.question_id, p.chosen, p.rejected, prefs::pair_type_name(p.type)});
    total_pairs += got.size();
    c.expect(got == oracle::brute_force_pairs(plain), "corpus " + std::to_string(trial));
  }
  const double lambda = prefs::compute_lambda(11974, 43209);
  c.expect(std::abs(lambda - 0.21699) <= 1e-5, "lambda " + std::to_string(lambda));
  char buf[128];
  std::snprintf(buf, sizeof buf, "200 corpora (%zu pairs) exact; lambda(11974, 43209) = %.6f", total_pairs,
                lambda);
  c.detail = buf;
}

// ---- 8 --------------------------------------------------------------------

struct DpoInstance {
  dpo::ToyPolicy policy{1}, reference{1};
  std::vector<dpo::TokenPair> d1, d2;
  dpo::DpoConfig config;
};

DpoInstance random_dpo(gen::Rng& rng) {
  DpoInstance in;
  const std::size_t v = gen::uniform_int(rng, 2, 5);
  in.policy = dpo::ToyPolicy::random(v, rng(), 1.0);
  in.reference = dpo::ToyPolicy::random(v, rng(), 1.0);
  auto seq = [&](std::size_t lo, std::size_t hi) {
    dpo::Sequence s(gen::uniform_int(rng, lo, hi));
    for (auto& t : s) t = static_cast<TokenId>(gen::uniform_int(rng, 0, v - 1));
    return s;
  };
  auto pairs = [&](std::size_t count) {
    std::vector<dpo::TokenPair> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back({seq(0, 2), seq(1, 4), seq(1, 4)});
    return out;
  };
  in.d1 = pairs(gen::uniform_int(rng, 1, 4));
  in.d2 = pairs(gen::uniform_int(rng, 1, 4));
  in.config.beta = gen::uniform_real(rng, 0.05, 2.0);
  in.config.lambda = gen::uniform_real(rng, 0.0, 1.0);
  return in;
}

oracle::ProbTable table_of(const dpo::ToyPolicy& p) {
  const auto params = p.params();
  return oracle::probabilities_from_logits(std::vector<double>(params.begin(), params.end()), p.vocab_size());
}

std::vector<oracle::TokPair> oracle_pairs(const std::vector<dpo::TokenPair>& d) {
  std::vector<oracle::TokPair> out;
  for (const auto& p : d) out.push_back({p.prompt, p.chosen, p.rejected});
  return out;
}

void dpo_math(Check& c) {
  gen::Rng rng(1008);
  double worst_ln2 = 0, worst_fd = 0, worst_lin = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto in = random_dpo(rng);
    const double self = dpo::dpo_loss(in.reference, in.reference, in.d1, in.d2, in.config);
    worst_ln2 = std::max(worst_ln2, std::abs(self - std::log(2.0)));

    const auto g = dpo::dpo_gradient(in.policy, in.reference, in.d1, in.d2, in.config);
    const auto loss_at = [&](const dpo::ToyPolicy& p) {
      return oracle::dpo_loss(table_of(p), table_of(in.reference), oracle_pairs(in.d1), oracle_pairs(in.d2),
                              in.config.beta, in.config.lambda);
    };
    double num = 0, den = 0;
    const double h = 1e-5;
    for (std::size_t i = 0; i < g.size(); ++i) {
      auto plus = in.policy, minus = in.policy;
      plus.params()[i] += h;
      minus.params()[i] -= h;
      const double fd = static_cast<double>((loss_at(plus) - loss_at(minus)) / (2 * h));
      num += (g[i] - fd) * (g[i] - fd);
      den += fd * fd;
    }
    const double rel = den < 1e-20 ? std::sqrt(num) : std::sqrt(num / den);
    worst_fd = std::max(worst_fd, rel);

    auto at = [&](double lambda) {
      auto cfg = in.config;
      cfg.lambda = lambda;
      return dpo::dpo_loss(in.policy, in.reference, in.d1, in.d2, cfg);
    };
    const double l = in.config.lambda;
    worst_lin = std::max(worst_lin, std::abs(at(l) - (l * at(1.0) + (1 - l) * at(0.0))));

    const auto step = dpo::gradient_step_improves(in.policy, in.reference, in.d1, in.d2, in.config, 1e-3);
    c.expect(step.loss_after <= step.loss_before, "gradient step raised the loss");
  }
  c.expect(worst_ln2 <= 1e-12, "self loss off ln 2 by " + std::to_string(worst_ln2));
  c.expect(worst_fd < 1e-4, "finite-difference error " + std::to_string(worst_fd));
  c.expect(worst_lin <= 1e-12, "lambda linearity error " + std::to_string(worst_lin));
  char buf[160];
  std::snprintf(buf, sizeof buf, "100 instances: |L-ln2|<=%.1e, FD rel err<=%.1e, linearity<=%.1e, steps descend",
                worst_ln2, worst_fd, worst_lin);
  c.detail = buf;
}

// ---- 9 --------------------------------------------------------------------

void budget_forcing(Check& c) {
  const std::vector<std::string> tokens{"<eos>", "a", "b", "c", "d"};
  LogitVector row{1.0f, 0.0f, 0.0f, 0.0f, 0.0f};
  auto lm = std::make_shared<TableLM>(VocabTable(tokens, 0), 1, TableLM::Table{}, row, "eos-prone");
  DecodeEngine engine({lm, nullptr, nullptr});
  const std::size_t cap = 512, runs = 50;
  double forced_sum = 0, plain_sum = 0;
  std::size_t forced_min = cap;
  for (std::size_t i = 0; i < runs; ++i) {
    DecodeRequest r;
    r.prompt_tokens = {1};
    r.max_new_tokens = cap;
    r.sampling.seed = 9000 + i;
    r.mode = DecodeMode::kTargetOnly;
    const auto plain = engine.decode(r);
    r.mode = DecodeMode::kBudgetForcing;
    r.forcing_tokens = {2};
    const auto forced = engine.decode_budget_forcing(r);
    plain_sum += static_cast<double>(plain.generated_count);
    forced_sum += static_cast<double>(forced.generated_count);
    forced_min = std::min(forced_min, forced.generated_count);
    c.expect(plain.stop_reason == StopReason::kEos, "target-only hit the cap");
  }
  const double forced_mean = forced_sum / runs, plain_mean = plain_sum / runs;
  c.expect(forced_mean >= 0.95 * cap, "forced mean below 95% of cap");
  c.expect(plain_mean < 0.5 * cap, "target-only did not stop early");
  char buf[128];
  std::snprintf(buf, sizeof buf, "cap %zu: forced mean %.1f (min %zu), target-only mean %.1f", cap, forced_mean,
                forced_min, plain_mean);
  c.detail = buf;
}

// ---- 10 -------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  if (!fs::exists(root)) return out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = "'" LOGITFUSE_CLI_PATH "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

void determinism(Check& c) {
  const auto root = fs::temp_directory_path() / ("logitfuse_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const auto toy = kFixtures / "toy";
  std::size_t files = 0;
  for (const char* run : {"a", "b"}) {
    const auto dir = root / run;
    c.expect(run_cli("decode " + q(toy / "run.json") + " -o " + q(dir / "decode")) == 0, "decode failed");
    c.expect(run_cli("eval " + q(dir / "decode") + " --dataset " + q(toy / "questions.jsonl") + " -o " +
                     q(dir / "eval")) == 0,
             "eval failed");
    c.expect(run_cli("sweep " + q(toy / "run.json") + " -n 2 -o " + q(dir / "sweep")) == 0, "sweep failed");
    c.expect(run_cli("build-prefs " + q(kFixtures / "prefs" / "graded.jsonl") + " --subsample 6 --seed 3 -o " +
                     q(dir / "prefs")) == 0,
             "build-prefs failed");
  }
  const auto a = tree(root / "a"), b = tree(root / "b");
  files = a.size();
  c.expect(files > 0, "no outputs written");
  c.expect(a == b, "reruns differ");
  c.expect(a.count("decode/traces/toy-1.trace.jsonl") == 1, "missing trace file");
  c.expect(a.count("eval/summary.tsv") == 1, "missing summary table");
  fs::remove_all(root);
  c.detail = "decode, eval, sweep, build-prefs rerun: " + std::to_string(files) + " files byte-identical";
}

// ---- 11 -------------------------------------------------------------------

float random_float(gen::Rng& rng) {
  static const float specials[] = {0.0f, -0.0f, 1e-45f, -1e-45f, 1.17549435e-38f, 3.4028235e38f, -3.4028235e38f};
  if (gen::coin(rng, 0.2)) return specials[gen::uniform_int(rng, 0, std::size(specials) - 1)];
  for (;;) {
    const float f = std::bit_cast<float>(static_cast<std::uint32_t>(rng()));
    if (std::isfinite(f)) return f;
  }
}

void protocol(Check& c) {
  gen::Rng rng(1011);
  std::size_t vectors = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t v = gen::uniform_int(rng, 3, 40);
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < v; ++i) tokens.push_back("w" + std::to_string(i));
    TableLM::Table table;
    for (TokenId t = 0; t < v; ++t) {
      LogitVector row(v);
      for (auto& x : row) x = random_float(rng);
      table[{t}] = row;
    }
    LogitVector def(v);
    for (auto& x : def) x = random_float(rng);
    auto lm = std::make_shared<TableLM>(VocabTable(tokens, 0), 1, table, def);
    wire::ProviderServer server(lm);
    server.start();
    RemoteProvider remote(server.endpoint());
    for (TokenId t = 0; t <= v; ++t) {
      std::vector<TokenId> prefix;
      if (t < v) prefix.push_back(t);
      ++vectors;
      c.expect(same_bits(remote.logits_for_prefix(prefix), lm->logits_for_prefix(prefix)), "stateless bytes differ");
      const auto id = remote.open_session();
      c.expect(same_bits(remote.next_logits(id, prefix), lm->logits_for_prefix(prefix)), "session bytes differ");
      remote.close_session(id);
    }
  }

  // Size, hash and eos mismatches, local and over the wire, in every slot.
  gen::Rng g(1111);
  const auto t = gen::random_triple(g, 5, 5);
  std::vector<std::string> tokens;
  for (TokenId i = 0; i < t.vocab; ++i) tokens.push_back(t.target->token_table()->token(i));
  auto bigger = tokens;
  bigger.push_back("extra");
  auto renamed = tokens;
  renamed[1] += "'";
  const std::vector<std::pair<std::string, std::shared_ptr<TableLM>>> bad{
      {"size", std::make_shared<TableLM>(VocabTable(bigger, t.eos), 1, TableLM::Table{})},
      {"hash", std::make_shared<TableLM>(VocabTable(renamed, t.eos), 1, TableLM::Table{})},
      {"eos", std::make_shared<TableLM>(VocabTable(tokens, (t.eos + 1) % t.vocab), 1, TableLM::Table{})}};
  std::size_t refusals = 0;
  for (const auto& [field, model] : bad) {
    for (int slot = 1; slot <= 2; ++slot) {
      for (bool remote : {false, true}) {
        std::unique_ptr<wire::ProviderServer> server;
        ProviderPtr wrong = model;
        if (remote) {
          server = std::make_unique<wire::ProviderServer>(model);
          server->start();
          wrong = std::make_shared<RemoteProvider>(server->endpoint());
        }
        auto dt = std::make_shared<testing_support::DeadProvider>(t.target);
        auto db = std::make_shared<testing_support::DeadProvider>(slot == 1 ? wrong : t.base);
        auto dg = std::make_shared<testing_support::DeadProvider>(slot == 2 ? wrong : t.guider);
        bool refused = false;
        try {
          DecodeEngine engine({dt, db, dg});
        } catch (const Error& e) {
          refused = e.code() == ErrorCode::kVocabMismatch;
        }
        refusals += refused;
        c.expect(refused, field + " mismatch accepted");
        c.expect(dt->logits_calls + db->logits_calls + dg->logits_calls == 0, "logits queried before refusal");
        if (server) c.expect(server->logits_requests() == 0, "server saw a logits request");
      }
    }
  }
  c.detail = std::to_string(vectors) + " logit vectors bit-exact over HTTP; " + std::to_string(refusals) +
             "/12 mismatches refused with zero logits queries";
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, void (*)(Check&)>> criteria{
      {"fusion identities", fusion_identities},
      {"warm-up gating", warmup_gating},
      {"guidance effect on the Markov scenario", guidance_effect},
      {"top-p equals smallest covering subset", top_p_exhaustive},
      {"pass@k estimator and tables", pass_at_k},
      {"grader corpus and extraction fuzz", grader},
      {"preference pair construction and lambda", pair_construction},
      {"DPO loss and gradient", dpo_math},
      {"budget forcing length", budget_forcing},
      {"CLI determinism", determinism},
      {"wire protocol and vocabulary refusal", protocol},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    try {
      criteria[i].second(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    const bool ok = c.failed == 0;
    failed += !ok;
    std::printf("%s [%2zu] %s: %s\n", ok ? "PASS" : "FAIL", i + 1, criteria[i].first, c.detail.c_str());
    for (const auto& f : c.failures) std::printf("       %s\n", f.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
