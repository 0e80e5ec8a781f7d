// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "logitfuse/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "logitfuse/dpo.hpp"
#include "logitfuse/eval.hpp"
#include "logitfuse/prefs.hpp"
#include "logitfuse/remote_provider.hpp"
#include "logitfuse/service.hpp"
#include "logitfuse/trace_io.hpp"
#include "logitfuse/wire.hpp"

namespace logitfuse::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::atomic<bool> g_shutdown{false};

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << content;
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

// Question ids become file names; anything outside [A-Za-z0-9._-] maps to '_'.
std::string sanitize_id(const std::string& id) {
  std::string out = id;
  for (char& c : out) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' ||
                      c == '-';
    if (!keep) c = '_';
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

std::string format_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::shared_ptr<const VocabTable> load_vocab_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfig, "cannot open vocab_file " + path);
  try {
    const auto j = json::parse(in);
    std::vector<TokenId> specials;
    if (j.contains("special_ids")) specials = j["special_ids"].get<std::vector<TokenId>>();
    return std::make_shared<const VocabTable>(j.at("tokens").get<std::vector<std::string>>(),
                                              j.at("eos_id").get<TokenId>(), specials);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, "vocab_file " + path + ": " + e.what());
  }
}

ProviderPtr make_provider(const ProviderSpec& spec) {
  if (!spec.fixture.empty()) return TableLM::from_file(spec.fixture);
  return std::make_shared<RemoteProvider>(spec.endpoint);
}

// Touches every provider once so transport failures surface with the role
// and endpoint before any decoding starts.
ProviderSet connect_providers(const RunConfig& cfg, bool need_guidance) {
  ProviderSet set;
  auto connect = [](const char* role, const ProviderSpec& spec) {
    ProviderPtr p = make_provider(spec);
    try {
      p->describe_vocab();
    } catch (const Error& e) {
      fail(e.code(), std::string(role) + " provider " + p->name() + ": " + e.what());
    }
    return p;
  };
  set.target = connect("target", cfg.target);
  if (need_guidance) {
    set.base = connect("base", cfg.base);
    set.guider = connect("guider", cfg.guider);
  }
  return set;
}

std::shared_ptr<DecodeEngine> build_engine(const RunConfig& cfg, bool need_guidance) {
  EngineOptions options;
  options.parallelism = cfg.parallelism;
  if (!cfg.vocab_file.empty()) options.vocab_table = load_vocab_file(cfg.vocab_file);
  auto engine = std::make_shared<DecodeEngine>(connect_providers(cfg, need_guidance), options);
  if (options.vocab_table && !(options.vocab_table->descriptor() == engine->vocab())) {
    fail(ErrorCode::kConfig, "vocab_file " + cfg.vocab_file +
                                 " does not describe the target vocabulary (hash " +
                                 engine->vocab().hash_hex() + ")");
  }
  return engine;
}

RunConfig load_config(const std::string& path, const CliOverrides& overrides) {
  RunConfig cfg = load_run_config(path);
  overrides.apply(cfg);
  return cfg;
}

std::vector<eval::EvalQuestion> load_dataset(const RunConfig& cfg) {
  if (cfg.dataset.empty()) fail(ErrorCode::kConfig, "dataset: no dataset configured");
  auto questions = eval::load_questions_file(cfg.dataset);
  std::set<std::string> names;
  for (const auto& q : questions) {
    if (!names.insert(sanitize_id(q.id)).second) {
      fail(ErrorCode::kConfig, "dataset: question ids collide after sanitising: " + q.id);
    }
  }
  return questions;
}

struct DecodeOutcome {
  int exit_code = kExitOk;
  std::vector<DecodeTrace> traces;  // ordered by (question, sample)
};

DecodeOutcome run_decode(const DecodeEngine& engine, const RunConfig& cfg,
                         const std::vector<eval::EvalQuestion>& questions,
                         const fs::path& out_dir, std::ostream& err) {
  const DecodeRequest base = cfg.request_template();
  std::vector<DecodeRequest> requests;
  for (const auto& q : questions) {
    DecodeRequest r = base;
    r.prompt_tokens = q.prompt_tokens;
    requests.push_back(std::move(r));
  }
  auto items = engine.decode_batch(requests, cfg.n_samples);

  make_dirs(out_dir / "traces");
  DecodeOutcome outcome;
  json question_entries = json::array();
  std::size_t failures = 0, transport_failures = 0;
  for (std::size_t qi = 0; qi < questions.size(); ++qi) {
    const auto& q = questions[qi];
    const std::string file = sanitize_id(q.id) + ".trace.jsonl";
    std::ostringstream body;
    std::size_t q_failures = 0;
    for (std::size_t s = 0; s < cfg.n_samples; ++s) {
      auto& trace = items[qi * cfg.n_samples + s].trace;
      trace.question_id = q.id;
      if (!trace.ok()) {
        ++q_failures;
        if (trace.error_code == ErrorCode::kTransport) ++transport_failures;
        err << "question " << q.id << " sample " << s << ": " << trace.error.value_or("failed")
            << "\n";
      }
      write_trace_jsonl(body, trace);
      outcome.traces.push_back(trace);
    }
    failures += q_failures;
    write_file(out_dir / "traces" / file, body.str());
    question_entries.push_back(
        {{"id", q.id}, {"file", "traces/" + file}, {"traces", cfg.n_samples},
         {"failures", q_failures}});
  }

  json manifest = {{"schema", "logitfuse.run/1"},
                   {"request", request_to_json(base)},
                   {"n_samples", cfg.n_samples},
                   {"vocab_hash", engine.vocab().hash_hex()},
                   {"rng_algorithm", Rng::kAlgorithm},
                   {"questions", std::move(question_entries)},
                   {"total_traces", items.size()},
                   {"failed_traces", failures}};
  manifest["request"].erase("prompt_tokens");
  write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");

  if (failures > 0) {
    const bool all_transport = failures == items.size() && transport_failures == failures;
    outcome.exit_code = all_transport ? kExitTransport : kExitPartial;
  }
  return outcome;
}

struct EvalOutcome {
  std::vector<eval::EvalRecord> records;
  std::vector<std::string> unmatched;  // trace question ids not in the dataset
  std::size_t excluded_traces = 0;     // aborted or text-less traces
};

EvalOutcome evaluate_traces(const std::vector<DecodeTrace>& traces,
                            const std::vector<eval::EvalQuestion>& questions,
                            eval::PassAtKEstimator estimator, std::ostream& err) {
  std::map<std::string, std::vector<eval::CompletionInput>> by_question;
  std::set<std::string> known;
  for (const auto& q : questions) known.insert(q.id);

  EvalOutcome outcome;
  std::set<std::string> unmatched;
  for (const auto& t : traces) {
    if (!known.count(t.question_id)) {
      unmatched.insert(t.question_id);
      continue;
    }
    if (!t.ok()) {
      ++outcome.excluded_traces;
      err << "excluded aborted trace for question " << t.question_id << " (sample "
          << t.rng.sample_index << ")\n";
      continue;
    }
    if (!t.text) {
      ++outcome.excluded_traces;
      err << "excluded trace without text for question " << t.question_id
          << " (configure vocab_file to detokenise)\n";
      continue;
    }
    by_question[t.question_id].push_back({*t.text, t.generated_count});
  }
  outcome.unmatched.assign(unmatched.begin(), unmatched.end());

  static constexpr std::size_t kPassK[] = {8};
  for (const auto& q : questions) {
    const auto it = by_question.find(q.id);
    if (it == by_question.end()) continue;
    outcome.records.push_back(eval::evaluate_question(q, it->second, kPassK, estimator));
  }
  return outcome;
}

std::vector<eval::SummaryRow> write_eval_outputs(const fs::path& out_dir,
                                                 const EvalOutcome& outcome,
                                                 eval::PassAtKEstimator estimator) {
  make_dirs(out_dir);
  const auto rows = eval::aggregate(outcome.records);
  std::string results;
  for (const auto& r : outcome.records) results += eval::record_to_json(r, estimator).dump() + "\n";
  write_file(out_dir / "results.jsonl", results);
  write_file(out_dir / "summary.tsv", eval::format_table_tsv(rows));
  write_file(out_dir / "summary.txt", eval::format_table_text(rows, estimator));
  json summary = {{"schema", eval::kResultsSchema},
                  {"pass_at_8_estimator", eval::estimator_name(estimator)},
                  {"rows", json::array()},
                  {"unmatched_ids", outcome.unmatched},
                  {"excluded_traces", outcome.excluded_traces}};
  for (const auto& row : rows) summary["rows"].push_back(eval::row_to_json(row));
  write_file(out_dir / "summary.json", summary.dump(2) + "\n");
  return rows;
}

std::vector<fs::path> trace_files(const fs::path& input) {
  if (fs::is_regular_file(input)) return {input};
  if (!fs::is_directory(input)) fail(ErrorCode::kConfig, "no such trace path: " + input.string());
  const fs::path dir = fs::is_directory(input / "traces") ? input / "traces" : input;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.ends_with(".trace.jsonl")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

int worst(int a, int b) {
  // Config and transport failures outrank partial results.
  auto rank = [](int c) { return c == kExitOk ? 0 : c == kExitPartial ? 1 : 2; };
  return rank(b) > rank(a) ? b : a;
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kTransport:
    case ErrorCode::kUnknownSession:
    case ErrorCode::kSaturated:
      return kExitTransport;
    case ErrorCode::kNumeric:
    case ErrorCode::kSampling:
      return kExitPartial;
    default:
      return kExitConfig;
  }
}

void CliOverrides::apply(RunConfig& config) const {
  if (seed) config.sampling.seed = *seed;
  if (alpha) {
    if (!(*alpha >= 0.0)) fail(ErrorCode::kConfig, "--alpha must be >= 0");
    config.guidance.alpha = *alpha;
  }
  if (warmup) config.guidance.warmup_tokens = *warmup;
  if (mode) config.mode = *mode;
  if (output_dir) config.output_dir = *output_dir;
  if (n_samples) {
    if (*n_samples < 1) fail(ErrorCode::kConfig, "--n-samples must be >= 1");
    config.n_samples = *n_samples;
  }
  if (max_new_tokens) {
    if (*max_new_tokens < 1) fail(ErrorCode::kConfig, "--max-new-tokens must be >= 1");
    config.max_new_tokens = *max_new_tokens;
  }
  if (parallelism) {
    if (*parallelism < 1) fail(ErrorCode::kConfig, "--parallelism must be >= 1");
    config.parallelism = *parallelism;
  }
  if (dataset) {
    if (!fs::exists(*dataset)) fail(ErrorCode::kConfig, "--dataset: no such file " + *dataset);
    config.dataset = *dataset;
  }
  if (host) config.serve.host = *host;
  if (port) {
    if (*port < 0 || *port > 65535) fail(ErrorCode::kConfig, "--port out of range");
    config.serve.port = *port;
  }
  if (config.mode == DecodeMode::kGuided && config.base.empty()) {
    fail(ErrorCode::kConfig, "mode guided needs base and guider providers");
  }
  if (config.mode == DecodeMode::kBudgetForcing && config.forcing_tokens.empty()) {
    fail(ErrorCode::kConfig, "mode budget_forcing needs forcing_tokens");
  }
}

int cmd_decode(const std::string& config_path, const CliOverrides& overrides, std::ostream& out,
               std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_config(config_path, overrides);
    const auto questions = load_dataset(cfg);
    const auto engine = build_engine(cfg, cfg.mode == DecodeMode::kGuided);
    const auto outcome = run_decode(*engine, cfg, questions, cfg.output_dir, err);
    out << "wrote " << questions.size() << " trace files (" << cfg.n_samples
        << " samples each) to " << (fs::path(cfg.output_dir) / "traces").string() << "\n";
    return outcome.exit_code;
  });
}

int cmd_sweep(const std::string& config_path, const CliOverrides& overrides, std::ostream& out,
              std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_config(config_path, overrides);
    if (cfg.sweep.empty()) fail(ErrorCode::kConfig, "sweep: no variants configured");
    const auto questions = load_dataset(cfg);

    std::vector<std::pair<std::string, RunConfig>> variants;
    for (double a : cfg.sweep.alphas) {
      RunConfig v = cfg;
      v.mode = DecodeMode::kGuided;
      v.guidance.alpha = a;
      variants.emplace_back("alpha_" + format_g(a), std::move(v));
    }
    for (std::size_t w : cfg.sweep.warmups) {
      RunConfig v = cfg;
      v.mode = DecodeMode::kGuided;
      v.guidance.warmup_tokens = w;
      variants.emplace_back("warmup_" + std::to_string(w), std::move(v));
    }
    if (cfg.sweep.target_only) {
      RunConfig v = cfg;
      v.mode = DecodeMode::kTargetOnly;
      variants.emplace_back("target_only", std::move(v));
    }
    if (cfg.sweep.budget_forcing) {
      RunConfig v = cfg;
      v.mode = DecodeMode::kBudgetForcing;
      variants.emplace_back("budget_forcing", std::move(v));
    }
    std::set<std::string> names;
    for (const auto& [name, _] : variants) {
      if (!names.insert(name).second) fail(ErrorCode::kConfig, "sweep: duplicate variant " + name);
    }

    const bool any_guided = !cfg.sweep.alphas.empty() || !cfg.sweep.warmups.empty();
    const auto engine = build_engine(cfg, any_guided);

    int code = kExitOk;
    std::ostringstream tsv, txt;
    tsv << "variant\tdataset\tquestions\tsamples\tpass@1\tpass@8\tavg_tokens\n";
    char line[256];
    std::snprintf(line, sizeof(line), "%-18s %-16s %9s %6s %8s %8s %10s\n", "variant", "dataset",
                  "questions", "n", "pass@1", "pass@8", "# token");
    txt << line;
    for (const auto& [name, v] : variants) {
      const fs::path dir = fs::path(cfg.output_dir) / name;
      const auto decoded = run_decode(*engine, v, questions, dir, err);
      code = worst(code, decoded.exit_code);
      const auto evaluated =
          evaluate_traces(decoded.traces, questions, eval::PassAtKEstimator::kAnyOf, err);
      const auto rows = write_eval_outputs(dir, evaluated, eval::PassAtKEstimator::kAnyOf);
      for (const auto& r : rows) {
        char p8[32] = "NA";
        if (r.pass_at_8) std::snprintf(p8, sizeof(p8), "%.6f", *r.pass_at_8);
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%s\t%s\t%zu\t%zu\t%.6f\t%s\t%.3f\n", name.c_str(),
                      r.dataset.c_str(), r.questions, r.samples_per_question, r.pass_at_1, p8,
                      r.avg_tokens);
        tsv << buf;
        char p8_text[32] = "-";
        if (r.pass_at_8) std::snprintf(p8_text, sizeof(p8_text), "%.1f", 100.0 * *r.pass_at_8);
        std::snprintf(buf, sizeof(buf), "%-18s %-16s %9zu %6zu %8.1f %8s %10.1f\n", name.c_str(),
                      r.dataset.c_str(), r.questions, r.samples_per_question,
                      100.0 * r.pass_at_1, p8_text, r.avg_tokens);
        txt << buf;
      }
    }
    txt << "(pass@k in percent; pass@8 estimator: any_of)\n";
    write_file(fs::path(cfg.output_dir) / "sweep_summary.tsv", tsv.str());
    write_file(fs::path(cfg.output_dir) / "sweep_summary.txt", txt.str());
    out << txt.str();
    return code;
  });
}

int cmd_eval(const EvalOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (options.dataset.empty()) fail(ErrorCode::kConfig, "eval needs a dataset");
    if (options.output_dir.empty()) fail(ErrorCode::kConfig, "eval needs an output directory");
    std::optional<prefs::Origin> origin;
    if (options.origin) {
      try {
        origin = prefs::parse_origin(*options.origin);
      } catch (const Error& e) {
        fail(ErrorCode::kConfig, std::string("--origin: ") + e.what());
      }
    }
    const auto questions = eval::load_questions_file(options.dataset);
    std::vector<DecodeTrace> traces;
    for (const auto& f : trace_files(options.traces)) {
      auto loaded = read_traces_file(f.string());
      traces.insert(traces.end(), std::make_move_iterator(loaded.begin()),
                    std::make_move_iterator(loaded.end()));
    }
    const auto estimator =
        options.unbiased ? eval::PassAtKEstimator::kUnbiased : eval::PassAtKEstimator::kAnyOf;
    const auto outcome = evaluate_traces(traces, questions, estimator, err);
    const auto rows = write_eval_outputs(options.output_dir, outcome, estimator);

    if (origin) {
      std::map<std::string, const eval::EvalQuestion*> by_id;
      for (const auto& q : questions) by_id[q.id] = &q;
      std::string graded;
      for (const auto& r : outcome.records) {
        for (const auto& c : r.completions) {
          prefs::GradedCompletion g{r.question_id, by_id[r.question_id]->prompt, *origin, c.text,
                                    c.correct};
          graded += prefs::graded_to_json(g).dump() + "\n";
        }
      }
      write_file(fs::path(options.output_dir) / "graded.jsonl", graded);
    }

    out << eval::format_table_text(rows, estimator);
    int code = kExitOk;
    if (!outcome.unmatched.empty()) {
      err << "unmatched question ids (excluded):";
      for (const auto& id : outcome.unmatched) err << " " << id;
      err << "\n";
      code = kExitPartial;
    }
    if (outcome.excluded_traces > 0) code = kExitPartial;
    if (traces.empty()) {
      err << "no traces found under " << options.traces << "\n";
      code = kExitPartial;
    }
    return code;
  });
}

int cmd_build_prefs(const BuildPrefsOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (options.output_dir.empty()) fail(ErrorCode::kConfig, "build-prefs needs an output dir");
    std::vector<prefs::GradedCompletion> graded;
    std::stringstream paths(options.graded);
    std::string path;
    while (std::getline(paths, path, ',')) {
      if (path.empty()) continue;
      auto part = prefs::load_graded_file(path);
      graded.insert(graded.end(), part.begin(), part.end());
    }
    if (graded.empty()) fail(ErrorCode::kConfig, "no graded completions in " + options.graded);

    const prefs::BuildOptions build{options.dedup};
    prefs::PairSet set = options.guider_only ? prefs::build_guider_only_pairs(graded, build)
                                             : prefs::build_pairs(graded, build);
    if (options.subsample) {
      set.pairs = prefs::subsample(set.pairs, *options.subsample, options.seed);
      set.counts = prefs::count_pairs(set.pairs);
    }

    make_dirs(options.output_dir);
    std::string lines;
    for (const auto& p : set.pairs) lines += prefs::pair_to_json(p).dump() + "\n";
    write_file(fs::path(options.output_dir) / "pairs.jsonl", lines);
    const json counts = prefs::counts_manifest(set.counts);
    write_file(fs::path(options.output_dir) / "counts.json", counts.dump(2) + "\n");
    // Guider-only pairs form a single dataset, which gets the full weight.
    const double lambda = options.guider_only || set.counts.type1 + set.counts.type2 == 0
                              ? 1.0
                              : prefs::compute_lambda(set.counts.type1, set.counts.type2);
    write_file(fs::path(options.output_dir) / "training_config.json",
               prefs::training_config_manifest(lambda).dump(2) + "\n");

    out << "type1 " << set.counts.type1 << ", type2 " << set.counts.type2 << ", guider_only "
        << set.counts.guider_only << ", lambda " << lambda << "\n";
    return kExitOk;
  });
}

int cmd_dpo_check(const DpoCheckOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::ifstream spec_in(options.spec);
    if (!spec_in) fail(ErrorCode::kConfig, "cannot open policy spec " + options.spec);
    json spec;
    try {
      spec = json::parse(spec_in);
    } catch (const json::parse_error& e) {
      fail(ErrorCode::kConfig, options.spec + ": " + e.what());
    }
    const auto vocab = spec.at("vocab").get<std::vector<std::string>>();
    const auto reference = dpo::ToyPolicy::from_json(spec.at("reference"));
    const auto policy = options.reference_check ? reference
                                                : dpo::ToyPolicy::from_json(spec.at("policy"));
    if (reference.vocab_size() != vocab.size() || policy.vocab_size() != vocab.size()) {
      fail(ErrorCode::kConfig, "policy vocab_size must equal the number of vocab words");
    }

    std::vector<dpo::TokenPair> d1, d2;
    for (const auto& p : prefs::load_pairs_file(options.pairs)) {
      (p.type == prefs::PairType::kType2 ? d2 : d1).push_back(dpo::tokenize_pair(p, vocab));
    }
    if (d1.empty() && d2.empty()) fail(ErrorCode::kConfig, "no pairs in " + options.pairs);

    dpo::DpoConfig config;
    config.beta = spec.value("beta", config.beta);
    if (spec.contains("lambda")) {
      config.lambda = spec["lambda"].get<double>();
    } else if (!d1.empty() && !d2.empty()) {
      config.lambda = prefs::compute_lambda(d1.size(), d2.size());
    }
    config.validate();
    const double step_size = spec.value("step_size", 0.1);

    const double loss = dpo::dpo_loss(policy, reference, d1, d2, config);
    const auto grad = dpo::dpo_gradient(policy, reference, d1, d2, config);
    const auto fd = dpo::finite_difference_gradient(policy, reference, d1, d2, config);
    double diff = 0.0, norm_g = 0.0, norm_fd = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      diff += (grad[i] - fd[i]) * (grad[i] - fd[i]);
      norm_g += grad[i] * grad[i];
      norm_fd += fd[i] * fd[i];
    }
    diff = std::sqrt(diff);
    norm_g = std::sqrt(norm_g);
    norm_fd = std::sqrt(norm_fd);
    const double rel = diff / std::max(norm_g + norm_fd, 1e-300);
    const auto step = dpo::gradient_step_improves(policy, reference, d1, d2, config, step_size);

    json report = {{"schema", "logitfuse.dpo_check/1"},
                   {"pairs", {{"d1", d1.size()}, {"d2", d2.size()}}},
                   {"beta", config.beta},
                   {"lambda", config.lambda},
                   {"loss", loss},
                   {"gradient", grad},
                   {"gradient_norm", norm_g},
                   {"finite_difference", {{"h", 1e-5},
                                          {"abs_error", diff},
                                          {"relative_error", diff == 0.0 ? 0.0 : rel}}},
                   {"step", {{"step_size", step_size},
                             {"loss_before", step.loss_before},
                             {"loss_after", step.loss_after},
                             {"improved", step.improved}}}};
    int code = kExitOk;
    if (options.reference_check) {
      const double ln2 = std::log(2.0);
      const bool ok = std::abs(loss - ln2) <= 1e-12;
      report["reference_check"] = {
          {"expected", ln2}, {"abs_error", std::abs(loss - ln2)}, {"ok", ok}};
      if (!ok) {
        err << "reference check failed: loss " << loss << " != ln 2\n";
        code = kExitPartial;
      }
    }
    const std::string text = report.dump(2) + "\n";
    if (!options.output.empty()) {
      const fs::path parent = fs::path(options.output).parent_path();
      if (!parent.empty()) make_dirs(parent);
      write_file(options.output, text);
    }
    out << text;
    return code;
  });
}

int cmd_serve(const std::string& config_path, const CliOverrides& overrides, std::ostream& out,
              std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_config(config_path, overrides);
    ServiceOptions options;
    options.max_concurrent = cfg.serve.max_concurrent;
    options.defaults = cfg.request_template();

    std::unique_ptr<FusionService> service;
    try {
      service = std::make_unique<FusionService>(build_engine(cfg, !cfg.base.empty()), options);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kVocabMismatch) throw;
      err << "warning: " << e.what() << "; serving 409 for every generate request\n";
      service = std::make_unique<FusionService>(e.what(), options);
    }
    service->start(cfg.serve.host, cfg.serve.port);
    out << "listening on " << service->endpoint() << std::endl;
    while (!shutdown_requested()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    out << "draining in-flight requests" << std::endl;
    service->stop();
    return kExitOk;
  });
}

int cmd_serve_provider(const std::string& fixture, const std::string& host, int port,
                       std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    wire::ProviderServer server(TableLM::from_file(fixture));
    server.start(host, port);
    out << "listening on " << server.endpoint() << std::endl;
    while (!shutdown_requested()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.stop();
    return kExitOk;
  });
}

void request_shutdown() { g_shutdown.store(true); }
void reset_shutdown() { g_shutdown.store(false); }
bool shutdown_requested() { return g_shutdown.load(); }

}  // namespace logitfuse::cli
