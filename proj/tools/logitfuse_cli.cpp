// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Everything goes through the C API.

#include <csignal>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "logitfuse/logitfuse.h"

namespace {

struct RunFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<std::size_t> warmup;
  std::optional<std::string> mode;
  std::optional<std::string> output_dir;
  std::optional<std::size_t> n_samples;
  std::optional<std::size_t> max_new_tokens;
  std::optional<std::size_t> parallelism;
  std::optional<std::string> dataset;
  std::optional<std::string> host;
  std::optional<int> port;

  lf_overrides to_c() const {
    lf_overrides o;
    lf_overrides_init(&o);
    if (seed) o.has_seed = 1, o.seed = *seed;
    if (alpha) o.has_alpha = 1, o.alpha = *alpha;
    if (warmup) o.has_warmup = 1, o.warmup = *warmup;
    if (mode) o.mode = mode->c_str();
    if (output_dir) o.output_dir = output_dir->c_str();
    if (n_samples) o.has_n_samples = 1, o.n_samples = *n_samples;
    if (max_new_tokens) o.has_max_new_tokens = 1, o.max_new_tokens = *max_new_tokens;
    if (parallelism) o.has_parallelism = 1, o.parallelism = *parallelism;
    if (dataset) o.dataset = dataset->c_str();
    if (host) o.host = host->c_str();
    if (port) o.has_port = 1, o.port = *port;
    return o;
  }
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("config", f.config, "Run configuration (JSON)")->required();
  cmd->add_option("--seed", f.seed, "Base sampling seed; sample i uses seed + i");
  cmd->add_option("--alpha", f.alpha, "Guidance strength (>= 0)");
  cmd->add_option("--warmup", f.warmup, "Generated tokens decoded without guidance");
  cmd->add_option("--mode", f.mode, "guided | target_only | budget_forcing")
      ->check(CLI::IsMember({"guided", "target_only", "budget_forcing"}));
  cmd->add_option("-o,--output-dir", f.output_dir, "Output directory");
  cmd->add_option("-n,--n-samples", f.n_samples, "Samples per question");
  cmd->add_option("--max-new-tokens", f.max_new_tokens, "Generation cap per sample");
  cmd->add_option("--parallelism", f.parallelism, "Concurrent decode loops");
  cmd->add_option("--dataset", f.dataset, "Questions JSONL");
}

extern "C" void on_signal(int) { lf_request_shutdown(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"logitfuse: guided decoding by logit arithmetic"};
  app.require_subcommand(1);
  app.set_version_flag("--version", lf_version());

  RunFlags decode_flags, sweep_flags, serve_flags;
  auto* decode = app.add_subcommand("decode", "Decode every dataset question to trace files");
  add_run_flags(decode, decode_flags);
  auto* sweep = app.add_subcommand("sweep", "Run the configured ablation variants");
  add_run_flags(sweep, sweep_flags);
  auto* serve = app.add_subcommand("serve", "Serve POST /v1/generate");
  add_run_flags(serve, serve_flags);
  serve->add_option("--host", serve_flags.host, "Bind address");
  serve->add_option("--port", serve_flags.port, "Bind port (0 picks one)");

  std::string traces, dataset, eval_out;
  std::optional<std::string> origin;
  bool unbiased = false;
  auto* eval = app.add_subcommand("eval", "Grade traces and print the summary table");
  eval->add_option("traces", traces, "Decode output dir, traces dir or trace file")->required();
  eval->add_option("--dataset", dataset, "Questions JSONL with answers")->required();
  eval->add_option("-o,--output-dir", eval_out, "Where results and summaries go")->required();
  eval->add_option("--origin", origin, "Also write graded.jsonl tagged L or S")
      ->check(CLI::IsMember({"L", "S"}));
  eval->add_flag("--unbiased", unbiased, "Unbiased pass@8 estimator instead of any-of");

  std::vector<std::string> graded;
  std::string prefs_out;
  bool guider_only = false, dedup = false;
  std::optional<std::size_t> subsample;
  std::uint64_t prefs_seed = 0;
  auto* prefs = app.add_subcommand("build-prefs", "Build preference pairs from graded samples");
  prefs->add_option("graded", graded, "graded.jsonl files")->required();
  prefs->add_option("-o,--output-dir", prefs_out, "Output directory")->required();
  prefs->add_flag("--guider-only", guider_only, "Pair guider samples among themselves");
  prefs->add_flag("--dedup", dedup, "Drop repeated completions within a question");
  prefs->add_option("--subsample", subsample, "Keep N pairs drawn without replacement");
  prefs->add_option("--seed", prefs_seed, "Subsampling seed");

  std::string pairs, spec, dpo_out;
  bool reference_check = false;
  auto* dpo = app.add_subcommand("dpo-check", "Loss and gradient report on a toy policy");
  dpo->add_option("pairs", pairs, "pairs.jsonl")->required();
  dpo->add_option("--spec", spec, "Toy policy spec (JSON)")->required();
  dpo->add_option("-o,--output", dpo_out, "Write the report here as well");
  dpo->add_flag("--reference-check", reference_check, "Evaluate at policy = reference");

  std::string fixture, provider_host = "127.0.0.1";
  int provider_port = 0;
  auto* serve_provider =
      app.add_subcommand("serve-provider", "Serve a table LM fixture over the wire protocol");
  serve_provider->add_option("fixture", fixture, "Table LM fixture (JSON)")->required();
  serve_provider->add_option("--host", provider_host, "Bind address");
  serve_provider->add_option("--port", provider_port, "Bind port (0 picks one)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? LF_EXIT_OK : LF_EXIT_CONFIG;
  }

  if (*decode) {
    const auto o = decode_flags.to_c();
    return lf_cmd_decode(decode_flags.config.c_str(), &o);
  }
  if (*sweep) {
    const auto o = sweep_flags.to_c();
    return lf_cmd_sweep(sweep_flags.config.c_str(), &o);
  }
  if (*eval) {
    return lf_cmd_eval(traces.c_str(), dataset.c_str(), eval_out.c_str(),
                       origin ? origin->c_str() : nullptr, unbiased ? 1 : 0);
  }
  if (*prefs) {
    std::string joined;
    for (const auto& g : graded) joined += (joined.empty() ? "" : ",") + g;
    return lf_cmd_build_prefs(joined.c_str(), prefs_out.c_str(), guider_only, dedup,
                              subsample.has_value(), subsample.value_or(0), prefs_seed);
  }
  if (*dpo) {
    return lf_cmd_dpo_check(pairs.c_str(), spec.c_str(), dpo_out.empty() ? nullptr
                                                                         : dpo_out.c_str(),
                            reference_check);
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  if (*serve) {
    const auto o = serve_flags.to_c();
    return lf_cmd_serve(serve_flags.config.c_str(), &o);
  }
  return lf_cmd_serve_provider(fixture.c_str(), provider_host.c_str(), provider_port);
}
