// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "logitfuse/config.hpp"
#include "logitfuse/decode.hpp"

namespace logitfuse::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitTransport = 3,
  kExitPartial = 4,
};

// Maps a library error onto the CLI exit-code scheme.
int exit_code_for(ErrorCode code);

// Command-line values that take precedence over the config file.
struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<std::size_t> warmup;
  std::optional<DecodeMode> mode;
  std::optional<std::string> output_dir;
  std::optional<std::size_t> n_samples;
  std::optional<std::size_t> max_new_tokens;
  std::optional<std::size_t> parallelism;
  std::optional<std::string> dataset;
  std::optional<std::string> host;
  std::optional<int> port;

  void apply(RunConfig& config) const;
};

// Output: <output_dir>/traces/<question id>.trace.jsonl (n_samples traces
// each) plus <output_dir>/manifest.json.
int cmd_decode(const std::string& config_path, const CliOverrides& overrides,
               std::ostream& out, std::ostream& err);

// One decode output directory per variant (alpha_<a>, warmup_<w>,
// target_only, budget_forcing) and sweep_summary.{tsv,txt} at the top.
int cmd_sweep(const std::string& config_path, const CliOverrides& overrides, std::ostream& out,
              std::ostream& err);

struct EvalOptions {
  std::string traces;   // decode output dir, its traces/ dir, or one trace file
  std::string dataset;  // questions JSONL with gold answers
  std::string output_dir;
  // When set ("L" or "S"), also write graded.jsonl for build-prefs.
  std::optional<std::string> origin;
  bool unbiased = false;
};

// Writes results.jsonl, summary.{tsv,txt,json} and prints the text table.
// Trace ids missing from the dataset are listed and excluded (exit 4); an
// empty trace set gives an empty table and exit 4.
int cmd_eval(const EvalOptions& options, std::ostream& out, std::ostream& err);

struct BuildPrefsOptions {
  std::string graded;  // one or more graded.jsonl files, comma separated
  std::string output_dir;
  bool guider_only = false;
  bool dedup = false;
  std::optional<std::size_t> subsample;
  std::uint64_t seed = 0;
};

// Writes pairs.jsonl, counts.json and training_config.json.
int cmd_build_prefs(const BuildPrefsOptions& options, std::ostream& out, std::ostream& err);

struct DpoCheckOptions {
  std::string pairs;
  // {"vocab": [...], "policy": {...}, "reference": {...}, "beta"?,
  //  "lambda"?, "step_size"?}
  std::string spec;
  std::string output;  // report path; empty prints only to `out`
  // Evaluate with policy := reference, where the loss must equal ln 2.
  bool reference_check = false;
};

int cmd_dpo_check(const DpoCheckOptions& options, std::ostream& out, std::ostream& err);

// Runs the fusion service until request_shutdown() is called.
int cmd_serve(const std::string& config_path, const CliOverrides& overrides, std::ostream& out,
              std::ostream& err);

// Serves a TableLM fixture over the wire protocol until request_shutdown().
int cmd_serve_provider(const std::string& fixture, const std::string& host, int port,
                       std::ostream& out, std::ostream& err);

// Async-signal-safe: only stores to an atomic flag.
void request_shutdown();
void reset_shutdown();
bool shutdown_requested();

}  // namespace logitfuse::cli
