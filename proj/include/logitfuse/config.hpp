// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "logitfuse/decode.hpp"

namespace logitfuse {

// Where a model's logits come from: a TableLM fixture file or a wire-protocol
// endpoint. Exactly one is set.
struct ProviderSpec {
  std::string fixture;
  std::string endpoint;

  bool empty() const { return fixture.empty() && endpoint.empty(); }
};

struct SweepSpec {
  std::vector<double> alphas;
  std::vector<std::size_t> warmups;
  bool target_only = false;
  bool budget_forcing = false;

  bool empty() const {
    return alphas.empty() && warmups.empty() && !target_only && !budget_forcing;
  }
};

struct ServeSpec {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t max_concurrent = 4;
};

// Declarative run description, loaded from a JSON file:
//
//   {
//     "providers": {"target": {"fixture": "lm.json"},
//                   "base":   {"endpoint": "http://127.0.0.1:9001"},
//                   "guider": {...}},
//     "vocab_file": "tokens.json",            // optional, for detokenisation
//     "guidance": {"alpha": 1.0, "warmup_tokens": 100},
//     "sampling": {"temperature": 0.6, "top_p": 0.95, "seed": 0, "greedy": false},
//     "max_new_tokens": 8192,
//     "mode": "guided",                       // guided | target_only | budget_forcing
//     "forcing_tokens": [17], "forcing_budget": null,
//     "dataset": "questions.jsonl",
//     "n_samples": 8,
//     "output_dir": "runs/main",
//     "parallelism": 1,
//     "record_logits": false,
//     "sweep": {"alpha": [0.5, 1.0, 1.5], "warmup": [100, 0],
//               "target_only": true, "budget_forcing": true},
//     "serve": {"host": "127.0.0.1", "port": 8080, "max_concurrent": 4}
//   }
//
// Relative paths resolve against the config file's directory. Endpoints may be
// overridden with LOGITFUSE_{TARGET,BASE,GUIDER}_ENDPOINT. Validation errors
// are kConfig and name the offending key path.
struct RunConfig {
  std::filesystem::path source;
  ProviderSpec target;
  ProviderSpec base;
  ProviderSpec guider;
  std::string vocab_file;
  GuidanceConfig guidance;
  SamplingConfig sampling;
  std::size_t max_new_tokens = 8192;
  DecodeMode mode = DecodeMode::kGuided;
  std::vector<TokenId> forcing_tokens;
  std::optional<std::size_t> forcing_budget;
  std::string dataset;
  std::size_t n_samples = 8;
  std::string output_dir = "out";
  std::size_t parallelism = 1;
  bool record_logits = false;
  SweepSpec sweep;
  ServeSpec serve;

  DecodeRequest request_template() const;
};

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& source = {});
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace logitfuse
