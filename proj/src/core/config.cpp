// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "logitfuse/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace logitfuse {

using nlohmann::json;

namespace {

class ConfigReader {
 public:
  ConfigReader(std::string file, std::filesystem::path base_dir)
      : file_(std::move(file)), base_dir_(std::move(base_dir)) {}

  [[noreturn]] void error(const std::string& path, const std::string& message) const {
    fail(ErrorCode::kConfig, file_ + ": " + (path.empty() ? "" : path + ": ") + message);
  }

  void check_keys(const json& obj, const std::string& path,
                  std::initializer_list<const char*> allowed) const {
    if (!obj.is_object()) error(path, "expected an object");
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items()) {
      if (!keys.count(key)) error(join(path, key), "unknown key");
    }
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  double number(const json& v, const std::string& path) const {
    if (!v.is_number()) error(path, "expected a number");
    return v.get<double>();
  }

  std::uint64_t count(const json& v, const std::string& path) const {
    if (!v.is_number_unsigned()) error(path, "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const json& v, const std::string& path) const {
    if (!v.is_boolean()) error(path, "expected true or false");
    return v.get<bool>();
  }

  std::string string(const json& v, const std::string& path) const {
    if (!v.is_string()) error(path, "expected a string");
    return v.get<std::string>();
  }

  std::vector<TokenId> tokens(const json& v, const std::string& path) const {
    if (!v.is_array()) error(path, "expected an array of token ids");
    std::vector<TokenId> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto t = count(v[i], path + "[" + std::to_string(i) + "]");
      if (t > UINT32_MAX) error(path + "[" + std::to_string(i) + "]", "token id too large");
      out.push_back(static_cast<TokenId>(t));
    }
    return out;
  }

  std::string existing_path(const json& v, const std::string& path) const {
    const std::filesystem::path p = string(v, path);
    const auto resolved = p.is_absolute() ? p : base_dir_ / p;
    if (!std::filesystem::exists(resolved)) {
      error(path, "path does not exist: " + resolved.string());
    }
    return resolved.string();
  }

  std::string output_path(const json& v, const std::string& path) const {
    const std::filesystem::path p = string(v, path);
    return (p.is_absolute() ? p : base_dir_ / p).string();
  }

  ProviderSpec provider(const json& v, const std::string& path) const {
    check_keys(v, path, {"fixture", "endpoint"});
    ProviderSpec spec;
    if (v.contains("fixture")) spec.fixture = existing_path(v["fixture"], join(path, "fixture"));
    if (v.contains("endpoint")) spec.endpoint = string(v["endpoint"], join(path, "endpoint"));
    if (spec.fixture.empty() == spec.endpoint.empty()) {
      error(path, "set exactly one of fixture or endpoint");
    }
    return spec;
  }

 private:
  std::string file_;
  std::filesystem::path base_dir_;
};

std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

void apply_env_override(ProviderSpec& spec, const char* var) {
  if (const char* v = std::getenv(var); v && *v) {
    spec.fixture.clear();
    spec.endpoint = v;
  }
}

}  // namespace

DecodeRequest RunConfig::request_template() const {
  DecodeRequest r;
  r.guidance = guidance;
  r.sampling = sampling;
  r.max_new_tokens = max_new_tokens;
  r.mode = mode;
  r.forcing_tokens = forcing_tokens;
  r.forcing_budget = forcing_budget;
  r.record_logits = record_logits;
  return r;
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& source) {
  const std::string file = source.empty() ? "<config>" : source.string();
  const auto base_dir = source.empty() ? std::filesystem::current_path() : source.parent_path();
  ConfigReader rd(file, base_dir.empty() ? std::filesystem::path(".") : base_dir);

  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kConfig, file + ": " + line_col(text, e.byte > 0 ? e.byte - 1 : 0) +
                                 ": invalid JSON: " + e.what());
  }
  rd.check_keys(doc, "",
                {"providers", "vocab_file", "guidance", "sampling", "max_new_tokens", "mode",
                 "forcing_tokens", "forcing_budget", "dataset", "n_samples", "output_dir",
                 "parallelism", "record_logits", "sweep", "serve"});

  RunConfig cfg;
  cfg.source = source;

  if (!doc.contains("providers")) rd.error("providers", "missing");
  const auto& providers = doc["providers"];
  rd.check_keys(providers, "providers", {"target", "base", "guider"});
  if (!providers.contains("target")) rd.error("providers.target", "missing");
  cfg.target = rd.provider(providers["target"], "providers.target");
  if (providers.contains("base")) cfg.base = rd.provider(providers["base"], "providers.base");
  if (providers.contains("guider")) {
    cfg.guider = rd.provider(providers["guider"], "providers.guider");
  }
  if (cfg.base.empty() != cfg.guider.empty()) {
    rd.error("providers", "base and guider must be configured together");
  }

  if (doc.contains("vocab_file")) cfg.vocab_file = rd.existing_path(doc["vocab_file"], "vocab_file");

  if (doc.contains("guidance")) {
    const auto& g = doc["guidance"];
    rd.check_keys(g, "guidance", {"alpha", "warmup_tokens"});
    if (g.contains("alpha")) cfg.guidance.alpha = rd.number(g["alpha"], "guidance.alpha");
    if (g.contains("warmup_tokens")) {
      cfg.guidance.warmup_tokens = rd.count(g["warmup_tokens"], "guidance.warmup_tokens");
    }
    if (!(cfg.guidance.alpha >= 0.0)) rd.error("guidance.alpha", "must be >= 0");
  }

  if (doc.contains("sampling")) {
    const auto& s = doc["sampling"];
    rd.check_keys(s, "sampling", {"temperature", "top_p", "seed", "greedy"});
    if (s.contains("temperature")) {
      cfg.sampling.temperature = rd.number(s["temperature"], "sampling.temperature");
    }
    if (s.contains("top_p")) cfg.sampling.top_p = rd.number(s["top_p"], "sampling.top_p");
    if (s.contains("seed")) cfg.sampling.seed = rd.count(s["seed"], "sampling.seed");
    if (s.contains("greedy")) cfg.sampling.greedy = rd.boolean(s["greedy"], "sampling.greedy");
    if (!(cfg.sampling.temperature > 0.0)) rd.error("sampling.temperature", "must be > 0");
    if (!(cfg.sampling.top_p > 0.0 && cfg.sampling.top_p <= 1.0)) {
      rd.error("sampling.top_p", "must lie in (0, 1]");
    }
  }

  if (doc.contains("max_new_tokens")) {
    cfg.max_new_tokens = rd.count(doc["max_new_tokens"], "max_new_tokens");
    if (cfg.max_new_tokens < 1) rd.error("max_new_tokens", "must be >= 1");
  }
  if (doc.contains("mode")) {
    try {
      cfg.mode = parse_decode_mode(rd.string(doc["mode"], "mode"));
    } catch (const Error& e) {
      rd.error("mode", e.what());
    }
  }
  if (doc.contains("forcing_tokens")) {
    cfg.forcing_tokens = rd.tokens(doc["forcing_tokens"], "forcing_tokens");
  }
  if (doc.contains("forcing_budget") && !doc["forcing_budget"].is_null()) {
    cfg.forcing_budget = rd.count(doc["forcing_budget"], "forcing_budget");
  }
  if (doc.contains("dataset")) cfg.dataset = rd.existing_path(doc["dataset"], "dataset");
  if (doc.contains("n_samples")) {
    cfg.n_samples = rd.count(doc["n_samples"], "n_samples");
    if (cfg.n_samples < 1) rd.error("n_samples", "must be >= 1");
  }
  if (doc.contains("output_dir")) cfg.output_dir = rd.output_path(doc["output_dir"], "output_dir");
  else cfg.output_dir = rd.output_path(json("out"), "output_dir");
  if (doc.contains("parallelism")) {
    cfg.parallelism = rd.count(doc["parallelism"], "parallelism");
    if (cfg.parallelism < 1) rd.error("parallelism", "must be >= 1");
  }
  if (doc.contains("record_logits")) {
    cfg.record_logits = rd.boolean(doc["record_logits"], "record_logits");
  }

  if (doc.contains("sweep")) {
    const auto& s = doc["sweep"];
    rd.check_keys(s, "sweep", {"alpha", "warmup", "target_only", "budget_forcing"});
    if (s.contains("alpha")) {
      if (!s["alpha"].is_array()) rd.error("sweep.alpha", "expected an array");
      for (std::size_t i = 0; i < s["alpha"].size(); ++i) {
        const auto where = "sweep.alpha[" + std::to_string(i) + "]";
        const double a = rd.number(s["alpha"][i], where);
        if (!(a >= 0.0)) rd.error(where, "must be >= 0");
        cfg.sweep.alphas.push_back(a);
      }
    }
    if (s.contains("warmup")) {
      if (!s["warmup"].is_array()) rd.error("sweep.warmup", "expected an array");
      for (std::size_t i = 0; i < s["warmup"].size(); ++i) {
        cfg.sweep.warmups.push_back(
            rd.count(s["warmup"][i], "sweep.warmup[" + std::to_string(i) + "]"));
      }
    }
    if (s.contains("target_only")) {
      cfg.sweep.target_only = rd.boolean(s["target_only"], "sweep.target_only");
    }
    if (s.contains("budget_forcing")) {
      cfg.sweep.budget_forcing = rd.boolean(s["budget_forcing"], "sweep.budget_forcing");
    }
  }

  if (doc.contains("serve")) {
    const auto& s = doc["serve"];
    rd.check_keys(s, "serve", {"host", "port", "max_concurrent"});
    if (s.contains("host")) cfg.serve.host = rd.string(s["host"], "serve.host");
    if (s.contains("port")) {
      const auto port = rd.count(s["port"], "serve.port");
      if (port > 65535) rd.error("serve.port", "must be <= 65535");
      cfg.serve.port = static_cast<int>(port);
    }
    if (s.contains("max_concurrent")) {
      cfg.serve.max_concurrent = rd.count(s["max_concurrent"], "serve.max_concurrent");
      if (cfg.serve.max_concurrent < 1) rd.error("serve.max_concurrent", "must be >= 1");
    }
  }

  const bool forcing_used = cfg.mode == DecodeMode::kBudgetForcing || cfg.sweep.budget_forcing;
  if (forcing_used && cfg.forcing_tokens.empty()) {
    rd.error("forcing_tokens", "budget forcing needs a non-empty forcing_tokens list");
  }
  const bool guided_used = cfg.mode == DecodeMode::kGuided || !cfg.sweep.alphas.empty() ||
                           !cfg.sweep.warmups.empty();
  if (guided_used && cfg.base.empty()) {
    rd.error("providers", "guided decoding needs base and guider providers");
  }

  apply_env_override(cfg.target, "LOGITFUSE_TARGET_ENDPOINT");
  if (!cfg.base.empty()) {
    apply_env_override(cfg.base, "LOGITFUSE_BASE_ENDPOINT");
    apply_env_override(cfg.guider, "LOGITFUSE_GUIDER_ENDPOINT");
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfig, path.string() + ": cannot open config file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str(), std::filesystem::absolute(path));
}

}  // namespace logitfuse
