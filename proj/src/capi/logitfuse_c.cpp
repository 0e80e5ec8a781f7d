// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "logitfuse/logitfuse.h"

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <string>

#include "logitfuse/commands.hpp"
#include "logitfuse/decode.hpp"
#include "logitfuse/eval.hpp"
#include "logitfuse/prefs.hpp"
#include "logitfuse/remote_provider.hpp"
#include "logitfuse/trace_io.hpp"
#include "logitfuse/wire.hpp"

using namespace logitfuse;

struct lf_rng {
  Rng rng;
};

struct lf_provider {
  ProviderPtr provider;
};

struct lf_provider_server {
  std::unique_ptr<wire::ProviderServer> server;
};

struct lf_engine {
  std::shared_ptr<DecodeEngine> engine;
};

struct lf_trace {
  DecodeTrace trace;
  std::vector<std::uint32_t> tokens;
};

namespace {

thread_local std::string g_last_error;

lf_status status_of(ErrorCode code) { return static_cast<lf_status>(static_cast<int>(code)); }

template <typename Fn>
lf_status guard(Fn&& fn) {
  try {
    fn();
    return LF_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return LF_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return LF_ERR_INTERNAL;
  }
}

void require(bool condition, const char* message) {
  if (!condition) fail(ErrorCode::kArgument, message);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void copy_hex(const std::string& hex, char out[65]) {
  std::memcpy(out, hex.c_str(), std::min<std::size_t>(hex.size(), 64));
  out[64] = '\0';
}

std::string opt(const char* s) { return s ? std::string(s) : std::string(); }

// Exceptions must not cross the C boundary; the command layer already maps
// library errors to exit codes, this catches whatever is left.
template <typename Fn>
int run_command(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return LF_EXIT_CONFIG;
  }
}

cli::CliOverrides to_overrides(const lf_overrides* o) {
  cli::CliOverrides out;
  if (!o) return out;
  if (o->has_seed) out.seed = o->seed;
  if (o->has_alpha) out.alpha = o->alpha;
  if (o->has_warmup) out.warmup = o->warmup;
  if (o->mode) {
    try {
      out.mode = parse_decode_mode(o->mode);
    } catch (const Error& e) {
      fail(ErrorCode::kConfig, std::string("--mode: ") + e.what());
    }
  }
  if (o->output_dir) out.output_dir = o->output_dir;
  if (o->has_n_samples) out.n_samples = o->n_samples;
  if (o->has_max_new_tokens) out.max_new_tokens = o->max_new_tokens;
  if (o->has_parallelism) out.parallelism = o->parallelism;
  if (o->dataset) out.dataset = o->dataset;
  if (o->host) out.host = o->host;
  if (o->has_port) out.port = o->port;
  return out;
}

}  // namespace

extern "C" {

const char* lf_version(void) { return "0.1.0"; }

const char* lf_last_error(void) { return g_last_error.c_str(); }

const char* lf_status_name(lf_status status) {
  if (status == LF_OK) return "ok";
  if (status == LF_ERR_INTERNAL) return "internal";
  return error_code_name(static_cast<ErrorCode>(static_cast<int>(status)));
}

void lf_string_free(char* s) { std::free(s); }

lf_status lf_fuse(const float* target, const float* guider, const float* base, size_t n,
                  double alpha, float* out) {
  return guard([&] {
    require(target && guider && base && out, "null buffer");
    fuse_into({target, n}, {guider, n}, {base, n}, static_cast<float>(alpha), {out, n});
  });
}

lf_status lf_fuse_with_warmup(const float* target, const float* guider, const float* base,
                              size_t n, double alpha, size_t warmup_tokens,
                              size_t generated_count, float* out) {
  return guard([&] {
    require(target && guider && base && out, "null buffer");
    GuidanceConfig config{alpha, warmup_tokens};
    const auto fused = fuse_with_warmup({target, n}, {guider, n}, {base, n}, config,
                                        generated_count);
    std::copy(fused.begin(), fused.end(), out);
  });
}

lf_status lf_softmax(const float* logits, size_t n, double temperature, double* out) {
  return guard([&] {
    require(logits && out, "null buffer");
    const auto p = to_probabilities({logits, n}, temperature);
    std::copy(p.begin(), p.end(), out);
  });
}

lf_status lf_top_p_filter(const double* probs, size_t n, double top_p, double* out) {
  return guard([&] {
    require(probs && out, "null buffer");
    const auto p = top_p_filter({probs, n}, top_p);
    std::copy(p.begin(), p.end(), out);
  });
}

lf_status lf_rng_create(uint64_t seed, lf_rng** out) {
  return guard([&] {
    require(out, "null output");
    *out = new lf_rng{Rng(seed)};
  });
}

void lf_rng_destroy(lf_rng* rng) { delete rng; }

double lf_rng_uniform(lf_rng* rng) { return rng ? rng->rng.uniform() : 0.0; }

uint64_t lf_rng_draws(const lf_rng* rng) { return rng ? rng->rng.draws() : 0; }

lf_status lf_sample_token(const float* logits, size_t n, double temperature, double top_p,
                          int greedy, lf_rng* rng, uint32_t* token) {
  return guard([&] {
    require(logits && rng && token, "null argument");
    SamplingConfig config;
    config.temperature = temperature;
    config.top_p = top_p;
    config.greedy = greedy != 0;
    *token = sample_token({logits, n}, config, rng->rng);
  });
}

lf_status lf_vocab_hash(const char* const* tokens, const size_t* lengths, size_t n,
                        char hex_out[65]) {
  return guard([&] {
    require((tokens && lengths) || n == 0, "null token table");
    require(hex_out, "null output");
    std::vector<std::string> table;
    table.reserve(n);
    for (size_t i = 0; i < n; ++i) table.emplace_back(tokens[i], lengths[i]);
    copy_hex(to_hex(hash_token_table(table)), hex_out);
  });
}

lf_status lf_provider_from_fixture(const char* path, lf_provider** out) {
  return guard([&] {
    require(path && out, "null argument");
    *out = new lf_provider{TableLM::from_file(path)};
  });
}

lf_status lf_provider_from_fixture_json(const char* json_text, lf_provider** out) {
  return guard([&] {
    require(json_text && out, "null argument");
    *out = new lf_provider{TableLM::from_json_text(json_text)};
  });
}

lf_status lf_provider_remote(const char* endpoint, lf_provider** out) {
  return guard([&] {
    require(endpoint && out, "null argument");
    *out = new lf_provider{std::make_shared<RemoteProvider>(endpoint)};
  });
}

void lf_provider_destroy(lf_provider* provider) { delete provider; }

lf_status lf_provider_vocab(lf_provider* provider, uint32_t* size, uint32_t* eos_id,
                            char hash_hex_out[65]) {
  return guard([&] {
    require(provider, "null provider");
    const auto d = provider->provider->describe_vocab();
    if (size) *size = d.size;
    if (eos_id) *eos_id = d.eos_id;
    if (hash_hex_out) copy_hex(d.hash_hex(), hash_hex_out);
  });
}

lf_status lf_provider_logits(lf_provider* provider, const uint32_t* prefix, size_t len,
                             float* out, size_t out_len) {
  return guard([&] {
    require(provider && out && (prefix || len == 0), "null argument");
    const auto logits = provider->provider->logits_for_prefix({prefix, len});
    if (logits.size() != out_len) {
      fail(ErrorCode::kDimension, "output buffer holds " + std::to_string(out_len) +
                                      " floats, provider returned " +
                                      std::to_string(logits.size()));
    }
    std::copy(logits.begin(), logits.end(), out);
  });
}

lf_status lf_provider_server_start(lf_provider* provider, const char* host, int port,
                                   lf_provider_server** out) {
  return guard([&] {
    require(provider && out, "null argument");
    auto server = std::make_unique<wire::ProviderServer>(provider->provider);
    server->start(host ? host : "127.0.0.1", port);
    *out = new lf_provider_server{std::move(server)};
  });
}

int lf_provider_server_port(const lf_provider_server* server) {
  return server ? server->server->port() : -1;
}

void lf_provider_server_destroy(lf_provider_server* server) {
  if (!server) return;
  server->server->stop();
  delete server;
}

void lf_decode_params_init(lf_decode_params* params) {
  if (!params) return;
  const DecodeRequest d;
  *params = lf_decode_params{};
  params->alpha = d.guidance.alpha;
  params->warmup_tokens = d.guidance.warmup_tokens;
  params->temperature = d.sampling.temperature;
  params->top_p = d.sampling.top_p;
  params->seed = d.sampling.seed;
  params->greedy = d.sampling.greedy ? 1 : 0;
  params->max_new_tokens = d.max_new_tokens;
  params->mode = LF_MODE_GUIDED;
}

lf_status lf_engine_create(lf_provider* target, lf_provider* base, lf_provider* guider,
                           size_t parallelism, lf_engine** out) {
  return guard([&] {
    require(target && out, "null argument");
    require((base == nullptr) == (guider == nullptr), "base and guider go together");
    ProviderSet set{target->provider, base ? base->provider : nullptr,
                    guider ? guider->provider : nullptr};
    EngineOptions options;
    options.parallelism = parallelism;
    *out = new lf_engine{std::make_shared<DecodeEngine>(std::move(set), options)};
  });
}

void lf_engine_destroy(lf_engine* engine) { delete engine; }

lf_status lf_engine_decode(const lf_engine* engine, const lf_decode_params* p, lf_trace** out) {
  return guard([&] {
    require(engine && p && out, "null argument");
    require(p->prompt_tokens || p->prompt_len == 0, "null prompt");
    require(p->forcing_tokens || p->forcing_len == 0, "null forcing tokens");
    DecodeRequest r;
    r.prompt_tokens.assign(p->prompt_tokens, p->prompt_tokens + p->prompt_len);
    r.guidance = {p->alpha, p->warmup_tokens};
    r.sampling.temperature = p->temperature;
    r.sampling.top_p = p->top_p;
    r.sampling.seed = p->seed;
    r.sampling.greedy = p->greedy != 0;
    r.max_new_tokens = p->max_new_tokens;
    switch (p->mode) {
      case LF_MODE_GUIDED: r.mode = DecodeMode::kGuided; break;
      case LF_MODE_TARGET_ONLY: r.mode = DecodeMode::kTargetOnly; break;
      case LF_MODE_BUDGET_FORCING: r.mode = DecodeMode::kBudgetForcing; break;
      default: fail(ErrorCode::kArgument, "unknown decode mode");
    }
    r.forcing_tokens.assign(p->forcing_tokens, p->forcing_tokens + p->forcing_len);
    if (p->has_forcing_budget) r.forcing_budget = p->forcing_budget;
    r.record_logits = p->record_logits != 0;

    auto trace = std::make_unique<lf_trace>();
    trace->trace = engine->engine->decode(r);
    trace->tokens = trace->trace.tokens();
    *out = trace.release();
  });
}

void lf_trace_destroy(lf_trace* trace) { delete trace; }

size_t lf_trace_length(const lf_trace* trace) { return trace ? trace->tokens.size() : 0; }

const uint32_t* lf_trace_tokens(const lf_trace* trace) {
  return trace && !trace->tokens.empty() ? trace->tokens.data() : nullptr;
}

int lf_trace_forced(const lf_trace* trace, size_t index) {
  if (!trace || index >= trace->trace.steps.size()) return 0;
  return trace->trace.steps[index].forced ? 1 : 0;
}

lf_stop_reason lf_trace_stop_reason(const lf_trace* trace) {
  if (!trace) return LF_STOP_ABORTED;
  switch (trace->trace.stop_reason) {
    case StopReason::kEos: return LF_STOP_EOS;
    case StopReason::kMaxTokens: return LF_STOP_MAX_TOKENS;
    case StopReason::kAborted: break;
  }
  return LF_STOP_ABORTED;
}

size_t lf_trace_forcing_replacements(const lf_trace* trace) {
  return trace ? trace->trace.forcing_replacements : 0;
}

uint64_t lf_trace_rng_draws(const lf_trace* trace) { return trace ? trace->trace.rng.draws : 0; }

const char* lf_trace_text(const lf_trace* trace) {
  return trace && trace->trace.text ? trace->trace.text->c_str() : nullptr;
}

const char* lf_trace_error(const lf_trace* trace) {
  return trace && trace->trace.error ? trace->trace.error->c_str() : nullptr;
}

lf_status lf_trace_to_jsonl(const lf_trace* trace, const char* question_id, char** out) {
  return guard([&] {
    require(trace && out, "null argument");
    DecodeTrace copy = trace->trace;
    copy.question_id = opt(question_id);
    *out = dup_string(trace_to_jsonl(copy));
  });
}

lf_status lf_extract_boxed(const char* text, char** out) {
  return guard([&] {
    require(text && out, "null argument");
    const auto boxed = eval::extract_boxed(text);
    *out = boxed ? dup_string(*boxed) : nullptr;
  });
}

lf_status lf_normalize_answer(const char* answer, char** out) {
  return guard([&] {
    require(answer && out, "null argument");
    *out = dup_string(eval::normalize_answer(answer));
  });
}

int lf_grade(const char* completion, const char* gold) {
  if (!completion || !gold) return 0;
  return eval::grade(eval::extract_boxed(completion), gold) ? 1 : 0;
}

lf_status lf_pass_at_k_unbiased(size_t n, size_t c, size_t k, double* out) {
  return guard([&] {
    require(out, "null output");
    *out = eval::pass_at_k_unbiased(n, c, k);
  });
}

lf_status lf_compute_lambda(size_t n_type1, size_t n_type2, double* out) {
  return guard([&] {
    require(out, "null output");
    *out = prefs::compute_lambda(n_type1, n_type2);
  });
}

void lf_overrides_init(lf_overrides* overrides) {
  if (overrides) *overrides = lf_overrides{};
}

int lf_cmd_decode(const char* config_path, const lf_overrides* overrides) {
  return run_command([&] {
    return cli::cmd_decode(opt(config_path), to_overrides(overrides), std::cout, std::cerr);
  });
}

int lf_cmd_sweep(const char* config_path, const lf_overrides* overrides) {
  return run_command([&] {
    return cli::cmd_sweep(opt(config_path), to_overrides(overrides), std::cout, std::cerr);
  });
}

int lf_cmd_eval(const char* traces, const char* dataset, const char* output_dir,
                const char* origin, int unbiased) {
  return run_command([&] {
    cli::EvalOptions o;
    o.traces = opt(traces);
    o.dataset = opt(dataset);
    o.output_dir = opt(output_dir);
    if (origin) o.origin = origin;
    o.unbiased = unbiased != 0;
    return cli::cmd_eval(o, std::cout, std::cerr);
  });
}

int lf_cmd_build_prefs(const char* graded, const char* output_dir, int guider_only, int dedup,
                       int has_subsample, size_t subsample, uint64_t seed) {
  return run_command([&] {
    cli::BuildPrefsOptions o;
    o.graded = opt(graded);
    o.output_dir = opt(output_dir);
    o.guider_only = guider_only != 0;
    o.dedup = dedup != 0;
    if (has_subsample) o.subsample = subsample;
    o.seed = seed;
    return cli::cmd_build_prefs(o, std::cout, std::cerr);
  });
}

int lf_cmd_dpo_check(const char* pairs, const char* spec, const char* output,
                     int reference_check) {
  return run_command([&] {
    cli::DpoCheckOptions o;
    o.pairs = opt(pairs);
    o.spec = opt(spec);
    o.output = opt(output);
    o.reference_check = reference_check != 0;
    return cli::cmd_dpo_check(o, std::cout, std::cerr);
  });
}

int lf_cmd_serve(const char* config_path, const lf_overrides* overrides) {
  return run_command([&] {
    return cli::cmd_serve(opt(config_path), to_overrides(overrides), std::cout, std::cerr);
  });
}

int lf_cmd_serve_provider(const char* fixture, const char* host, int port) {
  return run_command([&] {
    return cli::cmd_serve_provider(opt(fixture), host ? host : "127.0.0.1", port, std::cout,
                                   std::cerr);
  });
}

void lf_request_shutdown(void) { cli::request_shutdown(); }

void lf_reset_shutdown(void) { cli::reset_shutdown(); }

}  // extern "C"
