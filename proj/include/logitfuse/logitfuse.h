/* Copyright 2026 The logitfuse Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to logitfuse. Objects are opaque handles created by *_create /
 * *_from_* functions and released by the matching *_destroy. Functions that
 * can fail return lf_status; on failure lf_last_error() describes the problem
 * (per thread, valid until the next failing call on that thread).
 * Strings returned through char** are owned by the caller and must be
 * released with lf_string_free. Strings returned as const char* are owned by
 * the handle they came from.
 */
#ifndef LOGITFUSE_H_
#define LOGITFUSE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LF_API __declspec(dllexport)
#else
#define LF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lf_status {
  LF_OK = 0,
  LF_ERR_ARGUMENT = 1,
  LF_ERR_DIMENSION = 2,
  LF_ERR_NUMERIC = 3,
  LF_ERR_SAMPLING = 4,
  LF_ERR_TRANSPORT = 5,
  LF_ERR_VOCAB_MISMATCH = 6,
  LF_ERR_UNKNOWN_SESSION = 7,
  LF_ERR_MALFORMED = 8,
  LF_ERR_CONFIG = 9,
  LF_ERR_IO = 10,
  LF_ERR_SATURATED = 11,
  LF_ERR_INTERNAL = 99
} lf_status;

typedef enum lf_mode {
  LF_MODE_GUIDED = 0,
  LF_MODE_TARGET_ONLY = 1,
  LF_MODE_BUDGET_FORCING = 2
} lf_mode;

typedef enum lf_stop_reason {
  LF_STOP_EOS = 0,
  LF_STOP_MAX_TOKENS = 1,
  LF_STOP_ABORTED = 2
} lf_stop_reason;

/* CLI exit codes returned by lf_cmd_*. */
enum {
  LF_EXIT_OK = 0,
  LF_EXIT_CONFIG = 2,
  LF_EXIT_TRANSPORT = 3,
  LF_EXIT_PARTIAL = 4
};

typedef struct lf_rng lf_rng;
typedef struct lf_provider lf_provider;
typedef struct lf_provider_server lf_provider_server;
typedef struct lf_engine lf_engine;
typedef struct lf_trace lf_trace;

LF_API const char* lf_version(void);
LF_API const char* lf_last_error(void);
LF_API const char* lf_status_name(lf_status status);
LF_API void lf_string_free(char* s);

/* ---- numeric kernels ---------------------------------------------------- */

/* out[i] = target[i] + alpha * (guider[i] - base[i]) in float32. */
LF_API lf_status lf_fuse(const float* target, const float* guider, const float* base, size_t n,
                         double alpha, float* out);
/* As lf_fuse once generated_count >= warmup_tokens, else out = target. */
LF_API lf_status lf_fuse_with_warmup(const float* target, const float* guider,
                                     const float* base, size_t n, double alpha,
                                     size_t warmup_tokens, size_t generated_count, float* out);

LF_API lf_status lf_softmax(const float* logits, size_t n, double temperature, double* out);
/* Renormalised nucleus of `probs`; entries outside it become 0. */
LF_API lf_status lf_top_p_filter(const double* probs, size_t n, double top_p, double* out);

LF_API lf_status lf_rng_create(uint64_t seed, lf_rng** out);
LF_API void lf_rng_destroy(lf_rng* rng);
LF_API double lf_rng_uniform(lf_rng* rng);
LF_API uint64_t lf_rng_draws(const lf_rng* rng);

LF_API lf_status lf_sample_token(const float* logits, size_t n, double temperature,
                                 double top_p, int greedy, lf_rng* rng, uint32_t* token);

/* SHA-256 of the ordered token table as lowercase hex (65 bytes incl. NUL). */
LF_API lf_status lf_vocab_hash(const char* const* tokens, const size_t* lengths, size_t n,
                               char hex_out[65]);

/* ---- providers ---------------------------------------------------------- */

LF_API lf_status lf_provider_from_fixture(const char* path, lf_provider** out);
LF_API lf_status lf_provider_from_fixture_json(const char* json_text, lf_provider** out);
LF_API lf_status lf_provider_remote(const char* endpoint, lf_provider** out);
LF_API void lf_provider_destroy(lf_provider* provider);

LF_API lf_status lf_provider_vocab(lf_provider* provider, uint32_t* size, uint32_t* eos_id,
                                   char hash_hex_out[65]);
/* Stateless logits for a full prefix; `out` must hold the vocabulary size. */
LF_API lf_status lf_provider_logits(lf_provider* provider, const uint32_t* prefix, size_t len,
                                    float* out, size_t out_len);

/* Serves `provider` over the wire protocol on a background thread. */
LF_API lf_status lf_provider_server_start(lf_provider* provider, const char* host, int port,
                                          lf_provider_server** out);
LF_API int lf_provider_server_port(const lf_provider_server* server);
LF_API void lf_provider_server_destroy(lf_provider_server* server);

/* ---- decoding ----------------------------------------------------------- */

typedef struct lf_decode_params {
  const uint32_t* prompt_tokens;
  size_t prompt_len;
  double alpha;
  size_t warmup_tokens;
  double temperature;
  double top_p;
  uint64_t seed;
  int greedy;
  size_t max_new_tokens;
  lf_mode mode;
  const uint32_t* forcing_tokens;
  size_t forcing_len;
  int has_forcing_budget;
  size_t forcing_budget;
  int record_logits;
} lf_decode_params;

/* Library defaults: alpha 1, warm-up 100, temperature 0.6, top-p 0.95,
 * seed 0, 8192 new tokens, guided mode. */
LF_API void lf_decode_params_init(lf_decode_params* params);

/* base and guider may both be NULL for a target-only engine. Fails with
 * LF_ERR_VOCAB_MISMATCH when the vocabularies disagree. */
LF_API lf_status lf_engine_create(lf_provider* target, lf_provider* base, lf_provider* guider,
                                  size_t parallelism, lf_engine** out);
LF_API void lf_engine_destroy(lf_engine* engine);

/* Provider failures still yield a trace (stop reason LF_STOP_ABORTED). */
LF_API lf_status lf_engine_decode(const lf_engine* engine, const lf_decode_params* params,
                                  lf_trace** out);

LF_API void lf_trace_destroy(lf_trace* trace);
LF_API size_t lf_trace_length(const lf_trace* trace);
LF_API const uint32_t* lf_trace_tokens(const lf_trace* trace);
LF_API int lf_trace_forced(const lf_trace* trace, size_t index);
LF_API lf_stop_reason lf_trace_stop_reason(const lf_trace* trace);
LF_API size_t lf_trace_forcing_replacements(const lf_trace* trace);
LF_API uint64_t lf_trace_rng_draws(const lf_trace* trace);
/* NULL when no token table is available. */
LF_API const char* lf_trace_text(const lf_trace* trace);
/* NULL unless aborted. */
LF_API const char* lf_trace_error(const lf_trace* trace);
LF_API lf_status lf_trace_to_jsonl(const lf_trace* trace, const char* question_id, char** out);

/* ---- evaluation and preference data ------------------------------------- */

/* *out is NULL when the text has no complete \boxed{...}. */
LF_API lf_status lf_extract_boxed(const char* text, char** out);
LF_API lf_status lf_normalize_answer(const char* answer, char** out);
/* 1 when the last boxed answer of `completion` matches `gold`, else 0. */
LF_API int lf_grade(const char* completion, const char* gold);
LF_API lf_status lf_pass_at_k_unbiased(size_t n, size_t c, size_t k, double* out);
LF_API lf_status lf_compute_lambda(size_t n_type1, size_t n_type2, double* out);

/* ---- commands ----------------------------------------------------------- */

/* Command-line overrides of config values; has_* flags / NULL mean unset. */
typedef struct lf_overrides {
  int has_seed;
  uint64_t seed;
  int has_alpha;
  double alpha;
  int has_warmup;
  size_t warmup;
  const char* mode; /* "guided" | "target_only" | "budget_forcing" */
  const char* output_dir;
  int has_n_samples;
  size_t n_samples;
  int has_max_new_tokens;
  size_t max_new_tokens;
  int has_parallelism;
  size_t parallelism;
  const char* dataset;
  const char* host;
  int has_port;
  int port;
} lf_overrides;

LF_API void lf_overrides_init(lf_overrides* overrides);

/* Each command writes its report to stdout, diagnostics to stderr, and
 * returns an LF_EXIT_* code. */
LF_API int lf_cmd_decode(const char* config_path, const lf_overrides* overrides);
LF_API int lf_cmd_sweep(const char* config_path, const lf_overrides* overrides);
LF_API int lf_cmd_eval(const char* traces, const char* dataset, const char* output_dir,
                       const char* origin, int unbiased);
/* `graded` may list several files separated by commas. */
LF_API int lf_cmd_build_prefs(const char* graded, const char* output_dir, int guider_only,
                              int dedup, int has_subsample, size_t subsample, uint64_t seed);
LF_API int lf_cmd_dpo_check(const char* pairs, const char* spec, const char* output,
                            int reference_check);
/* Block until lf_request_shutdown(). */
LF_API int lf_cmd_serve(const char* config_path, const lf_overrides* overrides);
LF_API int lf_cmd_serve_provider(const char* fixture, const char* host, int port);

/* Async-signal-safe. */
LF_API void lf_request_shutdown(void);
LF_API void lf_reset_shutdown(void);

#ifdef __cplusplus
}
#endif

#endif /* LOGITFUSE_H_ */
