// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

// Exercises the shared library through its C header only.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "logitfuse/logitfuse.h"

namespace {

const std::string kToy = LOGITFUSE_FIXTURE_DIR "/toy/";

struct Provider {
  lf_provider* p = nullptr;
  explicit Provider(const std::string& path) { REQUIRE(lf_provider_from_fixture(path.c_str(), &p) == LF_OK); }
  ~Provider() { lf_provider_destroy(p); }
};

std::vector<uint32_t> tokens_of(const lf_trace* t) {
  const uint32_t* data = lf_trace_tokens(t);
  return std::vector<uint32_t>(data, data + lf_trace_length(t));
}

}  // namespace

TEST_CASE("library identity and status names") {
  CHECK(std::strlen(lf_version()) > 0);
  CHECK(std::string(lf_status_name(LF_OK)) != "");
  CHECK(std::string(lf_status_name(LF_ERR_VOCAB_MISMATCH)) != std::string(lf_status_name(LF_OK)));
}

TEST_CASE("fusion kernels") {
  const float t[2] = {2.0f, 0.0f}, g[2] = {0.0f, 1.0f}, b[2] = {0.0f, 0.0f};
  float out[2];
  REQUIRE(lf_fuse(t, g, b, 2, 1.0, out) == LF_OK);
  CHECK(out[0] == 2.0f);
  CHECK(out[1] == 1.0f);
  REQUIRE(lf_fuse_with_warmup(t, g, b, 2, 1.0, 100, 99, out) == LF_OK);
  CHECK(out[1] == 0.0f);
  REQUIRE(lf_fuse_with_warmup(t, g, b, 2, 1.0, 100, 100, out) == LF_OK);
  CHECK(out[1] == 1.0f);

  const float bad[2] = {1.0f, NAN};
  CHECK(lf_fuse(t, bad, b, 2, 1.0, out) == LF_ERR_NUMERIC);
  CHECK(std::strlen(lf_last_error()) > 0);
  CHECK(lf_fuse(t, g, b, 2, -1.0, out) == LF_ERR_ARGUMENT);
  CHECK(lf_fuse(nullptr, g, b, 2, 1.0, out) == LF_ERR_ARGUMENT);
}

TEST_CASE("sampling kernels") {
  const double p[3] = {0.5, 0.3, 0.2};
  double q[3];
  REQUIRE(lf_top_p_filter(p, 3, 0.7, q) == LF_OK);
  CHECK(q[0] == doctest::Approx(0.625));
  CHECK(q[1] == doctest::Approx(0.375));
  CHECK(q[2] == 0.0);

  const float logits[3] = {0.0f, 0.0f, 0.0f};
  double s[3];
  REQUIRE(lf_softmax(logits, 3, 1.0, s) == LF_OK);
  CHECK(s[0] == doctest::Approx(1.0 / 3));
  CHECK(lf_softmax(logits, 3, 0.0, s) == LF_ERR_ARGUMENT);

  lf_rng* rng = nullptr;
  REQUIRE(lf_rng_create(42, &rng) == LF_OK);
  std::mt19937_64 ref(42);
  for (int i = 0; i < 10; ++i) {
    CHECK(lf_rng_uniform(rng) == static_cast<double>(ref() >> 11) / 9007199254740992.0);
  }
  CHECK(lf_rng_draws(rng) == 10);
  const float peaked[3] = {0.0f, 5.0f, 1.0f};
  uint32_t token = 99;
  REQUIRE(lf_sample_token(peaked, 3, 0.6, 0.95, 1, rng, &token) == LF_OK);
  CHECK(token == 1);
  CHECK(lf_rng_draws(rng) == 10);
  REQUIRE(lf_sample_token(peaked, 3, 0.6, 0.95, 0, rng, &token) == LF_OK);
  CHECK(lf_rng_draws(rng) == 11);
  lf_rng_destroy(rng);
}

TEST_CASE("vocabulary hash") {
  const char* toks[3] = {"a", "bc", ""};
  const size_t lens[3] = {1, 2, 0};
  char hex[65];
  REQUIRE(lf_vocab_hash(toks, lens, 3, hex) == LF_OK);
  CHECK(std::string(hex) == "59263abc45dbb28dac97ec01a78970761102115287c64b35ca9a356690088f5c");
}

TEST_CASE("providers, wire server and remote client") {
  Provider target(kToy + "target.json");
  uint32_t size = 0, eos = 99;
  char hex[65];
  REQUIRE(lf_provider_vocab(target.p, &size, &eos, hex) == LF_OK);
  CHECK(size == 12);
  CHECK(eos == 0);

  lf_provider_server* server = nullptr;
  REQUIRE(lf_provider_server_start(target.p, "127.0.0.1", 0, &server) == LF_OK);
  const std::string endpoint = "http://127.0.0.1:" + std::to_string(lf_provider_server_port(server));
  lf_provider* remote = nullptr;
  REQUIRE(lf_provider_remote(endpoint.c_str(), &remote) == LF_OK);
  char remote_hex[65];
  REQUIRE(lf_provider_vocab(remote, &size, &eos, remote_hex) == LF_OK);
  CHECK(std::string(remote_hex) == hex);

  const uint32_t prefixes[][3] = {{1, 2, 3}, {1, 5, 6}, {4, 4, 4}};
  for (const auto& prefix : prefixes) {
    for (size_t len = 0; len <= 3; ++len) {
      float a[12], b[12];
      REQUIRE(lf_provider_logits(target.p, prefix, len, a, 12) == LF_OK);
      REQUIRE(lf_provider_logits(remote, prefix, len, b, 12) == LF_OK);
      CHECK(std::memcmp(a, b, sizeof(a)) == 0);
    }
  }
  float small[3];
  CHECK(lf_provider_logits(target.p, prefixes[0], 1, small, 3) != LF_OK);
  lf_provider_destroy(remote);
  lf_provider_server_destroy(server);

  lf_provider* bad = nullptr;
  CHECK(lf_provider_from_fixture((kToy + "missing.json").c_str(), &bad) != LF_OK);
  CHECK(bad == nullptr);
}

TEST_CASE("engine decoding") {
  Provider target(kToy + "target.json"), base(kToy + "base.json"), guider(kToy + "guider.json"),
      bad_eos(kToy + "guider_bad_eos.json");
  lf_engine* engine = nullptr;
  CHECK(lf_engine_create(target.p, base.p, bad_eos.p, 1, &engine) == LF_ERR_VOCAB_MISMATCH);
  CHECK(std::string(lf_last_error()).find("eos") != std::string::npos);
  REQUIRE(lf_engine_create(target.p, base.p, guider.p, 1, &engine) == LF_OK);

  const uint32_t prompt[1] = {1};
  lf_decode_params params;
  lf_decode_params_init(&params);
  CHECK(params.alpha == 1.0);
  CHECK(params.warmup_tokens == 100);
  params.prompt_tokens = prompt;
  params.prompt_len = 1;
  params.max_new_tokens = 64;
  params.seed = 11;

  auto decode = [&](const lf_decode_params& p) {
    lf_trace* t = nullptr;
    REQUIRE(lf_engine_decode(engine, &p, &t) == LF_OK);
    return t;
  };
  auto a0 = params;
  a0.alpha = 0.0;
  auto to = params;
  to.mode = LF_MODE_TARGET_ONLY;
  lf_trace* t0 = decode(a0);
  lf_trace* t1 = decode(to);
  CHECK(tokens_of(t0) == tokens_of(t1));
  CHECK(lf_trace_rng_draws(t0) == lf_trace_rng_draws(t1));
  CHECK(lf_trace_text(t0) != nullptr);
  CHECK(lf_trace_error(t0) == nullptr);

  char* jsonl = nullptr;
  REQUIRE(lf_trace_to_jsonl(t0, "q", &jsonl) == LF_OK);
  CHECK(std::string(jsonl).find("logitfuse.trace/1") != std::string::npos);
  lf_string_free(jsonl);

  const uint32_t forcing[1] = {3};
  auto bf = params;
  bf.mode = LF_MODE_BUDGET_FORCING;
  bf.forcing_tokens = forcing;
  bf.forcing_len = 1;
  lf_trace* t2 = decode(bf);
  CHECK(lf_trace_stop_reason(t2) == LF_STOP_MAX_TOKENS);
  CHECK(lf_trace_length(t2) == 64);
  CHECK(lf_trace_forcing_replacements(t2) > 0);

  auto bad = params;
  bad.max_new_tokens = 0;
  lf_trace* none = nullptr;
  CHECK(lf_engine_decode(engine, &bad, &none) == LF_ERR_ARGUMENT);
  CHECK(none == nullptr);

  for (auto* t : {t0, t1, t2}) lf_trace_destroy(t);
  lf_engine_destroy(engine);
}

TEST_CASE("evaluation helpers") {
  char* s = nullptr;
  REQUIRE(lf_extract_boxed("so \\boxed{\\frac{1}{2}}.", &s) == LF_OK);
  CHECK(std::string(s) == "\\frac{1}{2}");
  lf_string_free(s);
  REQUIRE(lf_extract_boxed("nothing", &s) == LF_OK);
  CHECK(s == nullptr);
  REQUIRE(lf_normalize_answer(" \\left( 3,4 \\right) ", &s) == LF_OK);
  CHECK(std::string(s) == "(3,4)");
  lf_string_free(s);
  CHECK(lf_grade("\\boxed{\\dfrac{1}{2}}", "\\frac{1}{2}") == 1);
  CHECK(lf_grade("\\boxed{0.5}", "\\frac{1}{2}") == 0);
  double v = 0;
  REQUIRE(lf_pass_at_k_unbiased(8, 2, 1, &v) == LF_OK);
  CHECK(v == 0.25);
  CHECK(lf_pass_at_k_unbiased(2, 3, 1, &v) == LF_ERR_ARGUMENT);
  REQUIRE(lf_compute_lambda(11974, 43209, &v) == LF_OK);
  CHECK(std::abs(v - 0.21699) <= 1e-5);
}

TEST_CASE("commands return exit codes") {
  const auto out = std::filesystem::temp_directory_path() / "logitfuse_capi_prefs";
  std::filesystem::remove_all(out);
  CHECK(lf_cmd_build_prefs(LOGITFUSE_FIXTURE_DIR "/prefs/graded.jsonl", out.c_str(), 0, 0, 0, 0, 0) ==
        LF_EXIT_OK);
  CHECK(std::filesystem::exists(out / "pairs.jsonl"));
  lf_overrides o;
  lf_overrides_init(&o);
  CHECK(lf_cmd_decode((kToy + "missing.json").c_str(), &o) == LF_EXIT_CONFIG);
  std::filesystem::remove_all(out);
}
