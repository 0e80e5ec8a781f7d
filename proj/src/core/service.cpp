// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "logitfuse/service.hpp"

#include <algorithm>

#include "httplib.h"
#include "logitfuse/wire.hpp"

namespace logitfuse {

using nlohmann::json;

namespace {

// Non-negative integers may be stored signed when the body is built in code.
bool is_non_negative_integer(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

template <typename T>
bool read_unsigned(const json& obj, const char* key, const std::string& path, T& out,
                   std::vector<FieldError>& errors) {
  if (!obj.contains(key)) return false;
  const auto& v = obj[key];
  if (!is_non_negative_integer(v)) {
    errors.push_back({path, "expected a non-negative integer"});
    return false;
  }
  out = static_cast<T>(v.get<std::uint64_t>());
  return true;
}

bool read_number(const json& obj, const char* key, const std::string& path, double& out,
                 std::vector<FieldError>& errors) {
  if (!obj.contains(key)) return false;
  const auto& v = obj[key];
  if (!v.is_number()) {
    errors.push_back({path, "expected a number"});
    return false;
  }
  out = v.get<double>();
  return true;
}

bool read_tokens(const json& obj, const char* key, std::vector<TokenId>& out,
                 std::vector<FieldError>& errors) {
  if (!obj.contains(key)) return false;
  const auto& v = obj[key];
  if (!v.is_array()) {
    errors.push_back({key, "expected an array of token ids"});
    return false;
  }
  out.clear();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!is_non_negative_integer(v[i]) || v[i].get<std::uint64_t>() > UINT32_MAX) {
      errors.push_back({std::string(key) + "[" + std::to_string(i) + "]",
                        "expected a token id"});
      return false;
    }
    out.push_back(v[i].get<TokenId>());
  }
  return true;
}

void check_keys(const json& obj, const std::string& prefix,
                std::initializer_list<const char*> allowed, std::vector<FieldError>& errors) {
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) errors.push_back({prefix + key, "unknown field"});
  }
}

json token_event(const StepRecord& step) {
  // No "fused" flag: with alpha = 0 the stream must match target_only exactly.
  return {{"type", "token"}, {"index", step.index}, {"token", step.token},
          {"forced", step.forced}};
}

json done_event(const DecodeTrace& trace) {
  json done = {{"type", "done"},
               {"stop_reason", stop_reason_name(trace.stop_reason)},
               {"generated_count", trace.generated_count},
               {"forcing_replacements", trace.forcing_replacements},
               {"tokens", trace.tokens()},
               {"repeat_rate_4gram", trace.repeat_rate_4gram},
               {"vocab_hash", trace.vocab_hash},
               {"rng", {{"algorithm", trace.rng.algorithm},
                        {"seed", trace.rng.seed},
                        {"draws", trace.rng.draws}}}};
  if (trace.text) done["text"] = *trace.text;
  return done;
}

json error_event(const DecodeTrace& trace) {
  return {{"type", "error"},
          {"code", error_code_name(trace.error_code.value_or(ErrorCode::kTransport))},
          {"message", trace.error.value_or("")},
          {"generated_count", trace.generated_count}};
}

struct ClientGone {};

}  // namespace

DecodeRequest parse_generate_request(const json& body, const DecodeRequest& defaults,
                                     std::vector<FieldError>& errors) {
  DecodeRequest r = defaults;
  if (!body.is_object()) {
    errors.push_back({"", "request body must be a JSON object"});
    return r;
  }
  check_keys(body, "",
             {"prompt_tokens", "guidance", "sampling", "max_new_tokens", "mode",
              "forcing_tokens", "forcing_budget"},
             errors);
  if (!body.contains("prompt_tokens")) errors.push_back({"prompt_tokens", "required"});
  read_tokens(body, "prompt_tokens", r.prompt_tokens, errors);
  read_tokens(body, "forcing_tokens", r.forcing_tokens, errors);

  if (body.contains("guidance")) {
    const auto& g = body["guidance"];
    if (!g.is_object()) {
      errors.push_back({"guidance", "expected an object"});
    } else {
      check_keys(g, "guidance.", {"alpha", "warmup_tokens"}, errors);
      if (read_number(g, "alpha", "guidance.alpha", r.guidance.alpha, errors) &&
          !(r.guidance.alpha >= 0.0)) {
        errors.push_back({"guidance.alpha", "must be >= 0"});
      }
      read_unsigned(g, "warmup_tokens", "guidance.warmup_tokens", r.guidance.warmup_tokens,
                    errors);
    }
  }
  if (body.contains("sampling")) {
    const auto& s = body["sampling"];
    if (!s.is_object()) {
      errors.push_back({"sampling", "expected an object"});
    } else {
      check_keys(s, "sampling.", {"temperature", "top_p", "seed", "greedy"}, errors);
      if (read_number(s, "temperature", "sampling.temperature", r.sampling.temperature,
                      errors) &&
          !(r.sampling.temperature > 0.0)) {
        errors.push_back({"sampling.temperature", "must be > 0"});
      }
      if (read_number(s, "top_p", "sampling.top_p", r.sampling.top_p, errors) &&
          !(r.sampling.top_p > 0.0 && r.sampling.top_p <= 1.0)) {
        errors.push_back({"sampling.top_p", "must lie in (0, 1]"});
      }
      read_unsigned(s, "seed", "sampling.seed", r.sampling.seed, errors);
      if (s.contains("greedy")) {
        if (!s["greedy"].is_boolean()) errors.push_back({"sampling.greedy", "expected a boolean"});
        else r.sampling.greedy = s["greedy"].get<bool>();
      }
    }
  }
  if (read_unsigned(body, "max_new_tokens", "max_new_tokens", r.max_new_tokens, errors) &&
      r.max_new_tokens < 1) {
    errors.push_back({"max_new_tokens", "must be >= 1"});
  }
  if (body.contains("mode")) {
    if (!body["mode"].is_string()) {
      errors.push_back({"mode", "expected a string"});
    } else {
      try {
        r.mode = parse_decode_mode(body["mode"].get<std::string>());
      } catch (const Error& e) {
        errors.push_back({"mode", e.what()});
      }
    }
  }
  if (body.contains("forcing_budget") && !body["forcing_budget"].is_null()) {
    std::size_t budget = 0;
    if (read_unsigned(body, "forcing_budget", "forcing_budget", budget, errors)) {
      r.forcing_budget = budget;
    }
  }
  if (errors.empty()) {
    try {
      r.validate();
    } catch (const Error& e) {
      errors.push_back({"", e.what()});
    }
  }
  return r;
}

FusionService::FusionService(std::shared_ptr<const DecodeEngine> engine, ServiceOptions options)
    : engine_(std::move(engine)),
      options_(std::move(options)),
      server_(std::make_unique<httplib::Server>()) {
  if (!engine_) fail(ErrorCode::kArgument, "service needs an engine");
  install_routes();
}

FusionService::FusionService(std::string degraded_reason, ServiceOptions options)
    : degraded_reason_(std::move(degraded_reason)),
      options_(std::move(options)),
      server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

FusionService::~FusionService() { stop(); }

void FusionService::install_routes() {
  if (options_.max_concurrent == 0) options_.max_concurrent = 1;
  // Spare workers so saturated requests can still be answered with 503.
  const std::size_t workers = options_.max_concurrent + 4;
  server_->new_task_queue = [workers] { return new httplib::ThreadPool(workers); };

  server_->Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
    json body = {{"status", engine_ ? "ok" : "degraded"},
                 {"in_flight", in_flight_.load()},
                 {"max_concurrent", options_.max_concurrent}};
    if (engine_) body["vocab_hash"] = engine_->vocab().hash_hex();
    else body["reason"] = degraded_reason_;
    res.set_content(body.dump(), "application/json");
  });

  server_->Post("/v1/generate", [this](const httplib::Request& req, httplib::Response& res) {
    auto reply = [&res](int status, const json& body) {
      res.status = status;
      res.set_content(body.dump(), "application/json");
    };
    if (!engine_) {
      reply(409, wire::error_body(ErrorCode::kVocabMismatch, degraded_reason_));
      return;
    }

    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error& e) {
      auto err = wire::error_body(ErrorCode::kMalformed, "invalid JSON body");
      err["error"]["fields"] = json::array({{{"field", ""}, {"message", e.what()}}});
      reply(422, err);
      return;
    }
    std::vector<FieldError> errors;
    DecodeRequest request = parse_generate_request(body, options_.defaults, errors);
    const bool mode_ok = std::none_of(errors.begin(), errors.end(),
                                      [](const FieldError& e) { return e.field == "mode"; });
    if (mode_ok && request.mode == DecodeMode::kGuided && !engine_->has_guidance_models()) {
      errors.push_back({"mode", "guided decoding needs base and guider providers"});
    }
    for (const char* field : {"prompt_tokens", "forcing_tokens"}) {
      const auto& ids = std::string(field) == "prompt_tokens" ? request.prompt_tokens
                                                              : request.forcing_tokens;
      for (TokenId t : ids) {
        if (t >= engine_->vocab().size) {
          errors.push_back({field, "token id " + std::to_string(t) +
                                       " outside vocabulary of size " +
                                       std::to_string(engine_->vocab().size)});
          break;
        }
      }
    }
    if (!errors.empty()) {
      json fields = json::array();
      std::string summary;
      for (const auto& e : errors) {
        fields.push_back({{"field", e.field}, {"message", e.message}});
        if (!summary.empty()) summary += "; ";
        summary += (e.field.empty() ? "" : e.field + ": ") + e.message;
      }
      auto err = wire::error_body(ErrorCode::kMalformed, summary);
      err["error"]["fields"] = std::move(fields);
      reply(422, err);
      return;
    }

    std::size_t current = in_flight_.load();
    do {
      if (current >= options_.max_concurrent) {
        reply(503, wire::error_body(ErrorCode::kSaturated,
                                    "all " + std::to_string(options_.max_concurrent) +
                                        " decode slots are busy"));
        return;
      }
    } while (!in_flight_.compare_exchange_weak(current, current + 1));

    auto engine = engine_;
    res.set_chunked_content_provider(
        "application/x-ndjson",
        [engine, request](std::size_t, httplib::DataSink& sink) {
          auto write_line = [&sink](const json& event) {
            const std::string line = event.dump() + "\n";
            if (!sink.write(line.data(), line.size())) throw ClientGone{};
          };
          try {
            const DecodeTrace trace = engine->decode(
                request, [&](const StepRecord& step) { write_line(token_event(step)); });
            write_line(trace.ok() ? done_event(trace) : error_event(trace));
            sink.done();
          } catch (const ClientGone&) {
            return false;
          } catch (const Error& e) {
            DecodeTrace failed;
            failed.error_code = e.code();
            failed.error = e.what();
            try {
              write_line(error_event(failed));
              sink.done();
            } catch (const ClientGone&) {
              return false;
            }
          }
          return true;
        },
        [this](bool) { --in_flight_; });
  });
}

int FusionService::start(const std::string& host, int port) {
  host_ = host;
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    port_ = server_->bind_to_port(host, port) ? port : -1;
  }
  if (port_ < 0) fail(ErrorCode::kTransport, "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void FusionService::stop() {
  if (server_) server_->stop();
  // listen_after_bind returns once the worker pool has drained.
  if (thread_.joinable()) thread_.join();
}

std::string FusionService::endpoint() const {
  return "http://" + host_ + ":" + std::to_string(port_);
}

}  // namespace logitfuse
