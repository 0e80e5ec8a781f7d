// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "logitfuse/trace_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "logitfuse/wire.hpp"

namespace logitfuse {

using nlohmann::json;

json request_to_json(const DecodeRequest& r) {
  json j = {
      {"prompt_tokens", r.prompt_tokens},
      {"guidance", {{"alpha", r.guidance.alpha}, {"warmup_tokens", r.guidance.warmup_tokens}}},
      {"sampling",
       {{"temperature", r.sampling.temperature},
        {"top_p", r.sampling.top_p},
        {"seed", r.sampling.seed},
        {"greedy", r.sampling.greedy}}},
      {"max_new_tokens", r.max_new_tokens},
      {"mode", decode_mode_name(r.mode)},
      {"forcing_tokens", r.forcing_tokens},
      {"forcing_budget", nullptr},
      {"record_logits", r.record_logits},
  };
  if (r.forcing_budget) j["forcing_budget"] = *r.forcing_budget;
  return j;
}

DecodeRequest request_from_json(const json& j) {
  DecodeRequest r;
  r.prompt_tokens = j.at("prompt_tokens").get<std::vector<TokenId>>();
  const auto& g = j.at("guidance");
  r.guidance.alpha = g.at("alpha").get<double>();
  r.guidance.warmup_tokens = g.at("warmup_tokens").get<std::size_t>();
  const auto& s = j.at("sampling");
  r.sampling.temperature = s.at("temperature").get<double>();
  r.sampling.top_p = s.at("top_p").get<double>();
  r.sampling.seed = s.at("seed").get<std::uint64_t>();
  r.sampling.greedy = s.at("greedy").get<bool>();
  r.max_new_tokens = j.at("max_new_tokens").get<std::size_t>();
  r.mode = parse_decode_mode(j.at("mode").get<std::string>());
  r.forcing_tokens = j.value("forcing_tokens", std::vector<TokenId>{});
  if (j.contains("forcing_budget") && !j["forcing_budget"].is_null()) {
    r.forcing_budget = j["forcing_budget"].get<std::size_t>();
  }
  r.record_logits = j.value("record_logits", false);
  return r;
}

void write_trace_jsonl(std::ostream& out, const DecodeTrace& trace) {
  const json header = {{"type", "header"},
                       {"schema", kTraceSchema},
                       {"question_id", trace.question_id},
                       {"request", request_to_json(trace.request)},
                       {"rng",
                        {{"algorithm", trace.rng.algorithm},
                         {"base_seed", trace.rng.base_seed},
                         {"sample_index", trace.rng.sample_index},
                         {"seed", trace.rng.seed}}},
                       {"vocab_hash", trace.vocab_hash}};
  out << header.dump() << '\n';

  for (const auto& step : trace.steps) {
    json line = {{"type", "step"},
                 {"index", step.index},
                 {"token", step.token},
                 {"fused", step.fused},
                 {"forced", step.forced}};
    if (step.logits) {
      json logits = {{"target", wire::encode_logits(step.logits->target)},
                     {"used", wire::encode_logits(step.logits->used)}};
      if (!step.logits->base.empty()) logits["base"] = wire::encode_logits(step.logits->base);
      if (!step.logits->guider.empty()) {
        logits["guider"] = wire::encode_logits(step.logits->guider);
      }
      line["logits"] = std::move(logits);
    }
    out << line.dump() << '\n';
  }

  json end = {{"type", "end"},
              {"stop_reason", stop_reason_name(trace.stop_reason)},
              {"generated_count", trace.generated_count},
              {"forcing_replacements", trace.forcing_replacements},
              {"rng_draws", trace.rng.draws},
              {"repeat_rate_4gram", trace.repeat_rate_4gram}};
  if (trace.text) end["text"] = *trace.text;
  if (trace.error_code) {
    end["error"] = {{"code", error_code_name(*trace.error_code)},
                    {"message", trace.error.value_or("")}};
  }
  out << end.dump() << '\n';
}

std::string trace_to_jsonl(const DecodeTrace& trace) {
  std::ostringstream out;
  write_trace_jsonl(out, trace);
  return out.str();
}

namespace {

ErrorCode error_code_from_name(const std::string& name) {
  for (int c = static_cast<int>(ErrorCode::kArgument); c <= static_cast<int>(ErrorCode::kSaturated);
       ++c) {
    if (name == error_code_name(static_cast<ErrorCode>(c))) return static_cast<ErrorCode>(c);
  }
  return ErrorCode::kTransport;
}

}  // namespace

std::vector<DecodeTrace> read_traces_jsonl(std::istream& in) {
  std::vector<DecodeTrace> traces;
  std::optional<DecodeTrace> current;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto where = "trace line " + std::to_string(line_no) + ": ";
    try {
      const auto j = json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "header") {
        if (current) fail(ErrorCode::kMalformed, where + "header before previous trace ended");
        if (j.at("schema").get<std::string>() != kTraceSchema) {
          fail(ErrorCode::kMalformed, where + "unsupported trace schema");
        }
        current.emplace();
        current->question_id = j.value("question_id", "");
        current->request = request_from_json(j.at("request"));
        const auto& rng = j.at("rng");
        current->rng.algorithm = rng.at("algorithm").get<std::string>();
        current->rng.base_seed = rng.at("base_seed").get<std::uint64_t>();
        current->rng.sample_index = rng.at("sample_index").get<std::uint64_t>();
        current->rng.seed = rng.at("seed").get<std::uint64_t>();
        current->vocab_hash = j.value("vocab_hash", "");
      } else if (type == "step") {
        if (!current) fail(ErrorCode::kMalformed, where + "step outside a trace");
        StepRecord step;
        step.index = j.at("index").get<std::size_t>();
        step.token = j.at("token").get<TokenId>();
        step.fused = j.at("fused").get<bool>();
        step.forced = j.value("forced", false);
        if (j.contains("logits")) {
          const auto& l = j["logits"];
          LogitSnapshot snap;
          snap.target = wire::decode_logits(l.at("target").get<std::string>());
          snap.used = wire::decode_logits(l.at("used").get<std::string>());
          if (l.contains("base")) snap.base = wire::decode_logits(l["base"].get<std::string>());
          if (l.contains("guider")) {
            snap.guider = wire::decode_logits(l["guider"].get<std::string>());
          }
          step.logits = std::move(snap);
        }
        current->steps.push_back(std::move(step));
      } else if (type == "end") {
        if (!current) fail(ErrorCode::kMalformed, where + "end outside a trace");
        current->stop_reason = parse_stop_reason(j.at("stop_reason").get<std::string>());
        current->generated_count = j.at("generated_count").get<std::size_t>();
        current->forcing_replacements = j.value("forcing_replacements", std::size_t{0});
        current->rng.draws = j.value("rng_draws", std::uint64_t{0});
        current->repeat_rate_4gram = j.value("repeat_rate_4gram", 0.0);
        if (j.contains("text")) current->text = j["text"].get<std::string>();
        if (j.contains("error")) {
          current->error_code = error_code_from_name(j["error"].at("code").get<std::string>());
          current->error = j["error"].at("message").get<std::string>();
        }
        if (current->generated_count != current->steps.size()) {
          fail(ErrorCode::kMalformed, where + "generated_count disagrees with step lines");
        }
        traces.push_back(std::move(*current));
        current.reset();
      } else {
        fail(ErrorCode::kMalformed, where + "unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      fail(ErrorCode::kMalformed, where + e.what());
    }
  }
  if (current) fail(ErrorCode::kMalformed, "trace stream ended inside a trace");
  return traces;
}

std::vector<DecodeTrace> read_traces_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open trace file " + path);
  try {
    return read_traces_jsonl(in);
  } catch (const Error& e) {
    fail(e.code(), path + ": " + e.what());
  }
}

}  // namespace logitfuse
