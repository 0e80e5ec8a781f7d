// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "logitfuse/decode.hpp"

#include <atomic>
#include <future>
#include <set>
#include <thread>

namespace logitfuse {

const char* decode_mode_name(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::kGuided: return "guided";
    case DecodeMode::kTargetOnly: return "target_only";
    case DecodeMode::kBudgetForcing: return "budget_forcing";
  }
  return "?";
}

DecodeMode parse_decode_mode(const std::string& name) {
  if (name == "guided") return DecodeMode::kGuided;
  if (name == "target_only") return DecodeMode::kTargetOnly;
  if (name == "budget_forcing") return DecodeMode::kBudgetForcing;
  fail(ErrorCode::kArgument,
       "unknown mode '" + name + "' (expected guided, target_only or budget_forcing)");
}

const char* stop_reason_name(StopReason reason) {
  switch (reason) {
    case StopReason::kEos: return "eos";
    case StopReason::kMaxTokens: return "max_tokens";
    case StopReason::kAborted: return "aborted";
  }
  return "?";
}

StopReason parse_stop_reason(const std::string& name) {
  if (name == "eos") return StopReason::kEos;
  if (name == "max_tokens") return StopReason::kMaxTokens;
  if (name == "aborted") return StopReason::kAborted;
  fail(ErrorCode::kMalformed, "unknown stop reason '" + name + "'");
}

void DecodeRequest::validate() const {
  guidance.validate();
  sampling.validate();
  if (max_new_tokens < 1) fail(ErrorCode::kArgument, "max_new_tokens must be >= 1");
  if (mode == DecodeMode::kBudgetForcing && forcing_tokens.empty()) {
    fail(ErrorCode::kArgument, "budget forcing needs non-empty forcing_tokens");
  }
}

std::vector<TokenId> DecodeTrace::tokens() const {
  std::vector<TokenId> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.token);
  return out;
}

double ngram_repeat_rate(std::span<const TokenId> tokens, std::size_t n) {
  if (n == 0 || tokens.size() < n) return 0.0;
  std::set<std::vector<TokenId>> seen;
  const std::size_t positions = tokens.size() - n + 1;
  std::size_t repeats = 0;
  for (std::size_t i = 0; i < positions; ++i) {
    std::vector<TokenId> gram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                              tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
    if (!seen.insert(std::move(gram)).second) ++repeats;
  }
  return static_cast<double>(repeats) / static_cast<double>(positions);
}

DecodeEngine::DecodeEngine(ProviderSet providers, EngineOptions options)
    : providers_(std::move(providers)), options_(std::move(options)) {
  if (!providers_.target) fail(ErrorCode::kArgument, "target provider is required");
  if (static_cast<bool>(providers_.base) != static_cast<bool>(providers_.guider)) {
    fail(ErrorCode::kArgument, "base and guider providers must be given together");
  }
  if (options_.parallelism == 0) options_.parallelism = 1;

  vocab_ = providers_.target->describe_vocab();
  if (has_guidance_models()) {
    const auto report = check_compatibility(vocab_, providers_.base->describe_vocab(),
                                            providers_.guider->describe_vocab());
    if (!report.ok) {
      static constexpr const char* kRoles[] = {"target", "base", "guider"};
      fail(ErrorCode::kVocabMismatch,
           std::string("refusing to decode: ") + kRoles[report.offender] + " provider (" +
               (report.offender == 1 ? providers_.base : providers_.guider)->name() +
               ") " + vocab_field_name(*report.field) + " does not match target: " +
               report.message);
    }
  }
  if (!options_.vocab_table && providers_.target->token_table()) {
    // Aliasing constructor: the table lives as long as the provider.
    options_.vocab_table = std::shared_ptr<const VocabTable>(providers_.target,
                                                             providers_.target->token_table());
  }
}

namespace {

struct StepLogits {
  LogitVector target;
  LogitVector base;
  LogitVector guider;
};

}  // namespace

DecodeTrace DecodeEngine::decode(const DecodeRequest& request, const StepObserver& observer,
                                 std::uint64_t sample_index) const {
  request.validate();
  const bool guided = request.mode == DecodeMode::kGuided;
  if (guided && !has_guidance_models()) {
    fail(ErrorCode::kArgument, "guided decoding needs base and guider providers");
  }
  for (TokenId t : request.prompt_tokens) {
    if (t >= vocab_.size) fail(ErrorCode::kArgument, "prompt token outside vocabulary");
  }
  for (TokenId t : request.forcing_tokens) {
    if (t >= vocab_.size) fail(ErrorCode::kArgument, "forcing token outside vocabulary");
  }

  DecodeTrace trace;
  trace.request = request;
  trace.vocab_hash = vocab_.hash_hex();
  trace.rng.seed = request.sampling.seed;
  trace.rng.sample_index = sample_index;
  trace.rng.base_seed = request.sampling.seed - sample_index;
  Rng rng(request.sampling.seed);

  const bool concurrent = providers_.target->prefers_concurrent_queries() ||
                          (guided && (providers_.base->prefers_concurrent_queries() ||
                                      providers_.guider->prefers_concurrent_queries()));
  std::optional<std::size_t> forcing_left = request.forcing_budget;

  auto emit = [&](TokenId token, bool fused, bool forced, std::optional<LogitSnapshot> snap) {
    StepRecord step{trace.steps.size(), token, fused, forced, std::move(snap)};
    trace.steps.push_back(std::move(step));
    if (observer) observer(trace.steps.back());
  };

  try {
    std::optional<ProviderSession> target_session, base_session, guider_session;
    target_session.emplace(providers_.target, options_.retry);
    if (guided) {
      base_session.emplace(providers_.base, options_.retry);
      guider_session.emplace(providers_.guider, options_.retry);
    }

    std::vector<TokenId> pending = request.prompt_tokens;
    bool stopped = false;
    while (!stopped && trace.steps.size() < request.max_new_tokens) {
      StepLogits q;
      if (guided && concurrent) {
        auto base_f = std::async(std::launch::async,
                                 [&] { return base_session->next_logits(pending); });
        auto guider_f = std::async(std::launch::async,
                                   [&] { return guider_session->next_logits(pending); });
        std::exception_ptr first_error;
        try {
          q.target = target_session->next_logits(pending);
        } catch (...) {
          first_error = std::current_exception();
        }
        // Join both before rethrowing so no task outlives this frame.
        for (auto* f : {&base_f, &guider_f}) {
          try {
            (f == &base_f ? q.base : q.guider) = f->get();
          } catch (...) {
            if (!first_error) first_error = std::current_exception();
          }
        }
        if (first_error) std::rethrow_exception(first_error);
      } else {
        q.target = target_session->next_logits(pending);
        if (guided) {
          q.base = base_session->next_logits(pending);
          q.guider = guider_session->next_logits(pending);
        }
      }
      pending.clear();

      const std::size_t generated = trace.steps.size();
      const bool fused = guided && guidance_active(request.guidance, generated);
      LogitVector used = guided ? fuse_with_warmup(q.target, q.guider, q.base, request.guidance,
                                                   generated)
                                : q.target;
      if (used.size() != vocab_.size) {
        fail(ErrorCode::kDimension, "provider returned " + std::to_string(used.size()) +
                                        " logits for a vocabulary of " +
                                        std::to_string(vocab_.size));
      }
      const TokenId token = sample_token(used, request.sampling, rng);

      std::optional<LogitSnapshot> snap;
      if (request.record_logits) {
        snap = LogitSnapshot{std::move(q.target), std::move(q.base), std::move(q.guider), used};
      }

      const bool is_eos = token == vocab_.eos_id;
      if (is_eos && request.mode == DecodeMode::kBudgetForcing &&
          (!forcing_left || *forcing_left > 0)) {
        if (forcing_left) --*forcing_left;
        ++trace.forcing_replacements;
        for (TokenId forced : request.forcing_tokens) {
          if (trace.steps.size() >= request.max_new_tokens) break;
          emit(forced, false, true, std::nullopt);
          pending.push_back(forced);
        }
        continue;
      }

      emit(token, fused, false, std::move(snap));
      pending.push_back(token);
      if (is_eos) {
        trace.stop_reason = StopReason::kEos;
        stopped = true;
      }
    }
    if (!stopped) trace.stop_reason = StopReason::kMaxTokens;
  } catch (const Error& e) {
    trace.stop_reason = StopReason::kAborted;
    trace.error_code = e.code();
    trace.error = e.what();
  }

  trace.generated_count = trace.steps.size();
  trace.rng.draws = rng.draws();
  const auto tokens = trace.tokens();
  trace.repeat_rate_4gram = ngram_repeat_rate(tokens);
  if (options_.vocab_table) trace.text = options_.vocab_table->detokenize(tokens);
  return trace;
}

DecodeTrace DecodeEngine::decode_budget_forcing(const DecodeRequest& request,
                                                const StepObserver& observer) const {
  if (request.mode != DecodeMode::kBudgetForcing) {
    fail(ErrorCode::kArgument, "decode_budget_forcing needs mode budget_forcing");
  }
  return decode(request, observer);
}

std::vector<BatchItem> DecodeEngine::decode_batch(std::span<const DecodeRequest> requests,
                                                  std::size_t n_samples) const {
  if (n_samples < 1) fail(ErrorCode::kArgument, "n_samples must be >= 1");
  for (const auto& r : requests) r.validate();

  std::vector<BatchItem> items(requests.size() * n_samples);
  for (std::size_t r = 0; r < requests.size(); ++r) {
    for (std::size_t s = 0; s < n_samples; ++s) {
      items[r * n_samples + s].request_index = r;
      items[r * n_samples + s].sample_index = s;
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      auto& item = items[i];
      DecodeRequest req = requests[item.request_index];
      req.sampling.seed += item.sample_index;
      try {
        item.trace = decode(req, {}, item.sample_index);
      } catch (const Error& e) {
        item.trace.request = req;
        item.trace.stop_reason = StopReason::kAborted;
        item.trace.error_code = e.code();
        item.trace.error = e.what();
      }
    }
  };

  const std::size_t threads = std::min(options_.parallelism, items.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return items;
}

}  // namespace logitfuse
