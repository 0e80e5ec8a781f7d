// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "logitfuse/fusion.hpp"
#include "logitfuse/vocab.hpp"

namespace logitfuse {

// Source of next-token logits for a growing token prefix.
//
// Implementations must accept many concurrent sessions. A given session is
// only driven by one caller at a time.
class LogitProvider {
 public:
  virtual ~LogitProvider() = default;

  virtual VocabDescriptor describe_vocab() = 0;

  virtual std::string open_session() = 0;

  // Appends `append_tokens` to the session prefix and returns the logits for
  // the next position. An empty append re-queries the current prefix.
  virtual LogitVector next_logits(const std::string& session_id,
                                  std::span<const TokenId> append_tokens) = 0;

  // Stateless query over a full prefix; must agree with the session path.
  virtual LogitVector logits_for_prefix(std::span<const TokenId> prefix) = 0;

  virtual void close_session(const std::string& session_id) = 0;

  // Human-readable identity used in error messages (endpoint or fixture path).
  virtual std::string name() const = 0;

  // Remote providers benefit from issuing the per-step queries in parallel.
  virtual bool prefers_concurrent_queries() const { return false; }

  // Token strings when the provider has them locally.
  virtual const VocabTable* token_table() const { return nullptr; }
};

using ProviderPtr = std::shared_ptr<LogitProvider>;

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds backoff{50};
};

// One decode loop's view of a provider: owns the remote session and a local
// copy of the prefix. Closing happens on destruction.
//
// If a session query fails at the transport level or the session is no longer
// known to the provider, the same step is re-queried statelessly with the
// full prefix (at most `retry.max_retries` times, fixed backoff) and the
// session stays in stateless mode afterwards.
class ProviderSession {
 public:
  ProviderSession(ProviderPtr provider, RetryPolicy retry = {});
  ~ProviderSession();

  ProviderSession(const ProviderSession&) = delete;
  ProviderSession& operator=(const ProviderSession&) = delete;
  ProviderSession(ProviderSession&&) noexcept = default;
  ProviderSession& operator=(ProviderSession&&) noexcept = default;

  LogitVector next_logits(std::span<const TokenId> new_tokens);

  const std::vector<TokenId>& prefix() const { return prefix_; }
  const std::string& id() const { return session_id_; }
  bool stateless() const { return stateless_; }
  LogitProvider& provider() { return *provider_; }

 private:
  LogitVector requery_stateless(const std::string& cause);

  ProviderPtr provider_;
  RetryPolicy retry_;
  std::string session_id_;
  std::vector<TokenId> prefix_;
  bool stateless_ = false;
};

// Deterministic n-gram lookup model used as a stand-in language model.
//
// The logits for a prefix are the table entry keyed by its last
// min(order, t) tokens; contexts absent from the table return the default
// vector (all zeros, i.e. uniform, unless declared otherwise).
class TableLM : public LogitProvider {
 public:
  using Table = std::map<std::vector<TokenId>, LogitVector>;

  TableLM(VocabTable vocab, std::size_t order, Table table,
          LogitVector default_logits = {}, std::string name = "table-lm");

  // JSON fixture: {tokens, eos_id, special_ids?, order, default_logits?,
  // table: [{context, logits}]}.
  static std::shared_ptr<TableLM> from_json_text(const std::string& text,
                                                 const std::string& name = "table-lm");
  static std::shared_ptr<TableLM> from_file(const std::string& path);
  std::string to_json_text() const;

  VocabDescriptor describe_vocab() override { return vocab_.descriptor(); }
  std::string open_session() override;
  LogitVector next_logits(const std::string& session_id,
                          std::span<const TokenId> append_tokens) override;
  LogitVector logits_for_prefix(std::span<const TokenId> prefix) override;
  void close_session(const std::string& session_id) override;
  std::string name() const override { return name_; }
  const VocabTable* token_table() const override { return &vocab_; }

  std::size_t order() const { return order_; }
  const Table& table() const { return table_; }
  const LogitVector& default_logits() const { return default_; }
  std::size_t open_sessions() const;

 private:
  const LogitVector& lookup(std::span<const TokenId> prefix) const;
  void check_tokens(std::span<const TokenId> tokens) const;

  VocabTable vocab_;
  std::size_t order_;
  Table table_;
  LogitVector default_;
  std::string name_;

  mutable std::mutex mu_;
  std::map<std::string, std::vector<TokenId>> sessions_;
  std::uint64_t next_session_ = 1;
};

}  // namespace logitfuse
