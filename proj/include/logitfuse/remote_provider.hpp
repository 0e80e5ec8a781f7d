// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "logitfuse/provider.hpp"

namespace logitfuse {

struct RemoteOptions {
  double connect_timeout_s = 5.0;
  double read_timeout_s = 60.0;
  // When set, session creation asks the server to confirm this vocab hash.
  std::optional<std::string> expected_vocab_hash;
};

// Client side of the fusion wire protocol (see wire.hpp).
//
// Transport failures and non-2xx answers surface as Error with the endpoint
// in the message. The descriptor is fetched once and cached.
class RemoteProvider : public LogitProvider {
 public:
  explicit RemoteProvider(std::string endpoint, RemoteOptions options = {});
  ~RemoteProvider() override;

  VocabDescriptor describe_vocab() override;
  std::string open_session() override;
  LogitVector next_logits(const std::string& session_id,
                          std::span<const TokenId> append_tokens) override;
  LogitVector logits_for_prefix(std::span<const TokenId> prefix) override;
  void close_session(const std::string& session_id) override;
  std::string name() const override { return endpoint_; }
  bool prefers_concurrent_queries() const override { return true; }

  // Raw payload access for bit-exactness checks.
  std::string logits_b64(const std::string& session_id, std::span<const TokenId> append_tokens);

 private:
  struct Impl;

  std::string endpoint_;
  RemoteOptions options_;
  std::unique_ptr<Impl> impl_;
  std::mutex descriptor_mu_;
  std::optional<VocabDescriptor> descriptor_;
};

}  // namespace logitfuse
