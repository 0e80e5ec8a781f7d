// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Fusion wire protocol v1.
//
//   POST   /v1/vocab               -> {size, content_hash, eos_id, special_ids}
//   POST   /v1/session  {vocab_hash?}            -> {session_id}
//   POST   /v1/logits   {session_id, append_tokens} -> {logits_b64}
//   POST   /v1/logits   {tokens}   (stateless full prefix) -> {logits_b64}
//   DELETE /v1/session/{id}        -> 204
//
// logits_b64 is base64 over |V| little-endian IEEE-754 binary32 values, so
// scores cross the wire bit-exactly. Errors are {"error": {code, message}}
// with 404 unknown session, 409 vocab mismatch, 422 malformed tokens.

#include <atomic>
#include <memory>
#include <span>
#include <string>
#include <thread>

#include "json.hpp"

#include "logitfuse/error.hpp"
#include "logitfuse/provider.hpp"

namespace httplib {
class Server;
}

namespace logitfuse::wire {

inline constexpr const char* kProtocolVersion = "v1";

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

std::vector<std::uint8_t> logits_to_bytes(std::span<const float> logits);
LogitVector logits_from_bytes(std::span<const std::uint8_t> bytes);

std::string encode_logits(std::span<const float> logits);
// Throws kMalformed when the payload is not a whole number of floats and
// kDimension when it does not match `expected_size` (0 disables the check).
LogitVector decode_logits(const std::string& b64, std::size_t expected_size = 0);

nlohmann::json descriptor_to_json(const VocabDescriptor& d);
VocabDescriptor descriptor_from_json(const nlohmann::json& j);

int http_status_for(ErrorCode code);
ErrorCode error_code_for_status(int status);
nlohmann::json error_body(ErrorCode code, const std::string& message);

// Serves any LogitProvider over the wire protocol. Used as the mock backend in
// tests and by the `serve-provider` CLI command.
class ProviderServer {
 public:
  explicit ProviderServer(ProviderPtr provider);
  ~ProviderServer();

  ProviderServer(const ProviderServer&) = delete;
  ProviderServer& operator=(const ProviderServer&) = delete;

  // Binds and serves on a background thread. Port 0 picks a free port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Blocks the caller until stop() is called from another thread.
  void listen_blocking(const std::string& host, int port);
  void stop();

  int port() const { return port_; }
  std::string endpoint() const;
  std::size_t logits_requests() const { return logits_requests_; }

 private:
  void install_routes();

  ProviderPtr provider_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::string host_ = "127.0.0.1";
  int port_ = 0;
  std::atomic<std::size_t> logits_requests_{0};
};

}  // namespace logitfuse::wire
