// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "logitfuse/remote_provider.hpp"

#include "httplib.h"
#include "logitfuse/wire.hpp"

namespace logitfuse {

using nlohmann::json;

struct RemoteProvider::Impl {
  explicit Impl(const std::string& endpoint) : endpoint(endpoint) {}

  // httplib::Client is not safe for concurrent use; a client per call keeps
  // concurrent sessions independent.
  httplib::Client client(const RemoteOptions& options) const {
    httplib::Client cli(endpoint);
    cli.set_connection_timeout(std::chrono::duration<double>(options.connect_timeout_s));
    cli.set_read_timeout(std::chrono::duration<double>(options.read_timeout_s));
    cli.set_keep_alive(false);
    return cli;
  }

  std::string endpoint;
};

namespace {

[[noreturn]] void raise_http(const std::string& endpoint, const std::string& path,
                             const httplib::Result& result) {
  if (!result) {
    fail(ErrorCode::kTransport, endpoint + path + ": " + httplib::to_string(result.error()));
  }
  std::string message = "HTTP " + std::to_string(result->status);
  try {
    const auto body = json::parse(result->body);
    message += ": " + body.at("error").at("message").get<std::string>();
  } catch (const json::exception&) {
    if (!result->body.empty()) message += ": " + result->body;
  }
  fail(wire::error_code_for_status(result->status), endpoint + path + ": " + message);
}

json post_json(httplib::Client& cli, const std::string& endpoint, const std::string& path,
               const json& body) {
  auto result = cli.Post(path, body.dump(), "application/json");
  if (!result || result->status != 200) raise_http(endpoint, path, result);
  try {
    return json::parse(result->body);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kTransport, endpoint + path + ": invalid JSON response: " + e.what());
  }
}

}  // namespace

RemoteProvider::RemoteProvider(std::string endpoint, RemoteOptions options)
    : endpoint_(std::move(endpoint)),
      options_(std::move(options)),
      impl_(std::make_unique<Impl>(endpoint_)) {}

RemoteProvider::~RemoteProvider() = default;

VocabDescriptor RemoteProvider::describe_vocab() {
  std::lock_guard lock(descriptor_mu_);
  if (!descriptor_) {
    auto cli = impl_->client(options_);
    descriptor_ = wire::descriptor_from_json(post_json(cli, endpoint_, "/v1/vocab", json::object()));
  }
  return *descriptor_;
}

std::string RemoteProvider::open_session() {
  auto cli = impl_->client(options_);
  json body = json::object();
  if (options_.expected_vocab_hash) body["vocab_hash"] = *options_.expected_vocab_hash;
  const auto reply = post_json(cli, endpoint_, "/v1/session", body);
  if (!reply.contains("session_id") || !reply["session_id"].is_string()) {
    fail(ErrorCode::kTransport, endpoint_ + "/v1/session: response lacks session_id");
  }
  return reply["session_id"].get<std::string>();
}

std::string RemoteProvider::logits_b64(const std::string& session_id,
                                       std::span<const TokenId> append_tokens) {
  auto cli = impl_->client(options_);
  const json body = {{"session_id", session_id},
                     {"append_tokens", std::vector<TokenId>(append_tokens.begin(),
                                                            append_tokens.end())}};
  const auto reply = post_json(cli, endpoint_, "/v1/logits", body);
  if (!reply.contains("logits_b64") || !reply["logits_b64"].is_string()) {
    fail(ErrorCode::kTransport, endpoint_ + "/v1/logits: response lacks logits_b64");
  }
  return reply["logits_b64"].get<std::string>();
}

LogitVector RemoteProvider::next_logits(const std::string& session_id,
                                        std::span<const TokenId> append_tokens) {
  const auto size = describe_vocab().size;
  return wire::decode_logits(logits_b64(session_id, append_tokens), size);
}

LogitVector RemoteProvider::logits_for_prefix(std::span<const TokenId> prefix) {
  const auto size = describe_vocab().size;
  auto cli = impl_->client(options_);
  const json body = {{"tokens", std::vector<TokenId>(prefix.begin(), prefix.end())}};
  const auto reply = post_json(cli, endpoint_, "/v1/logits", body);
  if (!reply.contains("logits_b64") || !reply["logits_b64"].is_string()) {
    fail(ErrorCode::kTransport, endpoint_ + "/v1/logits: response lacks logits_b64");
  }
  return wire::decode_logits(reply["logits_b64"].get<std::string>(), size);
}

void RemoteProvider::close_session(const std::string& session_id) {
  auto cli = impl_->client(options_);
  const std::string path = "/v1/session/" + session_id;
  auto result = cli.Delete(path);
  if (!result || result->status != 204) raise_http(endpoint_, path, result);
}

}  // namespace logitfuse
