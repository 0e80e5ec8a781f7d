// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "logitfuse/wire.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>

#include "httplib.h"

namespace logitfuse::wire {

using nlohmann::json;

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) fail(ErrorCode::kMalformed, "base64 length not a multiple of 4");
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) fail(ErrorCode::kMalformed, "invalid base64 payload");
  std::size_t padding = 0;
  if (!text.empty() && text.back() == '=') ++padding;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

std::vector<std::uint8_t> logits_to_bytes(std::span<const float> logits) {
  std::vector<std::uint8_t> out(logits.size() * 4);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(logits[i]);
    for (int b = 0; b < 4; ++b) out[4 * i + b] = static_cast<std::uint8_t>(bits >> (8 * b));
  }
  return out;
}

LogitVector logits_from_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 4 != 0) fail(ErrorCode::kMalformed, "logit payload not a multiple of 4 bytes");
  LogitVector out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

std::string encode_logits(std::span<const float> logits) {
  return base64_encode(logits_to_bytes(logits));
}

LogitVector decode_logits(const std::string& b64, std::size_t expected_size) {
  auto logits = logits_from_bytes(base64_decode(b64));
  if (expected_size != 0 && logits.size() != expected_size) {
    fail(ErrorCode::kDimension, "logit payload has " + std::to_string(logits.size()) +
                                    " entries, expected " + std::to_string(expected_size));
  }
  return logits;
}

json descriptor_to_json(const VocabDescriptor& d) {
  return {{"size", d.size},
          {"content_hash", d.hash_hex()},
          {"eos_id", d.eos_id},
          {"special_ids", d.special_ids}};
}

VocabDescriptor descriptor_from_json(const json& j) {
  try {
    VocabDescriptor d;
    d.size = j.at("size").get<std::uint32_t>();
    d.content_hash = vocab_hash_from_hex(j.at("content_hash").get<std::string>());
    d.eos_id = j.at("eos_id").get<TokenId>();
    d.special_ids = j.value("special_ids", std::vector<TokenId>{});
    d.validate();
    return d;
  } catch (const json::exception& e) {
    fail(ErrorCode::kMalformed, std::string("invalid vocab descriptor: ") + e.what());
  }
}

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownSession: return 404;
    case ErrorCode::kVocabMismatch: return 409;
    case ErrorCode::kMalformed:
    case ErrorCode::kArgument:
    case ErrorCode::kDimension: return 422;
    case ErrorCode::kSaturated: return 503;
    case ErrorCode::kTransport: return 502;
    default: return 500;
  }
}

ErrorCode error_code_for_status(int status) {
  switch (status) {
    case 404: return ErrorCode::kUnknownSession;
    case 409: return ErrorCode::kVocabMismatch;
    case 422: return ErrorCode::kMalformed;
    case 503: return ErrorCode::kSaturated;
    default: return ErrorCode::kTransport;
  }
}

json error_body(ErrorCode code, const std::string& message) {
  return {{"error", {{"code", error_code_name(code)}, {"message", message}}}};
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  send_json(res, http_status_for(code), error_body(code, message));
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    auto body = json::parse(req.body);
    if (!body.is_object()) fail(ErrorCode::kMalformed, "request body must be a JSON object");
    return body;
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kMalformed, std::string("invalid JSON body: ") + e.what());
  }
}

std::vector<TokenId> token_array(const json& body, const char* field) {
  const auto it = body.find(field);
  if (it == body.end()) return {};
  if (!it->is_array()) fail(ErrorCode::kMalformed, std::string(field) + " must be an array");
  std::vector<TokenId> out;
  out.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_number_unsigned()) {
      fail(ErrorCode::kMalformed, std::string(field) + " must hold non-negative integers");
    }
    const auto raw = v.get<std::uint64_t>();
    if (raw > UINT32_MAX) fail(ErrorCode::kMalformed, std::string(field) + " entry too large");
    out.push_back(static_cast<TokenId>(raw));
  }
  return out;
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_error(res, e.code(), e.what());
  } catch (const std::exception& e) {
    send_json(res, 500, error_body(ErrorCode::kTransport, e.what()));
  }
}

}  // namespace

ProviderServer::ProviderServer(ProviderPtr provider)
    : provider_(std::move(provider)), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

ProviderServer::~ProviderServer() { stop(); }

void ProviderServer::install_routes() {
  server_->Post("/v1/vocab", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, descriptor_to_json(provider_->describe_vocab())); });
  });

  server_->Post("/v1/session", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = parse_body(req);
      if (const auto it = body.find("vocab_hash"); it != body.end()) {
        if (!it->is_string()) fail(ErrorCode::kMalformed, "vocab_hash must be a string");
        const auto mine = provider_->describe_vocab().hash_hex();
        if (it->get<std::string>() != mine) {
          fail(ErrorCode::kVocabMismatch, "vocab hash mismatch: server has " + mine);
        }
      }
      send_json(res, 200, {{"session_id", provider_->open_session()}});
    });
  });

  server_->Post("/v1/logits", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      ++logits_requests_;
      const auto body = parse_body(req);
      LogitVector logits;
      if (const auto it = body.find("session_id"); it != body.end()) {
        if (!it->is_string()) fail(ErrorCode::kMalformed, "session_id must be a string");
        logits = provider_->next_logits(it->get<std::string>(), token_array(body, "append_tokens"));
      } else if (body.contains("tokens")) {
        logits = provider_->logits_for_prefix(token_array(body, "tokens"));
      } else {
        fail(ErrorCode::kMalformed, "body needs session_id or tokens");
      }
      send_json(res, 200, {{"logits_b64", encode_logits(logits)}});
    });
  });

  server_->Delete(R"(/v1/session/([^/]+))",
                  [this](const httplib::Request& req, httplib::Response& res) {
                    guarded(res, [&] {
                      provider_->close_session(req.matches[1].str());
                      res.status = 204;
                    });
                  });
}

int ProviderServer::start(const std::string& host, int port) {
  host_ = host;
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    if (!server_->bind_to_port(host, port)) port_ = -1;
    else port_ = port;
  }
  if (port_ < 0) fail(ErrorCode::kTransport, "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void ProviderServer::listen_blocking(const std::string& host, int port) {
  host_ = host;
  port_ = port;
  if (!server_->listen(host, port)) {
    fail(ErrorCode::kTransport, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void ProviderServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string ProviderServer::endpoint() const {
  return "http://" + host_ + ":" + std::to_string(port_);
}

}  // namespace logitfuse::wire
