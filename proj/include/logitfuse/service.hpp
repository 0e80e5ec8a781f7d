// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "logitfuse/decode.hpp"

namespace httplib {
class Server;
}

namespace logitfuse {

struct FieldError {
  std::string field;
  std::string message;
};

// Parses a /v1/generate body on top of `defaults`. Every problem is reported,
// not just the first; the result is meaningful only when `errors` is empty.
DecodeRequest parse_generate_request(const nlohmann::json& body, const DecodeRequest& defaults,
                                     std::vector<FieldError>& errors);

struct ServiceOptions {
  std::size_t max_concurrent = 4;
  DecodeRequest defaults;
};

// HTTP front end for the decode engine.
//
//   POST /v1/generate  {prompt_tokens, guidance?, sampling?, max_new_tokens?,
//                       mode?, forcing_tokens?, forcing_budget?}
//     200: chunked JSON lines, one {"type":"token",...} per step then a
//          {"type":"done",...} summary or {"type":"error",...}.
//     409: provider vocabularies disagree (service started degraded)
//     422: malformed body, with per-field messages
//     503: max_concurrent decodes already in flight
//   GET  /v1/health
//
// Each request owns its decode loop and provider sessions. stop() stops
// accepting connections and waits for in-flight decodes to finish.
class FusionService {
 public:
  FusionService(std::shared_ptr<const DecodeEngine> engine, ServiceOptions options);
  // Degraded service: every generate call is refused with 409 and `reason`.
  FusionService(std::string degraded_reason, ServiceOptions options);
  ~FusionService();

  FusionService(const FusionService&) = delete;
  FusionService& operator=(const FusionService&) = delete;

  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();

  int port() const { return port_; }
  std::string endpoint() const;
  std::size_t in_flight() const { return in_flight_; }

 private:
  void install_routes();

  std::shared_ptr<const DecodeEngine> engine_;
  std::string degraded_reason_;
  ServiceOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::string host_ = "127.0.0.1";
  int port_ = 0;
  std::atomic<std::size_t> in_flight_{0};
};

}  // namespace logitfuse
