// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "logitfuse/provider.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "logitfuse/error.hpp"

namespace logitfuse {

using nlohmann::json;

ProviderSession::ProviderSession(ProviderPtr provider, RetryPolicy retry)
    : provider_(std::move(provider)), retry_(retry) {
  if (!provider_) fail(ErrorCode::kArgument, "null provider");
  session_id_ = provider_->open_session();
}

ProviderSession::~ProviderSession() {
  if (!provider_ || stateless_) return;
  try {
    provider_->close_session(session_id_);
  } catch (...) {
    // The remote side may already be gone; nothing useful to do here.
  }
}

LogitVector ProviderSession::next_logits(std::span<const TokenId> new_tokens) {
  prefix_.insert(prefix_.end(), new_tokens.begin(), new_tokens.end());
  if (stateless_) return requery_stateless("session in stateless mode");
  try {
    return provider_->next_logits(session_id_, new_tokens);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kTransport && e.code() != ErrorCode::kUnknownSession) throw;
    stateless_ = true;
    return requery_stateless(e.what());
  }
}

LogitVector ProviderSession::requery_stateless(const std::string& cause) {
  std::string last_error = cause;
  for (int attempt = 0; attempt <= retry_.max_retries; ++attempt) {
    try {
      return provider_->logits_for_prefix(prefix_);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTransport) throw;
      last_error = e.what();
    }
    if (attempt < retry_.max_retries) std::this_thread::sleep_for(retry_.backoff);
  }
  fail(ErrorCode::kTransport, provider_->name() + ": " + last_error);
}

TableLM::TableLM(VocabTable vocab, std::size_t order, Table table, LogitVector default_logits,
                 std::string name)
    : vocab_(std::move(vocab)),
      order_(order),
      table_(std::move(table)),
      default_(std::move(default_logits)),
      name_(std::move(name)) {
  if (order_ == 0) fail(ErrorCode::kArgument, "TableLM order must be positive");
  if (default_.empty()) default_.assign(vocab_.size(), 0.0f);
  if (default_.size() != vocab_.size()) {
    fail(ErrorCode::kDimension, "default logits length differs from vocabulary size");
  }
  require_finite(default_, "default logits");
  for (const auto& [context, logits] : table_) {
    if (context.size() > order_) {
      fail(ErrorCode::kArgument, "table context longer than model order");
    }
    check_tokens(context);
    if (logits.size() != vocab_.size()) {
      fail(ErrorCode::kDimension, "table entry length differs from vocabulary size");
    }
    require_finite(logits, "table entry");
  }
}

void TableLM::check_tokens(std::span<const TokenId> tokens) const {
  for (TokenId t : tokens) {
    if (t >= vocab_.size()) {
      fail(ErrorCode::kMalformed, "token id " + std::to_string(t) + " outside vocabulary of " +
                                      std::to_string(vocab_.size()));
    }
  }
}

const LogitVector& TableLM::lookup(std::span<const TokenId> prefix) const {
  const std::size_t n = std::min(order_, prefix.size());
  const std::vector<TokenId> key(prefix.end() - static_cast<std::ptrdiff_t>(n), prefix.end());
  const auto it = table_.find(key);
  return it == table_.end() ? default_ : it->second;
}

std::string TableLM::open_session() {
  std::lock_guard lock(mu_);
  std::string id = "s" + std::to_string(next_session_++);
  sessions_.emplace(id, std::vector<TokenId>{});
  return id;
}

LogitVector TableLM::next_logits(const std::string& session_id,
                                 std::span<const TokenId> append_tokens) {
  check_tokens(append_tokens);
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end()) fail(ErrorCode::kUnknownSession, "unknown session " + session_id);
  it->second.insert(it->second.end(), append_tokens.begin(), append_tokens.end());
  return lookup(it->second);
}

LogitVector TableLM::logits_for_prefix(std::span<const TokenId> prefix) {
  check_tokens(prefix);
  return lookup(prefix);
}

void TableLM::close_session(const std::string& session_id) {
  std::lock_guard lock(mu_);
  if (sessions_.erase(session_id) == 0) {
    fail(ErrorCode::kUnknownSession, "unknown session " + session_id);
  }
}

std::size_t TableLM::open_sessions() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

std::shared_ptr<TableLM> TableLM::from_json_text(const std::string& text,
                                                 const std::string& name) {
  json doc;
  try {
    doc = json::parse(text);
    auto tokens = doc.at("tokens").get<std::vector<std::string>>();
    const auto eos = doc.at("eos_id").get<TokenId>();
    auto specials = doc.value("special_ids", std::vector<TokenId>{});
    const auto order = doc.at("order").get<std::size_t>();
    LogitVector fallback = doc.value("default_logits", LogitVector{});
    Table table;
    for (const auto& entry : doc.at("table")) {
      table[entry.at("context").get<std::vector<TokenId>>()] =
          entry.at("logits").get<LogitVector>();
    }
    return std::make_shared<TableLM>(VocabTable(std::move(tokens), eos, std::move(specials)),
                                     order, std::move(table), std::move(fallback), name);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, name + ": invalid TableLM fixture: " + e.what());
  }
}

std::shared_ptr<TableLM> TableLM::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open TableLM fixture " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str(), path);
}

std::string TableLM::to_json_text() const {
  json doc;
  doc["tokens"] = vocab_.tokens();
  doc["eos_id"] = vocab_.eos_id();
  doc["special_ids"] = vocab_.descriptor().special_ids;
  doc["order"] = order_;
  doc["default_logits"] = default_;
  json entries = json::array();
  for (const auto& [context, logits] : table_) {
    entries.push_back({{"context", context}, {"logits", logits}});
  }
  doc["table"] = std::move(entries);
  return doc.dump();
}

}  // namespace logitfuse
