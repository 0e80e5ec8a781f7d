// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "logitfuse/vocab.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <memory>

#include "logitfuse/error.hpp"

namespace logitfuse {

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

VocabHash vocab_hash_from_hex(const std::string& hex) {
  auto nibble = [&](char c) -> std::uint8_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
    fail(ErrorCode::kMalformed, "invalid hex digit in vocab hash");
  };
  VocabHash out{};
  if (hex.size() != out.size() * 2) {
    fail(ErrorCode::kMalformed, "vocab hash must be 64 hex digits");
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  }
  return out;
}

VocabHash hash_token_table(std::span<const std::string> tokens) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                               &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::kNumeric, "sha256 initialisation failed");
  }
  for (const auto& token : tokens) {
    const auto n = static_cast<std::uint32_t>(token.size());
    const std::uint8_t len[4] = {static_cast<std::uint8_t>(n), static_cast<std::uint8_t>(n >> 8),
                                 static_cast<std::uint8_t>(n >> 16),
                                 static_cast<std::uint8_t>(n >> 24)};
    EVP_DigestUpdate(ctx.get(), len, sizeof(len));
    EVP_DigestUpdate(ctx.get(), token.data(), token.size());
  }
  VocabHash out{};
  unsigned int written = 0;
  EVP_DigestFinal_ex(ctx.get(), out.data(), &written);
  return out;
}

std::string VocabDescriptor::hash_hex() const { return to_hex(content_hash); }

void VocabDescriptor::validate() const {
  if (size == 0) fail(ErrorCode::kMalformed, "vocabulary size must be positive");
  if (eos_id >= size) fail(ErrorCode::kMalformed, "eos_id outside vocabulary");
  for (TokenId id : special_ids) {
    if (id >= size) fail(ErrorCode::kMalformed, "special id outside vocabulary");
  }
}

VocabTable::VocabTable(std::vector<std::string> tokens, TokenId eos_id,
                       std::vector<TokenId> special_ids)
    : tokens_(std::move(tokens)), eos_id_(eos_id), special_ids_(std::move(special_ids)) {
  std::sort(special_ids_.begin(), special_ids_.end());
  special_ids_.erase(std::unique(special_ids_.begin(), special_ids_.end()), special_ids_.end());
  descriptor_.size = static_cast<std::uint32_t>(tokens_.size());
  descriptor_.content_hash = hash_token_table(tokens_);
  descriptor_.eos_id = eos_id_;
  descriptor_.special_ids = special_ids_;
  descriptor_.validate();
}

std::string VocabTable::detokenize(std::span<const TokenId> ids, bool skip_special) const {
  std::string out;
  for (TokenId id : ids) {
    if (id >= tokens_.size()) fail(ErrorCode::kMalformed, "token id outside vocabulary");
    if (skip_special && (id == eos_id_ || std::binary_search(special_ids_.begin(),
                                                             special_ids_.end(), id))) {
      continue;
    }
    out += tokens_[id];
  }
  return out;
}

const char* vocab_field_name(VocabField field) {
  switch (field) {
    case VocabField::kSize: return "size";
    case VocabField::kHash: return "content_hash";
    case VocabField::kEos: return "eos_id";
  }
  return "?";
}

CompatibilityReport check_compatibility(const VocabDescriptor& a, const VocabDescriptor& b,
                                        const VocabDescriptor& c) {
  const VocabDescriptor* others[] = {&b, &c};
  auto differs = [&](VocabField field, const VocabDescriptor& d) {
    switch (field) {
      case VocabField::kSize: return d.size != a.size;
      case VocabField::kHash: return d.content_hash != a.content_hash;
      case VocabField::kEos: return d.eos_id != a.eos_id;
    }
    return false;
  };
  auto value = [](VocabField field, const VocabDescriptor& d) -> std::string {
    switch (field) {
      case VocabField::kSize: return std::to_string(d.size);
      case VocabField::kHash: return d.hash_hex();
      case VocabField::kEos: return std::to_string(d.eos_id);
    }
    return {};
  };

  for (VocabField field : {VocabField::kSize, VocabField::kHash, VocabField::kEos}) {
    for (int i = 0; i < 2; ++i) {
      if (differs(field, *others[i])) {
        CompatibilityReport report;
        report.ok = false;
        report.field = field;
        report.offender = i + 1;
        report.message = std::string("vocabulary ") + vocab_field_name(field) +
                         " of descriptor " + std::to_string(i + 1) + " (" +
                         value(field, *others[i]) + ") differs from descriptor 0 (" +
                         value(field, a) + ")";
        return report;
      }
    }
  }
  return {};
}

}  // namespace logitfuse
