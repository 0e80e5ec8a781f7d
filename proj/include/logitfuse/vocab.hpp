// Copyright 2026 The logitfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "logitfuse/fusion.hpp"

namespace logitfuse {

using VocabHash = std::array<std::uint8_t, 32>;

struct VocabDescriptor {
  std::uint32_t size = 0;
  VocabHash content_hash{};
  TokenId eos_id = 0;
  std::vector<TokenId> special_ids;

  std::string hash_hex() const;
  void validate() const;

  friend bool operator==(const VocabDescriptor&, const VocabDescriptor&) = default;
};

// SHA-256 over the ordered token table. Each entry contributes its byte
// length as a little-endian uint32 followed by the raw bytes, in token-id
// order. Any other implementation of the wire protocol must reproduce this.
VocabHash hash_token_table(std::span<const std::string> tokens);

std::string to_hex(std::span<const std::uint8_t> bytes);
VocabHash vocab_hash_from_hex(const std::string& hex);

// Token strings plus the ids the engine needs to know about.
class VocabTable {
 public:
  VocabTable() = default;
  VocabTable(std::vector<std::string> tokens, TokenId eos_id,
             std::vector<TokenId> special_ids = {});

  std::uint32_t size() const { return static_cast<std::uint32_t>(tokens_.size()); }
  TokenId eos_id() const { return eos_id_; }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(TokenId id) const { return tokens_.at(id); }

  const VocabDescriptor& descriptor() const { return descriptor_; }

  // Concatenates token strings; special tokens are dropped when
  // `skip_special` is set.
  std::string detokenize(std::span<const TokenId> ids, bool skip_special = true) const;

 private:
  std::vector<std::string> tokens_;
  TokenId eos_id_ = 0;
  std::vector<TokenId> special_ids_;
  VocabDescriptor descriptor_;
};

enum class VocabField { kSize, kHash, kEos };

const char* vocab_field_name(VocabField field);

struct CompatibilityReport {
  bool ok = true;
  // Set when !ok: the first differing field and which descriptor (0, 1 or 2)
  // disagrees with descriptor 0.
  std::optional<VocabField> field;
  int offender = -1;
  std::string message;
};

// Fields are compared in the order size, hash, eos; within a field the second
// descriptor is checked before the third.
CompatibilityReport check_compatibility(const VocabDescriptor& a, const VocabDescriptor& b,
                                        const VocabDescriptor& c);

}  // namespace logitfuse
