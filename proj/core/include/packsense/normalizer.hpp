// Copyright 2026 The PackSense Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "packsense/binimage.hpp"
#include "packsense/common.hpp"
#include "packsense/disasm.hpp"

namespace packsense::normalizer {

using TokenId = std::int32_t;

// Reserved ids of the special tokens. Their order is part of the checkpoint
// format and must never change.
enum Special : TokenId {
  kSos = 0,
  kEos,
  kMask,
  kPad,
  kConst,
  kConstNormal,
  kConstAbnormal,
  kMemNormal,
  kMemAbnormal,
  kPadNormal,
  kPadAbnormal,
  kSpecialCount,
};

/// Token classes; Randomize replacements stay within a class.
enum class TokenClass : std::uint8_t { Control, OperandLabel, Prefix, Mnemonic, Register, Scale };

class Vocabulary {
 public:
  static constexpr int kFormatVersion = 1;

  std::size_t size() const { return tokens_.size(); }
  std::optional<TokenId> find(std::string_view text) const;
  /// Throws Error{InvalidSpec} for unknown tokens.
  TokenId id(std::string_view text) const;
  std::string_view text(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  TokenClass token_class(TokenId id) const { return classes_.at(static_cast<std::size_t>(id)); }
  /// All ids in a class, ascending.
  const std::vector<TokenId>& members(TokenClass c) const { return members_[static_cast<std::size_t>(c)]; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Versioned text form: a header line, then one token per line where the
  /// zero-based line number after the header is the token id.
  std::string serialize() const;
  static Vocabulary deserialize(std::string_view text);
  /// SHA-256 (hex) of serialize().
  std::string hash() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  friend Vocabulary build_vocabulary();
  void add(std::string_view text, TokenClass c);

  std::vector<std::string> tokens_;
  std::vector<TokenClass> classes_;
  std::unordered_map<std::string, TokenId> lookup_;
  std::vector<std::vector<TokenId>> members_ = std::vector<std::vector<TokenId>>(6);
};

/// Closed vocabulary: specials, prefixes, mnemonics, registers, scale tokens.
Vocabulary build_vocabulary();
/// Process-wide instance of build_vocabulary().
const Vocabulary& default_vocabulary();

struct NormalizeOptions {
  /// Raw bytes that count as ordinary padding.
  std::vector<std::uint8_t> pad_normal_bytes{0x00, 0xCC, 0x90};
};

/// Normalized tokens of one unit, always ending in [EOS].
std::vector<TokenId> normalize_unit(const disasm::DecodedUnit& unit, const binimage::AddressRange& range,
                                    const Vocabulary& vocab = default_vocabulary(),
                                    const NormalizeOptions& options = {});

/// Label for a displacement inside a register-relative memory expression.
Special register_relative_displacement_label(std::int64_t displacement, const binimage::AddressRange& range);

struct WindowSource {
  std::string image_id;
  std::string section;
  std::uint64_t first_offset = 0;
};

struct TokenWindow {
  std::vector<TokenId> tokens;
  /// Half-open token index ranges, one per instruction; each ends at an [EOS].
  std::vector<std::pair<std::uint32_t, std::uint32_t>> instr_spans;
  WindowSource source;
  std::optional<RegionLabel> label;
};

inline constexpr std::size_t kMaxWindowTokens = 512;

/// Greedy packing of whole instructions into windows that start with [SOS]. An
/// instruction that cannot fit even in an empty window is truncated and gets a
/// forced trailing [EOS].
std::vector<TokenWindow> windowize_tokens(std::span<const std::vector<TokenId>> instructions,
                                          std::size_t max_len = kMaxWindowTokens);

struct InstructionWindow {
  std::size_t first_unit = 0;
  std::size_t unit_count = 0;
  std::uint64_t byte_start = 0;  // file offset of the first unit
  std::uint64_t byte_end = 0;    // one past the last unit
};

struct InstructionWindowOptions {
  std::size_t count = 100;
  std::size_t floor = 10;
  std::size_t stride = 0;  // 0 means count (non-overlapping)
};

std::vector<InstructionWindow> windowize_instructions(std::span<const disasm::DecodedUnit> units,
                                                      const InstructionWindowOptions& options = {});

/// Normalizes a group of units into a single token window. Instructions that
/// do not fit in max_len tokens are dropped from the end.
TokenWindow window_from_units(std::span<const disasm::DecodedUnit> units, const binimage::AddressRange& range,
                              const Vocabulary& vocab = default_vocabulary(), std::size_t max_len = kMaxWindowTokens);

}  // namespace packsense::normalizer
