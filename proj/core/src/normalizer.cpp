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

#include "packsense/normalizer.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

namespace packsense::normalizer {

namespace {

constexpr std::string_view kHeader = "packsense-vocab";
constexpr std::array<std::string_view, kSpecialCount> kSpecialText = {
    "[SOS]",          "[EOS]",      "[MASK]",       "[PAD]",        "[const]",       "[const_normal]",
    "[const_abnormal]", "[mem_normal]", "[mem_abnormal]", "[pad_normal]", "[pad_abnormal]",
};
constexpr std::array<std::string_view, 4> kScaleText = {"*1", "*2", "*4", "*8"};

TokenClass special_class(TokenId id) {
  return id >= kConst ? TokenClass::OperandLabel : TokenClass::Control;
}

TokenId scale_token(const Vocabulary& v, std::uint8_t scale) {
  switch (scale) {
    case 1: return v.id("*1");
    case 2: return v.id("*2");
    case 4: return v.id("*4");
    default: return v.id("*8");
  }
}

}  // namespace

void Vocabulary::add(std::string_view text, TokenClass c) {
  const auto id = static_cast<TokenId>(tokens_.size());
  auto [it, inserted] = lookup_.emplace(std::string(text), id);
  if (!inserted) throw Error(ErrorKind::InvalidSpec, "duplicate vocabulary token '" + std::string(text) + "'");
  tokens_.emplace_back(text);
  classes_.push_back(c);
  members_[static_cast<std::size_t>(c)].push_back(id);
}

std::optional<TokenId> Vocabulary::find(std::string_view text) const {
  auto it = lookup_.find(std::string(text));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id(std::string_view text) const {
  if (auto v = find(text)) return *v;
  throw Error(ErrorKind::InvalidSpec, "token not in vocabulary: '" + std::string(text) + "'");
}

std::string Vocabulary::serialize() const {
  std::string out = std::string(kHeader) + " " + std::to_string(kFormatVersion) + "\n";
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    out += tokens_[i];
    out += '\t';
    out += std::to_string(static_cast<int>(classes_[i]));
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::deserialize(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != std::string(kHeader) + " " + std::to_string(kFormatVersion)) {
    throw Error(ErrorKind::CorruptMetadata, "unsupported vocabulary header");
  }
  Vocabulary v;
  while (std::getline(in, line)) {
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw Error(ErrorKind::CorruptMetadata, "malformed vocabulary line");
    const int c = std::atoi(line.c_str() + tab + 1);
    if (c < 0 || c > static_cast<int>(TokenClass::Scale)) {
      throw Error(ErrorKind::CorruptMetadata, "bad token class in vocabulary");
    }
    v.add(std::string_view(line).substr(0, tab), static_cast<TokenClass>(c));
  }
  if (v.size() < kSpecialCount) throw Error(ErrorKind::CorruptMetadata, "vocabulary lacks special tokens");
  for (TokenId i = 0; i < kSpecialCount; ++i) {
    if (v.text(i) != kSpecialText[static_cast<std::size_t>(i)]) {
      throw Error(ErrorKind::CorruptMetadata, "special token ids out of place");
    }
  }
  return v;
}

std::string Vocabulary::hash() const { return to_hex(sha256(std::string_view(serialize()))); }

Vocabulary build_vocabulary() {
  Vocabulary v;
  for (TokenId i = 0; i < kSpecialCount; ++i) v.add(kSpecialText[static_cast<std::size_t>(i)], special_class(i));
  for (auto p : disasm::prefix_tokens()) v.add(p, TokenClass::Prefix);
  for (auto m : disasm::mnemonic_tokens()) v.add(m, TokenClass::Mnemonic);
  for (auto r : disasm::register_names()) {
    if (!disasm::is_flags_register(r)) v.add(r, TokenClass::Register);
  }
  for (auto s : kScaleText) v.add(s, TokenClass::Scale);
  return v;
}

const Vocabulary& default_vocabulary() {
  static const Vocabulary v = build_vocabulary();
  return v;
}

Special register_relative_displacement_label(std::int64_t displacement, const binimage::AddressRange& range) {
  const std::uint64_t magnitude =
      displacement < 0 ? static_cast<std::uint64_t>(-(displacement + 1)) + 1 : static_cast<std::uint64_t>(displacement);
  return magnitude <= range.span() ? kConstNormal : kConstAbnormal;
}

std::vector<TokenId> normalize_unit(const disasm::DecodedUnit& unit, const binimage::AddressRange& range,
                                    const Vocabulary& vocab, const NormalizeOptions& options) {
  std::vector<TokenId> out;
  if (unit.kind == disasm::UnitKind::RawByte) {
    const std::uint8_t b = unit.raw.empty() ? 0 : unit.raw[0];
    const bool normal =
        std::find(options.pad_normal_bytes.begin(), options.pad_normal_bytes.end(), b) != options.pad_normal_bytes.end();
    out.push_back(normal ? kPadNormal : kPadAbnormal);
    out.push_back(kEos);
    return out;
  }
  out.reserve(8);
  for (auto p : unit.prefixes) out.push_back(vocab.id(disasm::prefix_token(p)));
  out.push_back(vocab.id(unit.mnemonic));
  auto reg_token = [&](disasm::RegId r) { out.push_back(vocab.id(disasm::register_name(r))); };
  for (const auto& op : unit.operands) {
    switch (op.kind) {
      case disasm::OperandKind::Register:
        if (!disasm::is_flags_register(disasm::register_name(*op.reg))) reg_token(*op.reg);
        break;
      case disasm::OperandKind::Immediate:
        out.push_back(kConst);
        break;
      case disasm::OperandKind::BranchTarget:
        out.push_back(range.contains(static_cast<std::uint64_t>(*op.value)) ? kMemNormal : kMemAbnormal);
        break;
      case disasm::OperandKind::MemoryRef: {
        const auto& m = *op.mem;
        if (m.base != disasm::kNoRegister) reg_token(m.base);
        if (m.index != disasm::kNoRegister) {
          reg_token(m.index);
          out.push_back(scale_token(vocab, m.scale));
        }
        if (m.has_displacement) {
          if (auto abs = m.absolute_address()) {
            out.push_back(range.contains(*abs) ? kConstNormal : kConstAbnormal);
          } else {
            out.push_back(register_relative_displacement_label(m.displacement, range));
          }
        }
        break;
      }
    }
  }
  out.push_back(kEos);
  return out;
}

std::vector<TokenWindow> windowize_tokens(std::span<const std::vector<TokenId>> instructions, std::size_t max_len) {
  std::vector<TokenWindow> windows;
  TokenWindow cur;
  auto flush = [&] {
    if (!cur.instr_spans.empty()) windows.push_back(std::move(cur));
    cur = TokenWindow{};
  };
  for (const auto& ins : instructions) {
    if (ins.empty()) continue;
    if (cur.tokens.empty()) cur.tokens.push_back(kSos);
    if (cur.tokens.size() + ins.size() > max_len) {
      flush();
      cur.tokens.push_back(kSos);
    }
    const auto start = static_cast<std::uint32_t>(cur.tokens.size());
    if (1 + ins.size() > max_len) {
      // Degenerate: a single instruction longer than the window.
      cur.tokens.insert(cur.tokens.end(), ins.begin(), ins.begin() + static_cast<std::ptrdiff_t>(max_len - 2));
      cur.tokens.push_back(kEos);
    } else {
      cur.tokens.insert(cur.tokens.end(), ins.begin(), ins.end());
    }
    cur.instr_spans.emplace_back(start, static_cast<std::uint32_t>(cur.tokens.size()));
  }
  flush();
  return windows;
}

std::vector<InstructionWindow> windowize_instructions(std::span<const disasm::DecodedUnit> units,
                                                      const InstructionWindowOptions& options) {
  std::vector<InstructionWindow> out;
  const std::size_t count = std::max<std::size_t>(options.count, 1);
  const std::size_t stride = options.stride ? options.stride : count;
  for (std::size_t first = 0; first < units.size(); first += stride) {
    const std::size_t n = std::min(count, units.size() - first);
    if (n < options.floor) break;
    InstructionWindow w;
    w.first_unit = first;
    w.unit_count = n;
    w.byte_start = units[first].offset;
    w.byte_end = units[first + n - 1].offset + units[first + n - 1].length;
    out.push_back(w);
    if (first + n >= units.size()) break;
  }
  return out;
}

TokenWindow window_from_units(std::span<const disasm::DecodedUnit> units, const binimage::AddressRange& range,
                              const Vocabulary& vocab, std::size_t max_len) {
  TokenWindow w;
  w.tokens.push_back(kSos);
  for (const auto& u : units) {
    auto toks = normalize_unit(u, range, vocab);
    if (w.tokens.size() + toks.size() > max_len) break;
    const auto start = static_cast<std::uint32_t>(w.tokens.size());
    w.tokens.insert(w.tokens.end(), toks.begin(), toks.end());
    w.instr_spans.emplace_back(start, static_cast<std::uint32_t>(w.tokens.size()));
  }
  if (!units.empty()) w.source.first_offset = units.front().offset;
  return w;
}

}  // namespace packsense::normalizer
