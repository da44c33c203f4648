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

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "packsense/binimage.hpp"
#include "packsense/common.hpp"

namespace packsense::disasm {

using Mode = binimage::Bitness;

/// Fixed-capacity vector for the small per-instruction lists; keeps sweeps
/// allocation-free.
template <typename T, std::size_t N>
class InlineVec {
 public:
  void push_back(const T& v) {
    if (size_ < N) items_[size_++] = v;
  }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  const T& operator[](std::size_t i) const { return items_[i]; }
  T& operator[](std::size_t i) { return items_[i]; }
  const T* begin() const { return items_.data(); }
  const T* end() const { return items_.data() + size_; }
  void clear() { size_ = 0; }

 private:
  std::array<T, N> items_{};
  std::size_t size_ = 0;
};

/// Register ids index register_names(); kNoRegister marks an absent register.
using RegId = std::uint16_t;
inline constexpr RegId kNoRegister = 0xFFFF;

std::string_view register_name(RegId id);
/// All register tokens, indexed by RegId.
const std::vector<std::string_view>& register_names();
/// True for registers that name the flags register. None are ever produced.
bool is_flags_register(std::string_view name);

enum class Prefix : std::uint8_t { Lock, Rep, Repne, Es, Cs, Ss, Ds, Fs, Gs, OpSize, AddrSize16, AddrSize32 };
std::string_view prefix_token(Prefix p);
/// All prefix tokens in Prefix order.
const std::vector<std::string_view>& prefix_tokens();

enum class UnitKind : std::uint8_t { Instruction, RawByte };
enum class OperandKind : std::uint8_t { Register, Immediate, MemoryRef, BranchTarget };

struct MemExpr {
  RegId base = kNoRegister;
  RegId index = kNoRegister;
  std::uint8_t scale = 1;
  std::int64_t displacement = 0;
  bool has_displacement = false;
  bool rip_relative = false;
  std::uint8_t address_bits = 32;
  std::uint64_t rip_target = 0;  // resolved for rip-relative expressions
  /// Absolute target for rip-relative or base/index-free expressions.
  std::optional<std::uint64_t> absolute_address() const;
};

struct Operand {
  OperandKind kind = OperandKind::Register;
  std::optional<RegId> reg;         // Register
  std::optional<std::int64_t> value;  // Immediate, BranchTarget (resolved absolute target)
  std::optional<MemExpr> mem;       // MemoryRef
};

struct DecodedUnit {
  std::uint64_t offset = 0;  // file offset
  std::uint64_t virtual_address = 0;
  UnitKind kind = UnitKind::RawByte;
  InlineVec<Prefix, 4> prefixes;
  std::string_view mnemonic;  // empty for RawByte
  InlineVec<Operand, 4> operands;
  std::uint8_t length = 1;
  ByteView raw;
};

/// Decodes the instruction starting at bytes[offset]. Never fails: bytes that
/// do not start a supported instruction become a one-byte RawByte unit. base_va
/// is the virtual address of bytes[0], used to resolve branch targets.
DecodedUnit decode_one(ByteView bytes, std::size_t offset, Mode mode, std::uint64_t base_va = 0);

/// Linear sweep of every section (or just `region`), front to back, restarting
/// at each section start. Header bytes outside sections are never swept.
std::vector<DecodedUnit> linear_sweep(const binimage::BinaryImage& image,
                                      const binimage::Section* region = nullptr);

/// Sweep of a bare byte buffer; offsets are relative to the buffer.
std::vector<DecodedUnit> sweep_bytes(ByteView bytes, Mode mode, std::uint64_t base_va = 0,
                                     std::uint64_t file_offset = 0);

/// Every mnemonic token the decoder can produce.
const std::vector<std::string_view>& mnemonic_tokens();

}  // namespace packsense::disasm
