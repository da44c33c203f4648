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

// Opcode tables for the linear-sweep decoder. Operand specifiers follow the
// Intel SDM appendix A abbreviations.

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace packsense::disasm::tables {

enum class Spec : std::uint8_t {
  None,
  Eb, Ev, Ew, Ed,  // modrm r/m
  Gb, Gv, Gw, Gz,  // modrm reg
  M, Mp,           // memory-only r/m
  Ib, Iw, Iz, Iv,  // immediates
  Jb, Jz,          // relative branch targets
  Ob, Ov,          // moffs
  Ap,              // far pointer
  Sw, Cd, Dd,      // segment / control / debug register from modrm reg
  Rd,              // r/m forced register (mov to/from CR/DR)
  Zb, Zv,          // register in opcode low bits
  AL, rAX, CL, DX, One,
  ES, CS, SS, DS, FS, GS,
};

enum Flag : std::uint16_t {
  kModrm = 1 << 0,
  kD64 = 1 << 1,     // default operand size 64 in long mode
  kF64 = 1 << 2,     // operand size forced to 64 in long mode
  kI64 = 1 << 3,     // invalid in long mode
  kGroup = 1 << 4,   // mnemonic chosen by modrm.reg from group table
  kInvalid = 1 << 5,
  kO64 = 1 << 6,     // only valid in long mode
  kNoMemory = 1 << 7,
};

struct OpDesc {
  std::string_view mnemonic;
  std::uint16_t flags = 0;
  std::uint8_t group = 0;
  std::array<Spec, 3> ops{};
};

// Group entry: empty mnemonic means invalid. ops override the primary opcode's
// operands when ops[0] != None.
struct GroupEntry {
  std::string_view mnemonic;
  std::uint16_t flags = 0;
  std::array<Spec, 3> ops{};
};

enum GroupId : std::uint8_t {
  kGrp1 = 1, kGrp1a, kGrp2, kGrp3b, kGrp3v, kGrp4, kGrp5, kGrp11b, kGrp11v,
  kGrp6, kGrp7, kGrp8, kGrp9, kGrp15, kGrp16, kGroupCount
};

const std::array<OpDesc, 256>& one_byte_map();
const std::array<OpDesc, 256>& two_byte_map();
const std::array<GroupEntry, 8>& group(GroupId id);

// x87 escape tables indexed [opcode - 0xD8][reg] for memory forms and
// [opcode - 0xD8][modrm & 0x3F] for register forms. Empty means invalid.
std::string_view x87_memory_mnemonic(std::uint8_t opcode, std::uint8_t reg);
std::string_view x87_register_mnemonic(std::uint8_t opcode, std::uint8_t modrm);

// Mnemonic tokens produced outside the tables.
inline constexpr std::string_view kSimd = "simd";
inline constexpr std::string_view kVex = "vex";
inline constexpr std::string_view kEvex = "evex";
inline constexpr std::string_view k3dNow = "3dnow";
inline constexpr std::string_view kSysop = "sysop";
inline constexpr std::string_view kPopcnt = "popcnt";
inline constexpr std::string_view kTzcnt = "tzcnt";
inline constexpr std::string_view kLzcnt = "lzcnt";
inline constexpr std::string_view kMovbe = "movbe";
inline constexpr std::string_view kCrc32 = "crc32";
inline constexpr std::string_view kEndbr = "endbr";
inline constexpr std::string_view kPause = "pause";
inline constexpr std::string_view kMovsxd = "movsxd";
inline constexpr std::string_view kXabort = "xabort";
inline constexpr std::string_view kXbegin = "xbegin";
inline constexpr std::string_view kFence = "fence";
inline constexpr std::string_view kFsgsbase = "fsgsbase";
inline constexpr std::string_view kRdrand = "rdrand";
inline constexpr std::string_view kNop = "nop";

/// Every mnemonic the decoder can emit, deduplicated, in a fixed order.
const std::vector<std::string_view>& all_mnemonics();

/// True when the 0F-map opcode is a SIMD (MMX/SSE) instruction with modrm.
bool is_simd_0f(std::uint8_t opcode);
/// True when the 0F-map SIMD opcode carries a trailing imm8.
bool simd_0f_has_imm8(std::uint8_t opcode);

}  // namespace packsense::disasm::tables
