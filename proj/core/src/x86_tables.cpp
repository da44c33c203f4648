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

#include "x86_tables.hpp"

#include <algorithm>
#include <unordered_set>

namespace packsense::disasm::tables {

namespace {

using S = Spec;

constexpr std::array<std::string_view, 16> kCond = {"o", "no", "b", "ae", "e", "ne", "be", "a",
                                                    "s", "ns", "p", "np", "l", "ge", "le", "g"};

// String storage for composed condition-code mnemonics.
const std::array<std::string, 16>& cond_names(std::string_view stem) {
  static std::array<std::string, 16> j, set, cmov;
  static bool init = false;
  if (!init) {
    for (std::size_t i = 0; i < 16; ++i) {
      j[i] = "j" + std::string(kCond[i]);
      set[i] = "set" + std::string(kCond[i]);
      cmov[i] = "cmov" + std::string(kCond[i]);
    }
    init = true;
  }
  if (stem == "j") return j;
  if (stem == "set") return set;
  return cmov;
}

struct Builder {
  std::array<OpDesc, 256> map{};
  void set(int op, std::string_view m, std::uint16_t flags = 0, S a = S::None, S b = S::None, S c = S::None) {
    map[op] = OpDesc{m, flags, 0, {a, b, c}};
  }
  void grp(int op, GroupId g, std::uint16_t flags, S a = S::None, S b = S::None, S c = S::None) {
    map[op] = OpDesc{"", static_cast<std::uint16_t>(flags | kGroup | kModrm), g, {a, b, c}};
  }
};

std::array<OpDesc, 256> build_one_byte() {
  Builder b;
  for (auto& d : b.map) d.flags = kInvalid;
  constexpr std::array<std::string_view, 8> alu = {"add", "or", "adc", "sbb", "and", "sub", "xor", "cmp"};
  for (int i = 0; i < 8; ++i) {
    const int base = i * 8;
    b.set(base + 0, alu[i], kModrm, S::Eb, S::Gb);
    b.set(base + 1, alu[i], kModrm, S::Ev, S::Gv);
    b.set(base + 2, alu[i], kModrm, S::Gb, S::Eb);
    b.set(base + 3, alu[i], kModrm, S::Gv, S::Ev);
    b.set(base + 4, alu[i], 0, S::AL, S::Ib);
    b.set(base + 5, alu[i], 0, S::rAX, S::Iz);
  }
  b.set(0x06, "push", kI64, S::ES);
  b.set(0x07, "pop", kI64, S::ES);
  b.set(0x0E, "push", kI64, S::CS);
  b.set(0x16, "push", kI64, S::SS);
  b.set(0x17, "pop", kI64, S::SS);
  b.set(0x1E, "push", kI64, S::DS);
  b.set(0x1F, "pop", kI64, S::DS);
  b.set(0x27, "daa", kI64);
  b.set(0x2F, "das", kI64);
  b.set(0x37, "aaa", kI64);
  b.set(0x3F, "aas", kI64);
  for (int r = 0; r < 8; ++r) {
    b.set(0x40 + r, "inc", kI64, S::Zv);
    b.set(0x48 + r, "dec", kI64, S::Zv);
    b.set(0x50 + r, "push", kD64, S::Zv);
    b.set(0x58 + r, "pop", kD64, S::Zv);
  }
  b.set(0x60, "pusha", kI64);
  b.set(0x61, "popa", kI64);
  b.set(0x62, "bound", kI64 | kModrm, S::Gv, S::M);
  b.set(0x63, "arpl", kModrm, S::Ew, S::Gw);  // movsxd in long mode
  b.set(0x68, "push", kD64, S::Iz);
  b.set(0x69, "imul", kModrm, S::Gv, S::Ev, S::Iz);
  b.set(0x6A, "push", kD64, S::Ib);
  b.set(0x6B, "imul", kModrm, S::Gv, S::Ev, S::Ib);
  b.set(0x6C, "insb");
  b.set(0x6D, "ins");
  b.set(0x6E, "outsb");
  b.set(0x6F, "outs");
  const auto& jcc = cond_names("j");
  for (int c = 0; c < 16; ++c) b.set(0x70 + c, jcc[c], kF64, S::Jb);
  b.grp(0x80, kGrp1, 0, S::Eb, S::Ib);
  b.grp(0x81, kGrp1, 0, S::Ev, S::Iz);
  b.grp(0x82, kGrp1, kI64, S::Eb, S::Ib);
  b.grp(0x83, kGrp1, 0, S::Ev, S::Ib);
  b.set(0x84, "test", kModrm, S::Eb, S::Gb);
  b.set(0x85, "test", kModrm, S::Ev, S::Gv);
  b.set(0x86, "xchg", kModrm, S::Eb, S::Gb);
  b.set(0x87, "xchg", kModrm, S::Ev, S::Gv);
  b.set(0x88, "mov", kModrm, S::Eb, S::Gb);
  b.set(0x89, "mov", kModrm, S::Ev, S::Gv);
  b.set(0x8A, "mov", kModrm, S::Gb, S::Eb);
  b.set(0x8B, "mov", kModrm, S::Gv, S::Ev);
  b.set(0x8C, "mov", kModrm, S::Ev, S::Sw);
  b.set(0x8D, "lea", kModrm, S::Gv, S::M);
  b.set(0x8E, "mov", kModrm, S::Sw, S::Ew);
  b.grp(0x8F, kGrp1a, kD64, S::Ev);
  b.set(0x90, "nop");
  for (int r = 1; r < 8; ++r) b.set(0x90 + r, "xchg", 0, S::Zv, S::rAX);
  b.set(0x98, "cwde");
  b.set(0x99, "cdq");
  b.set(0x9A, "callf", kI64, S::Ap);
  b.set(0x9B, "fwait");
  b.set(0x9C, "pushf", kD64);
  b.set(0x9D, "popf", kD64);
  b.set(0x9E, "sahf");
  b.set(0x9F, "lahf");
  b.set(0xA0, "mov", 0, S::AL, S::Ob);
  b.set(0xA1, "mov", 0, S::rAX, S::Ov);
  b.set(0xA2, "mov", 0, S::Ob, S::AL);
  b.set(0xA3, "mov", 0, S::Ov, S::rAX);
  b.set(0xA4, "movsb");
  b.set(0xA5, "movs");
  b.set(0xA6, "cmpsb");
  b.set(0xA7, "cmps");
  b.set(0xA8, "test", 0, S::AL, S::Ib);
  b.set(0xA9, "test", 0, S::rAX, S::Iz);
  b.set(0xAA, "stosb");
  b.set(0xAB, "stos");
  b.set(0xAC, "lodsb");
  b.set(0xAD, "lods");
  b.set(0xAE, "scasb");
  b.set(0xAF, "scas");
  for (int r = 0; r < 8; ++r) {
    b.set(0xB0 + r, "mov", 0, S::Zb, S::Ib);
    b.set(0xB8 + r, "mov", 0, S::Zv, S::Iv);
  }
  b.grp(0xC0, kGrp2, 0, S::Eb, S::Ib);
  b.grp(0xC1, kGrp2, 0, S::Ev, S::Ib);
  b.set(0xC2, "ret", kF64, S::Iw);
  b.set(0xC3, "ret", kF64);
  b.set(0xC4, "les", kI64 | kModrm, S::Gz, S::Mp);
  b.set(0xC5, "lds", kI64 | kModrm, S::Gz, S::Mp);
  b.grp(0xC6, kGrp11b, 0, S::Eb, S::Ib);
  b.grp(0xC7, kGrp11v, 0, S::Ev, S::Iz);
  b.set(0xC8, "enter", kD64, S::Iw, S::Ib);
  b.set(0xC9, "leave", kD64);
  b.set(0xCA, "retf", 0, S::Iw);
  b.set(0xCB, "retf");
  b.set(0xCC, "int3");
  b.set(0xCD, "int", 0, S::Ib);
  b.set(0xCE, "into", kI64);
  b.set(0xCF, "iret");
  b.grp(0xD0, kGrp2, 0, S::Eb, S::One);
  b.grp(0xD1, kGrp2, 0, S::Ev, S::One);
  b.grp(0xD2, kGrp2, 0, S::Eb, S::CL);
  b.grp(0xD3, kGrp2, 0, S::Ev, S::CL);
  b.set(0xD4, "aam", kI64, S::Ib);
  b.set(0xD5, "aad", kI64, S::Ib);
  b.set(0xD7, "xlat");
  for (int op = 0xD8; op <= 0xDF; ++op) b.set(op, "x87", kModrm);  // resolved by the x87 tables
  b.set(0xE0, "loopne", kF64, S::Jb);
  b.set(0xE1, "loope", kF64, S::Jb);
  b.set(0xE2, "loop", kF64, S::Jb);
  b.set(0xE3, "jecxz", kF64, S::Jb);
  b.set(0xE4, "in", 0, S::AL, S::Ib);
  b.set(0xE5, "in", 0, S::rAX, S::Ib);
  b.set(0xE6, "out", 0, S::Ib, S::AL);
  b.set(0xE7, "out", 0, S::Ib, S::rAX);
  b.set(0xE8, "call", kF64, S::Jz);
  b.set(0xE9, "jmp", kF64, S::Jz);
  b.set(0xEA, "jmpf", kI64, S::Ap);
  b.set(0xEB, "jmp", kF64, S::Jb);
  b.set(0xEC, "in", 0, S::AL, S::DX);
  b.set(0xED, "in", 0, S::rAX, S::DX);
  b.set(0xEE, "out", 0, S::DX, S::AL);
  b.set(0xEF, "out", 0, S::DX, S::rAX);
  b.set(0xF1, "int1");
  b.set(0xF4, "hlt");
  b.set(0xF5, "cmc");
  b.grp(0xF6, kGrp3b, 0, S::Eb);
  b.grp(0xF7, kGrp3v, 0, S::Ev);
  b.set(0xF8, "clc");
  b.set(0xF9, "stc");
  b.set(0xFA, "cli");
  b.set(0xFB, "sti");
  b.set(0xFC, "cld");
  b.set(0xFD, "std");
  b.grp(0xFE, kGrp4, 0, S::Eb);
  b.grp(0xFF, kGrp5, 0, S::Ev);
  return b.map;
}

std::array<OpDesc, 256> build_two_byte() {
  Builder b;
  for (auto& d : b.map) d.flags = kInvalid;
  b.grp(0x00, kGrp6, 0, S::Ew);
  b.grp(0x01, kGrp7, 0, S::M);
  b.set(0x02, "lar", kModrm, S::Gv, S::Ew);
  b.set(0x03, "lsl", kModrm, S::Gv, S::Ew);
  b.set(0x05, "syscall");
  b.set(0x06, "clts");
  b.set(0x07, "sysret");
  b.set(0x08, "invd");
  b.set(0x09, "wbinvd");
  b.set(0x0B, "ud2");
  b.set(0x0D, "prefetch", kModrm, S::M);
  b.set(0x0E, "femms");
  b.set(0x0F, k3dNow, kModrm);
  b.grp(0x18, kGrp16, 0, S::Ev);
  for (int op = 0x19; op <= 0x1F; ++op) b.set(op, kNop, kModrm, S::Ev);
  b.set(0x20, "mov", kModrm | kF64 | kNoMemory, S::Rd, S::Cd);
  b.set(0x21, "mov", kModrm | kF64 | kNoMemory, S::Rd, S::Dd);
  b.set(0x22, "mov", kModrm | kF64 | kNoMemory, S::Cd, S::Rd);
  b.set(0x23, "mov", kModrm | kF64 | kNoMemory, S::Dd, S::Rd);
  b.set(0x30, "wrmsr");
  b.set(0x31, "rdtsc");
  b.set(0x32, "rdmsr");
  b.set(0x33, "rdpmc");
  b.set(0x34, "sysenter");
  b.set(0x35, "sysexit");
  b.set(0x37, "getsec");
  const auto& cmov = cond_names("cmov");
  const auto& jcc = cond_names("j");
  const auto& setcc = cond_names("set");
  for (int c = 0; c < 16; ++c) {
    b.set(0x40 + c, cmov[c], kModrm, S::Gv, S::Ev);
    b.set(0x80 + c, jcc[c], kF64, S::Jz);
    b.set(0x90 + c, setcc[c], kModrm, S::Eb);
  }
  b.set(0x77, "emms");
  b.set(0x78, "vmread", kModrm | kF64, S::Ev, S::Gv);
  b.set(0x79, "vmwrite", kModrm | kF64, S::Gv, S::Ev);
  b.set(0xA0, "push", kD64, S::FS);
  b.set(0xA1, "pop", kD64, S::FS);
  b.set(0xA2, "cpuid");
  b.set(0xA3, "bt", kModrm, S::Ev, S::Gv);
  b.set(0xA4, "shld", kModrm, S::Ev, S::Gv, S::Ib);
  b.set(0xA5, "shld", kModrm, S::Ev, S::Gv, S::CL);
  b.set(0xA8, "push", kD64, S::GS);
  b.set(0xA9, "pop", kD64, S::GS);
  b.set(0xAA, "rsm");
  b.set(0xAB, "bts", kModrm, S::Ev, S::Gv);
  b.set(0xAC, "shrd", kModrm, S::Ev, S::Gv, S::Ib);
  b.set(0xAD, "shrd", kModrm, S::Ev, S::Gv, S::CL);
  b.grp(0xAE, kGrp15, 0, S::M);
  b.set(0xAF, "imul", kModrm, S::Gv, S::Ev);
  b.set(0xB0, "cmpxchg", kModrm, S::Eb, S::Gb);
  b.set(0xB1, "cmpxchg", kModrm, S::Ev, S::Gv);
  b.set(0xB2, "lss", kModrm, S::Gz, S::Mp);
  b.set(0xB3, "btr", kModrm, S::Ev, S::Gv);
  b.set(0xB4, "lfs", kModrm, S::Gz, S::Mp);
  b.set(0xB5, "lgs", kModrm, S::Gz, S::Mp);
  b.set(0xB6, "movzx", kModrm, S::Gv, S::Eb);
  b.set(0xB7, "movzx", kModrm, S::Gv, S::Ew);
  b.set(0xB8, kPopcnt, kModrm, S::Gv, S::Ev);  // requires F3
  b.set(0xB9, "ud1", kModrm, S::Gv, S::Ev);
  b.grp(0xBA, kGrp8, 0, S::Ev, S::Ib);
  b.set(0xBB, "btc", kModrm, S::Ev, S::Gv);
  b.set(0xBC, "bsf", kModrm, S::Gv, S::Ev);
  b.set(0xBD, "bsr", kModrm, S::Gv, S::Ev);
  b.set(0xBE, "movsx", kModrm, S::Gv, S::Eb);
  b.set(0xBF, "movsx", kModrm, S::Gv, S::Ew);
  b.set(0xC0, "xadd", kModrm, S::Eb, S::Gb);
  b.set(0xC1, "xadd", kModrm, S::Ev, S::Gv);
  b.set(0xC3, "movnti", kModrm, S::M, S::Gv);
  b.grp(0xC7, kGrp9, 0, S::M);
  for (int r = 0; r < 8; ++r) b.set(0xC8 + r, "bswap", 0, S::Zv);
  b.set(0xFF, "ud0", kModrm, S::Gv, S::Ev);
  for (int op = 0; op < 256; ++op) {
    if (is_simd_0f(static_cast<std::uint8_t>(op))) b.set(op, kSimd, kModrm);
  }
  return b.map;
}

using Group = std::array<GroupEntry, 8>;

std::array<Group, kGroupCount> build_groups() {
  std::array<Group, kGroupCount> g{};
  g[kGrp1] = {{{"add"}, {"or"}, {"adc"}, {"sbb"}, {"and"}, {"sub"}, {"xor"}, {"cmp"}}};
  g[kGrp1a] = {{{"pop"}, {}, {}, {}, {}, {}, {}, {}}};
  g[kGrp2] = {{{"rol"}, {"ror"}, {"rcl"}, {"rcr"}, {"shl"}, {"shr"}, {"sal"}, {"sar"}}};
  g[kGrp3b] = {{{"test", 0, {S::Eb, S::Ib}}, {"test", 0, {S::Eb, S::Ib}}, {"not"}, {"neg"},
                {"mul"}, {"imul"}, {"div"}, {"idiv"}}};
  g[kGrp3v] = {{{"test", 0, {S::Ev, S::Iz}}, {"test", 0, {S::Ev, S::Iz}}, {"not"}, {"neg"},
                {"mul"}, {"imul"}, {"div"}, {"idiv"}}};
  g[kGrp4] = {{{"inc"}, {"dec"}, {}, {}, {}, {}, {}, {}}};
  g[kGrp5] = {{{"inc"},
               {"dec"},
               {"call", kF64},
               {"callf", 0, {S::Mp}},
               {"jmp", kF64},
               {"jmpf", 0, {S::Mp}},
               {"push", kD64},
               {}}};
  g[kGrp11b] = {{{"mov"}, {}, {}, {}, {}, {}, {}, {}}};
  g[kGrp11v] = {{{"mov"}, {}, {}, {}, {}, {}, {}, {}}};
  g[kGrp6] = {{{"sldt"}, {"str"}, {"lldt"}, {"ltr"}, {"verr"}, {"verw"}, {}, {}}};
  g[kGrp7] = {{{"sgdt"}, {"sidt"}, {"lgdt"}, {"lidt"}, {"smsw", 0, {S::Ew}}, {}, {"lmsw", 0, {S::Ew}},
               {"invlpg"}}};
  g[kGrp8] = {{{}, {}, {}, {}, {"bt"}, {"bts"}, {"btr"}, {"btc"}}};
  g[kGrp9] = {{{}, {"cmpxchg8b"}, {}, {"xrstors"}, {"xsavec"}, {"xsaves"}, {"vmptrld"}, {"vmptrst"}}};
  g[kGrp15] = {{{"fxsave"}, {"fxrstor"}, {"ldmxcsr"}, {"stmxcsr"}, {"xsave"}, {"xrstor"}, {"xsaveopt"},
                {"clflush"}}};
  g[kGrp16] = {{{"prefetchnta"}, {"prefetcht0"}, {"prefetcht1"}, {"prefetcht2"}, {kNop}, {kNop}, {kNop},
                {kNop}}};
  return g;
}

constexpr std::array<std::array<std::string_view, 8>, 8> kX87Memory = {{
    {"fadd", "fmul", "fcom", "fcomp", "fsub", "fsubr", "fdiv", "fdivr"},
    {"fld", "", "fst", "fstp", "fldenv", "fldcw", "fnstenv", "fnstcw"},
    {"fiadd", "fimul", "ficom", "ficomp", "fisub", "fisubr", "fidiv", "fidivr"},
    {"fild", "fisttp", "fist", "fistp", "", "fld", "", "fstp"},
    {"fadd", "fmul", "fcom", "fcomp", "fsub", "fsubr", "fdiv", "fdivr"},
    {"fld", "fisttp", "fst", "fstp", "frstor", "", "fnsave", "fnstsw"},
    {"fiadd", "fimul", "ficom", "ficomp", "fisub", "fisubr", "fidiv", "fidivr"},
    {"fild", "fisttp", "fist", "fistp", "fbld", "fild", "fbstp", "fistp"},
}};

// Register forms by reg field; special rows are handled in x87_register_mnemonic.
constexpr std::array<std::array<std::string_view, 8>, 8> kX87Register = {{
    {"fadd", "fmul", "fcom", "fcomp", "fsub", "fsubr", "fdiv", "fdivr"},
    {"fld", "fxch", "", "", "", "", "", ""},
    {"fcmovb", "fcmove", "fcmovbe", "fcmovu", "", "", "", ""},
    {"fcmovnb", "fcmovne", "fcmovnbe", "fcmovnu", "", "fucomi", "fcomi", ""},
    {"fadd", "fmul", "fcom", "fcomp", "fsubr", "fsub", "fdivr", "fdiv"},
    {"ffree", "fxch", "fst", "fstp", "fucom", "fucomp", "", ""},
    {"faddp", "fmulp", "fcomp", "", "fsubrp", "fsubp", "fdivrp", "fdivp"},
    {"ffreep", "", "", "", "", "fucomip", "fcomip", ""},
}};

constexpr std::array<std::string_view, 32> kX87D9Misc = {
    "fchs",  "fabs",   "",       "",       "ftst",  "fxam",   "",      "",
    "fld1",  "fldl2t", "fldl2e", "fldpi",  "fldlg2", "fldln2", "fldz", "",
    "f2xm1", "fyl2x",  "fptan",  "fpatan", "fxtract", "fprem1", "fdecstp", "fincstp",
    "fprem", "fyl2xp1", "fsqrt", "fsincos", "frndint", "fscale", "fsin", "fcos"};

}  // namespace

const std::array<OpDesc, 256>& one_byte_map() {
  static const auto map = build_one_byte();
  return map;
}

const std::array<OpDesc, 256>& two_byte_map() {
  static const auto map = build_two_byte();
  return map;
}

const std::array<GroupEntry, 8>& group(GroupId id) {
  static const auto groups = build_groups();
  return groups[id];
}

std::string_view x87_memory_mnemonic(std::uint8_t opcode, std::uint8_t reg) {
  return kX87Memory[opcode - 0xD8][reg & 7];
}

std::string_view x87_register_mnemonic(std::uint8_t opcode, std::uint8_t modrm) {
  const int row = opcode - 0xD8;
  const int reg = (modrm >> 3) & 7;
  const int rm = modrm & 7;
  switch (row) {
    case 1:
      if (reg == 2) return rm == 0 ? "fnop" : "";
      if (reg == 3) return "fstp";
      if (reg >= 4) return kX87D9Misc[(modrm & 0x3F) - 0x20];
      break;
    case 2:
      if (reg == 5) return rm == 1 ? "fucompp" : "";
      break;
    case 3:
      if (reg == 4) {
        if (rm == 2) return "fnclex";
        if (rm == 3) return "fninit";
        // 287-era control ops execute as no-ops on later FPUs.
        if (rm == 0 || rm == 1 || rm == 4 || rm == 5) return "fnop";
        return "";
      }
      break;
    case 6:
      if (reg == 3) return rm == 1 ? "fcompp" : "";
      break;
    case 7:
      if (reg == 4) return rm == 0 ? "fnstsw" : "";
      break;
    default:
      break;
  }
  return kX87Register[row][reg];
}

bool is_simd_0f(std::uint8_t op) {
  return (op >= 0x10 && op <= 0x17) || (op >= 0x28 && op <= 0x2F) || (op >= 0x50 && op <= 0x76) ||
         (op >= 0x7C && op <= 0x7F) || op == 0xC2 || (op >= 0xC4 && op <= 0xC6) || (op >= 0xD0 && op <= 0xFE);
}

bool simd_0f_has_imm8(std::uint8_t op) { return (op >= 0x70 && op <= 0x73) || op == 0xC2 || (op >= 0xC4 && op <= 0xC6); }

const std::vector<std::string_view>& all_mnemonics() {
  static const std::vector<std::string_view> names = [] {
    std::vector<std::string_view> out;
    std::unordered_set<std::string_view> seen;
    auto add = [&](std::string_view m) {
      if (!m.empty() && m != "x87" && seen.insert(m).second) out.push_back(m);
    };
    for (const auto& d : one_byte_map()) add(d.mnemonic);
    for (const auto& d : two_byte_map()) add(d.mnemonic);
    for (int g = 1; g < kGroupCount; ++g) {
      for (const auto& e : group(static_cast<GroupId>(g))) add(e.mnemonic);
    }
    for (const auto& row : kX87Memory) for (auto m : row) add(m);
    for (const auto& row : kX87Register) for (auto m : row) add(m);
    for (auto m : kX87D9Misc) add(m);
    for (auto m : {std::string_view("fnop"), std::string_view("fucompp"), std::string_view("fnclex"),
                   std::string_view("fninit"), std::string_view("fcompp"), std::string_view("fnstsw")}) {
      add(m);
    }
    for (auto m : {kSimd, kVex, kEvex, k3dNow, kSysop, kPopcnt, kTzcnt, kLzcnt, kMovbe, kCrc32, kEndbr, kPause,
                   kMovsxd, kXabort, kXbegin, kFence, kFsgsbase, kRdrand, kNop}) {
      add(m);
    }
    return out;
  }();
  return names;
}

}  // namespace packsense::disasm::tables
