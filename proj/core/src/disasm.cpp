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

#include "packsense/disasm.hpp"

#include <string>

#include "x86_tables.hpp"

namespace packsense::disasm {

namespace {

using tables::Spec;

constexpr RegId kGpr8 = 0;      // al..bh, spl..dil, r8b..r15b (20)
constexpr RegId kGpr16 = 20;
constexpr RegId kGpr32 = 36;
constexpr RegId kGpr64 = 52;
constexpr RegId kSeg = 68;
constexpr RegId kCr = 74;
constexpr RegId kDr = 90;
constexpr RegId kSt = 106;
constexpr RegId kMm = 114;
constexpr RegId kXmm = 122;
constexpr RegId kYmm = 154;
constexpr RegId kZmm = 186;
constexpr RegId kRip = 218;
constexpr RegId kEip = 219;

std::vector<std::string> build_register_storage() {
  std::vector<std::string> r;
  for (auto n : {"al", "cl", "dl", "bl", "ah", "ch", "dh", "bh", "spl", "bpl", "sil", "dil"}) r.emplace_back(n);
  for (int i = 8; i < 16; ++i) r.push_back("r" + std::to_string(i) + "b");
  for (auto n : {"ax", "cx", "dx", "bx", "sp", "bp", "si", "di"}) r.emplace_back(n);
  for (int i = 8; i < 16; ++i) r.push_back("r" + std::to_string(i) + "w");
  for (auto n : {"eax", "ecx", "edx", "ebx", "esp", "ebp", "esi", "edi"}) r.emplace_back(n);
  for (int i = 8; i < 16; ++i) r.push_back("r" + std::to_string(i) + "d");
  for (auto n : {"rax", "rcx", "rdx", "rbx", "rsp", "rbp", "rsi", "rdi"}) r.emplace_back(n);
  for (int i = 8; i < 16; ++i) r.push_back("r" + std::to_string(i));
  for (auto n : {"es", "cs", "ss", "ds", "fs", "gs"}) r.emplace_back(n);
  for (int i = 0; i < 16; ++i) r.push_back("cr" + std::to_string(i));
  for (int i = 0; i < 16; ++i) r.push_back("dr" + std::to_string(i));
  for (int i = 0; i < 8; ++i) r.push_back("st" + std::to_string(i));
  for (int i = 0; i < 8; ++i) r.push_back("mm" + std::to_string(i));
  for (int i = 0; i < 32; ++i) r.push_back("xmm" + std::to_string(i));
  for (int i = 0; i < 32; ++i) r.push_back("ymm" + std::to_string(i));
  for (int i = 0; i < 32; ++i) r.push_back("zmm" + std::to_string(i));
  r.emplace_back("rip");
  r.emplace_back("eip");
  return r;
}

const std::vector<std::string>& register_storage() {
  static const auto storage = build_register_storage();
  return storage;
}

RegId gpr(int bits, int n, bool rex) {
  switch (bits) {
    case 8:
      if (n < 4 || (!rex && n < 8)) return static_cast<RegId>(kGpr8 + n);
      if (n < 8) return static_cast<RegId>(kGpr8 + 8 + (n - 4));
      return static_cast<RegId>(kGpr8 + 12 + (n - 8));
    case 16: return static_cast<RegId>(kGpr16 + n);
    case 32: return static_cast<RegId>(kGpr32 + n);
    default: return static_cast<RegId>(kGpr64 + n);
  }
}

Operand reg_operand(RegId r) {
  Operand o;
  o.kind = OperandKind::Register;
  o.reg = r;
  return o;
}

Operand imm_operand(std::int64_t v) {
  Operand o;
  o.kind = OperandKind::Immediate;
  o.value = v;
  return o;
}

enum class SimdRegs { Mmx, Xmm };

class Decoder {
 public:
  Decoder(ByteView b, std::size_t start, Mode mode, std::uint64_t base_va)
      : b_(b), start_(start), pos_(start), limit_(std::min(b.size(), start + 15)), mode64_(mode == Mode::x86_64),
        base_va_(base_va) {}

  bool run(DecodedUnit& u);

 private:
  bool fetch(std::uint8_t& out) {
    if (pos_ >= limit_) return false;
    out = b_[pos_++];
    return true;
  }
  bool peek(std::uint8_t& out) const {
    if (pos_ >= limit_) return false;
    out = b_[pos_];
    return true;
  }
  bool read_signed(int nbytes, std::int64_t& out) {
    if (pos_ + nbytes > limit_) return false;
    std::uint64_t v = 0;
    for (int i = 0; i < nbytes; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += nbytes;
    const int shift = 64 - 8 * nbytes;
    out = shift ? static_cast<std::int64_t>(v << shift) >> shift : static_cast<std::int64_t>(v);
    return true;
  }

  int operand_bits(std::uint16_t flags) const {
    if (mode64_) {
      if (rex_ & 0x8) return 64;
      if (flags & tables::kF64) return 64;
      if (flags & tables::kD64) return opsize_ ? 16 : 64;
    }
    return opsize_ ? 16 : 32;
  }
  int address_bits() const {
    if (mode64_) return addrsize_ ? 32 : 64;
    return addrsize_ ? 16 : 32;
  }
  bool rex_r() const { return rex_ & 0x4; }
  bool rex_x() const { return rex_ & 0x2; }
  bool rex_b() const { return rex_ & 0x1; }

  bool read_modrm() {
    if (!fetch(modrm_)) return false;
    has_modrm_ = true;
    mod_ = modrm_ >> 6;
    reg_ = (modrm_ >> 3) & 7;
    rm_ = modrm_ & 7;
    return mod_ == 3 || parse_memory();
  }
  bool parse_memory();

  bool decode_operand(Spec s, int osize, DecodedUnit& u);
  void add_simd_operands(SimdRegs cls, int width_bits, int reg_ext, int rm_ext, DecodedUnit& u);
  void drop_prefixes(DecodedUnit& u, bool opsize, bool rep, bool repne);

  bool decode_two_byte(DecodedUnit& u);
  bool decode_x87(std::uint8_t opcode, DecodedUnit& u);
  bool decode_vex(std::uint8_t opcode, DecodedUnit& u);
  bool decode_evex(DecodedUnit& u);
  bool finish_ops(const std::array<Spec, 3>& ops, std::uint16_t flags, DecodedUnit& u);

  ByteView b_;
  std::size_t start_, pos_, limit_;
  bool mode64_;
  std::uint64_t base_va_;

  std::uint8_t rex_ = 0;
  bool opsize_ = false, addrsize_ = false, rep_ = false, repne_ = false;
  std::uint8_t last_rep_ = 0;
  std::uint8_t opcode_low_ = 0;

  bool has_modrm_ = false;
  std::uint8_t modrm_ = 0, mod_ = 0, reg_ = 0, rm_ = 0;
  MemExpr mem_;

  // Relative branch operands awaiting the final length.
  std::array<int, 4> relative_{-1, -1, -1, -1};
  int relative_count_ = 0;
  int branch_bits_ = 32;
};

bool Decoder::parse_memory() {
  mem_ = MemExpr{};
  const int abits = address_bits();
  mem_.address_bits = static_cast<std::uint8_t>(abits);
  if (abits == 16) {
    static constexpr RegId kBase16[8] = {kGpr16 + 3, kGpr16 + 3, kGpr16 + 5, kGpr16 + 5,
                                         kGpr16 + 6, kGpr16 + 7, kGpr16 + 5, kGpr16 + 3};
    static constexpr RegId kIndex16[8] = {kGpr16 + 6, kGpr16 + 7, kGpr16 + 6, kGpr16 + 7,
                                          kNoRegister, kNoRegister, kNoRegister, kNoRegister};
    int disp_bytes = mod_ == 1 ? 1 : mod_ == 2 ? 2 : 0;
    if (mod_ == 0 && rm_ == 6) {
      disp_bytes = 2;
    } else {
      mem_.base = kBase16[rm_];
      mem_.index = kIndex16[rm_];
    }
    if (disp_bytes) {
      if (!read_signed(disp_bytes, mem_.displacement)) return false;
      mem_.has_displacement = true;
    }
    return true;
  }
  int disp_bytes = mod_ == 1 ? 1 : mod_ == 2 ? 4 : 0;
  if (rm_ == 4) {
    std::uint8_t sib = 0;
    if (!fetch(sib)) return false;
    mem_.scale = static_cast<std::uint8_t>(1u << (sib >> 6));
    const int index = ((sib >> 3) & 7) | (rex_x() ? 8 : 0);
    const int base = (sib & 7) | (rex_b() ? 8 : 0);
    if (index != 4) mem_.index = gpr(abits, index, true);
    if ((sib & 7) == 5 && mod_ == 0) {
      disp_bytes = 4;
    } else {
      mem_.base = gpr(abits, base, true);
    }
  } else if (rm_ == 5 && mod_ == 0) {
    disp_bytes = 4;
    if (mode64_) {
      mem_.rip_relative = true;
      mem_.base = abits == 64 ? kRip : kEip;
    }
  } else {
    mem_.base = gpr(abits, rm_ | (rex_b() ? 8 : 0), true);
  }
  if (disp_bytes) {
    if (!read_signed(disp_bytes, mem_.displacement)) return false;
    mem_.has_displacement = true;
  }
  return true;
}

bool Decoder::decode_operand(Spec s, int osize, DecodedUnit& u) {
  const bool rex = rex_ != 0;
  auto rm_register = [&](int bits) { return reg_operand(gpr(bits, rm_ | (rex_b() ? 8 : 0), rex)); };
  auto mem_operand = [&] {
    Operand o;
    o.kind = OperandKind::MemoryRef;
    o.mem = mem_;
    return o;
  };
  auto imm = [&](int nbytes) {
    std::int64_t v = 0;
    if (!read_signed(nbytes, v)) return false;
    u.operands.push_back(imm_operand(v));
    return true;
  };
  auto rel = [&](int nbytes) {
    std::int64_t v = 0;
    if (!read_signed(nbytes, v)) return false;
    Operand o;
    o.kind = OperandKind::BranchTarget;
    o.value = v;
    relative_[relative_count_++] = static_cast<int>(u.operands.size());
    u.operands.push_back(o);
    return true;
  };
  switch (s) {
    case Spec::None: return true;
    case Spec::Eb: u.operands.push_back(mod_ == 3 ? rm_register(8) : mem_operand()); return true;
    case Spec::Ev: u.operands.push_back(mod_ == 3 ? rm_register(osize) : mem_operand()); return true;
    case Spec::Ew: u.operands.push_back(mod_ == 3 ? rm_register(16) : mem_operand()); return true;
    case Spec::Ed: u.operands.push_back(mod_ == 3 ? rm_register(32) : mem_operand()); return true;
    case Spec::M:
    case Spec::Mp:
      if (mod_ == 3) return false;
      u.operands.push_back(mem_operand());
      return true;
    case Spec::Gb: u.operands.push_back(reg_operand(gpr(8, reg_ | (rex_r() ? 8 : 0), rex))); return true;
    case Spec::Gv: u.operands.push_back(reg_operand(gpr(osize, reg_ | (rex_r() ? 8 : 0), rex))); return true;
    case Spec::Gw: u.operands.push_back(reg_operand(gpr(16, reg_ | (rex_r() ? 8 : 0), rex))); return true;
    case Spec::Gz:
      u.operands.push_back(reg_operand(gpr(osize == 16 ? 16 : 32, reg_ | (rex_r() ? 8 : 0), rex)));
      return true;
    case Spec::Ib: return imm(1);
    case Spec::Iw: return imm(2);
    case Spec::Iz: return imm(osize == 16 ? 2 : 4);
    case Spec::Iv: return imm(osize / 8);
    case Spec::Jb: branch_bits_ = mode64_ ? 64 : osize; return rel(1);
    case Spec::Jz: {
      // Long mode follows the AMD reading: 66 without REX.W shrinks the displacement.
      const bool short_rel = mode64_ ? (opsize_ && !(rex_ & 0x8)) : osize == 16;
      branch_bits_ = short_rel ? 16 : (mode64_ ? 64 : 32);
      return rel(short_rel ? 2 : 4);
    }
    case Spec::Ob:
    case Spec::Ov: {
      MemExpr m;
      m.address_bits = static_cast<std::uint8_t>(address_bits());
      if (!read_signed(m.address_bits / 8, m.displacement)) return false;
      m.has_displacement = true;
      Operand o;
      o.kind = OperandKind::MemoryRef;
      o.mem = m;
      u.operands.push_back(o);
      return true;
    }
    case Spec::Ap: {
      std::int64_t off = 0, seg = 0;
      if (!read_signed(opsize_ ? 2 : 4, off) || !read_signed(2, seg)) return false;
      Operand o;
      o.kind = OperandKind::BranchTarget;
      o.value = static_cast<std::int64_t>(static_cast<std::uint64_t>(off) & (opsize_ ? 0xFFFFu : 0xFFFFFFFFu));
      u.operands.push_back(o);
      return true;
    }
    case Spec::Sw:
      if (reg_ > 5) return false;
      u.operands.push_back(reg_operand(static_cast<RegId>(kSeg + reg_)));
      return true;
    case Spec::Cd: u.operands.push_back(reg_operand(static_cast<RegId>(kCr + (reg_ | (rex_r() ? 8 : 0))))); return true;
    case Spec::Dd: u.operands.push_back(reg_operand(static_cast<RegId>(kDr + (reg_ | (rex_r() ? 8 : 0))))); return true;
    case Spec::Rd: u.operands.push_back(rm_register(mode64_ ? 64 : 32)); return true;
    case Spec::Zb: u.operands.push_back(reg_operand(gpr(8, opcode_low_ | (rex_b() ? 8 : 0), rex))); return true;
    case Spec::Zv: u.operands.push_back(reg_operand(gpr(osize, opcode_low_ | (rex_b() ? 8 : 0), rex))); return true;
    case Spec::AL: u.operands.push_back(reg_operand(gpr(8, 0, false))); return true;
    case Spec::rAX: u.operands.push_back(reg_operand(gpr(osize, 0, false))); return true;
    case Spec::CL: u.operands.push_back(reg_operand(gpr(8, 1, false))); return true;
    case Spec::DX: u.operands.push_back(reg_operand(gpr(16, 2, false))); return true;
    case Spec::One: u.operands.push_back(imm_operand(1)); return true;
    case Spec::ES: u.operands.push_back(reg_operand(kSeg + 0)); return true;
    case Spec::CS: u.operands.push_back(reg_operand(kSeg + 1)); return true;
    case Spec::SS: u.operands.push_back(reg_operand(kSeg + 2)); return true;
    case Spec::DS: u.operands.push_back(reg_operand(kSeg + 3)); return true;
    case Spec::FS: u.operands.push_back(reg_operand(kSeg + 4)); return true;
    case Spec::GS: u.operands.push_back(reg_operand(kSeg + 5)); return true;
  }
  return false;
}


void Decoder::drop_prefixes(DecodedUnit& u, bool opsize, bool rep, bool repne) {
  InlineVec<Prefix, 4> kept;
  for (auto p : u.prefixes) {
    if ((opsize && p == Prefix::OpSize) || (rep && p == Prefix::Rep) || (repne && p == Prefix::Repne)) continue;
    kept.push_back(p);
  }
  u.prefixes = kept;
}

void Decoder::add_simd_operands(SimdRegs cls, int width_bits, int reg_ext, int rm_ext, DecodedUnit& u) {
  auto vector_reg = [&](int n) -> RegId {
    if (cls == SimdRegs::Mmx) return static_cast<RegId>(kMm + (n & 7));
    if (width_bits == 512) return static_cast<RegId>(kZmm + n);
    if (width_bits == 256) return static_cast<RegId>(kYmm + n);
    return static_cast<RegId>(kXmm + n);
  };
  u.operands.push_back(reg_operand(vector_reg(reg_ | reg_ext)));
  if (mod_ == 3) {
    u.operands.push_back(reg_operand(vector_reg(rm_ | rm_ext)));
  } else {
    Operand o;
    o.kind = OperandKind::MemoryRef;
    o.mem = mem_;
    u.operands.push_back(o);
  }
}

bool Decoder::finish_ops(const std::array<Spec, 3>& ops, std::uint16_t flags, DecodedUnit& u) {
  const int osize = operand_bits(flags);
  for (Spec s : ops) {
    if (!decode_operand(s, osize, u)) return false;
  }
  return true;
}

bool Decoder::decode_x87(std::uint8_t opcode, DecodedUnit& u) {
  if (!read_modrm()) return false;
  if (mod_ != 3) {
    const auto m = tables::x87_memory_mnemonic(opcode, reg_);
    if (m.empty()) return false;
    u.mnemonic = m;
    Operand o;
    o.kind = OperandKind::MemoryRef;
    o.mem = mem_;
    u.operands.push_back(o);
    return true;
  }
  const auto m = tables::x87_register_mnemonic(opcode, modrm_);
  if (m.empty()) return false;
  u.mnemonic = m;
  if (m == "fnstsw") {
    u.operands.push_back(reg_operand(gpr(16, 0, false)));
  } else if (!(opcode == 0xD9 && reg_ >= 2) && !(opcode == 0xDA && reg_ == 5) && !(opcode == 0xDB && reg_ == 4) &&
             !(opcode == 0xDE && reg_ == 3)) {
    u.operands.push_back(reg_operand(static_cast<RegId>(kSt + rm_)));
  }
  return true;
}

bool Decoder::decode_two_byte(DecodedUnit& u) {
  std::uint8_t op = 0;
  if (!fetch(op)) return false;
  const bool mandatory = opsize_ || rep_ || repne_;
  if (op == 0x38 || op == 0x3A) {
    std::uint8_t op3 = 0;
    if (!fetch(op3) || !read_modrm()) return false;
    const int rx = rex_r() ? 8 : 0, bx = rex_b() ? 8 : 0;
    if (op == 0x38 && (op3 == 0xF0 || op3 == 0xF1)) {
      const bool is_crc = last_rep_ == 0xF2;
      if (is_crc) {
        u.mnemonic = tables::kCrc32;
        drop_prefixes(u, false, false, true);
        return finish_ops({Spec::Gv, op3 == 0xF0 ? Spec::Eb : Spec::Ev}, 0, u);
      }
      if (mod_ == 3) return false;
      u.mnemonic = tables::kMovbe;
      return finish_ops(op3 == 0xF0 ? std::array<Spec, 3>{Spec::Gv, Spec::M} : std::array<Spec, 3>{Spec::M, Spec::Gv}, 0,
                        u);
    }
    u.mnemonic = tables::kSimd;
    drop_prefixes(u, true, true, true);
    add_simd_operands(mandatory ? SimdRegs::Xmm : SimdRegs::Mmx, 128, rx, bx, u);
    if (op == 0x3A) {
      std::int64_t v = 0;
      if (!read_signed(1, v)) return false;
      u.operands.push_back(imm_operand(v));
    }
    return true;
  }
  if (op == 0x0F) {  // 3DNow!: modrm then an opcode suffix byte
    if (!read_modrm()) return false;
    std::uint8_t suffix = 0;
    if (!fetch(suffix)) return false;
    u.mnemonic = tables::k3dNow;
    add_simd_operands(SimdRegs::Mmx, 64, 0, 0, u);
    return true;
  }
  if (tables::is_simd_0f(op)) {
    if (!read_modrm()) return false;
    const bool xmm_default = (op >= 0x10 && op <= 0x17) || (op >= 0x28 && op <= 0x2F) ||
                             (op >= 0x50 && op <= 0x5F) || op == 0xC2 || op == 0xC6;
    u.mnemonic = tables::kSimd;
    drop_prefixes(u, true, true, true);
    add_simd_operands(mandatory || xmm_default ? SimdRegs::Xmm : SimdRegs::Mmx, 128, rex_r() ? 8 : 0,
                      rex_b() ? 8 : 0, u);
    if (tables::simd_0f_has_imm8(op)) {
      std::int64_t v = 0;
      if (!read_signed(1, v)) return false;
      u.operands.push_back(imm_operand(v));
    }
    return true;
  }

  const auto& d = tables::two_byte_map()[op];
  if (d.flags & tables::kInvalid) return false;
  opcode_low_ = op & 7;
  if (op == 0xB8 || op == 0xBC || op == 0xBD) {
    const bool f3 = last_rep_ == 0xF3;
    if (op == 0xB8 && !f3) return false;
    if (f3) {
      drop_prefixes(u, false, true, false);
      u.mnemonic = op == 0xB8 ? tables::kPopcnt : op == 0xBC ? tables::kTzcnt : tables::kLzcnt;
      if (!read_modrm()) return false;
      return finish_ops(d.ops, d.flags, u);
    }
  }
  if ((op == 0x78 || op == 0x79) && (opsize_ || rep_ || repne_)) return false;
  if (d.flags & tables::kNoMemory) {
    // Control/debug register moves ignore modrm.mod and always name registers.
    if (!fetch(modrm_)) return false;
    has_modrm_ = true;
    mod_ = 3;
    reg_ = (modrm_ >> 3) & 7;
    rm_ = modrm_ & 7;
  } else if (d.flags & tables::kModrm) {
    if (!read_modrm()) return false;
  }
  if (d.flags & tables::kGroup) {
    const auto& e = tables::group(static_cast<tables::GroupId>(d.group))[reg_];
    if (d.group == tables::kGrp7 && mod_ == 3) {
      if (reg_ == 4 || reg_ == 6) {
        u.mnemonic = e.mnemonic;
        return finish_ops(e.ops, d.flags, u);
      }
      u.mnemonic = tables::kSysop;
      return true;
    }
    if (d.group == tables::kGrp9 && mod_ == 3) {
      if (reg_ < 6) return false;
      u.mnemonic = tables::kRdrand;
      return finish_ops({Spec::Ev}, 0, u);
    }
    if (d.group == tables::kGrp15 && mod_ == 3) {
      if (reg_ >= 5) {
        u.mnemonic = tables::kFence;
        return true;
      }
      if (reg_ <= 3 && last_rep_ == 0xF3 && mode64_) {
        drop_prefixes(u, false, true, false);
        u.mnemonic = tables::kFsgsbase;
        return finish_ops({Spec::Ev}, 0, u);
      }
      return false;
    }
    if (d.group == tables::kGrp16 && mod_ == 3) {
      u.mnemonic = tables::kNop;
      return finish_ops({Spec::Ev}, 0, u);
    }
    if (e.mnemonic.empty()) return false;
    u.mnemonic = e.mnemonic;
    const auto& ops = e.ops[0] != Spec::None ? e.ops : d.ops;
    return finish_ops(ops, static_cast<std::uint16_t>(d.flags | e.flags), u);
  }
  u.mnemonic = d.mnemonic;
  if (op == 0x1E && last_rep_ == 0xF3 && (modrm_ == 0xFA || modrm_ == 0xFB)) {
    drop_prefixes(u, false, true, false);
    u.mnemonic = tables::kEndbr;
    return true;
  }
  return finish_ops(d.ops, d.flags, u);
}

bool Decoder::decode_vex(std::uint8_t opcode, DecodedUnit& u) {
  std::uint8_t p1 = 0, p2 = 0;
  if (!fetch(p1)) return false;
  int map = 1, rx = 0, bx = 0, len_bit = 0;
  if (opcode == 0xC5) {
    rx = (p1 & 0x80) ? 0 : 8;
    len_bit = (p1 >> 2) & 1;
  } else {
    if (!fetch(p2)) return false;
    rx = (p1 & 0x80) ? 0 : 8;
    bx = (p1 & 0x20) ? 0 : 8;
    map = p1 & 0x1F;
    len_bit = (p2 >> 2) & 1;
    if (map < 1 || map > 3) return false;
  }
  if (!mode64_) rx = bx = 0;
  std::uint8_t op = 0;
  if (!fetch(op)) return false;
  u.mnemonic = tables::kVex;
  if (map == 1 && op == 0x77) return true;  // vzeroupper / vzeroall
  if (!read_modrm()) return false;
  add_simd_operands(SimdRegs::Xmm, len_bit ? 256 : 128, rx, bx, u);
  if (map == 3 || (map == 1 && tables::simd_0f_has_imm8(op))) {
    std::int64_t v = 0;
    if (!read_signed(1, v)) return false;
    u.operands.push_back(imm_operand(v));
  }
  return true;
}

bool Decoder::decode_evex(DecodedUnit& u) {
  std::uint8_t p0 = 0, p1 = 0, p2 = 0;
  if (!fetch(p0) || !fetch(p1) || !fetch(p2)) return false;
  if ((p0 & 0x08) || !(p1 & 0x04)) return false;
  const int map = p0 & 0x07;
  if (map != 1 && map != 2 && map != 3 && map != 5 && map != 6) return false;
  int rx = ((p0 & 0x80) ? 0 : 8) | ((p0 & 0x10) ? 0 : 16);
  int bx = ((p0 & 0x20) ? 0 : 8) | ((p0 & 0x40) ? 0 : 16);
  if (!mode64_) rx = bx = 0;
  std::uint8_t op = 0;
  if (!fetch(op) || !read_modrm()) return false;
  const int ll = (p2 >> 5) & 3;
  u.mnemonic = tables::kEvex;
  add_simd_operands(SimdRegs::Xmm, ll == 2 ? 512 : ll == 1 ? 256 : 128, rx, bx, u);
  if (map == 3 || (map == 1 && tables::simd_0f_has_imm8(op))) {
    std::int64_t v = 0;
    if (!read_signed(1, v)) return false;
    u.operands.push_back(imm_operand(v));
  }
  return true;
}

bool Decoder::run(DecodedUnit& u) {
  // Legacy prefixes and REX. A REX byte only counts when it directly precedes
  // the opcode.
  for (;;) {
    std::uint8_t x = 0;
    if (!peek(x)) return false;
    if (mode64_ && x >= 0x40 && x <= 0x4F) {
      rex_ = x;
      ++pos_;
      continue;
    }
    std::optional<Prefix> p;
    switch (x) {
      case 0xF0: p = Prefix::Lock; break;
      case 0xF2: p = Prefix::Repne; repne_ = true; last_rep_ = x; break;
      case 0xF3: p = Prefix::Rep; rep_ = true; last_rep_ = x; break;
      case 0x26: p = Prefix::Es; break;
      case 0x2E: p = Prefix::Cs; break;
      case 0x36: p = Prefix::Ss; break;
      case 0x3E: p = Prefix::Ds; break;
      case 0x64: p = Prefix::Fs; break;
      case 0x65: p = Prefix::Gs; break;
      case 0x66: p = Prefix::OpSize; opsize_ = true; break;
      case 0x67: p = mode64_ ? Prefix::AddrSize32 : Prefix::AddrSize16; addrsize_ = true; break;
      default: break;
    }
    if (!p) break;
    rex_ = 0;
    ++pos_;
    bool dup = false;
    for (auto q : u.prefixes) dup = dup || q == *p;
    if (!dup) u.prefixes.push_back(*p);
  }

  std::uint8_t op = 0;
  if (!fetch(op)) return false;
  opcode_low_ = op & 7;

  if (op == 0x0F) {
    if (!decode_two_byte(u)) return false;
  } else if (op == 0xC4 || op == 0xC5 || op == 0x62) {
    std::uint8_t next = 0;
    const bool is_vex = peek(next) && (mode64_ || (next & 0xC0) == 0xC0);
    if (is_vex) {
      if (rex_ || opsize_ || rep_ || repne_) return false;
      if (!(op == 0x62 ? decode_evex(u) : decode_vex(op, u))) return false;
    } else {
      const auto& d = tables::one_byte_map()[op];
      if (!read_modrm()) return false;
      u.mnemonic = d.mnemonic;
      if (!finish_ops(d.ops, d.flags, u)) return false;
    }
  } else if (op >= 0xD8 && op <= 0xDF) {
    if (!decode_x87(op, u)) return false;
  } else {
    const auto& d = tables::one_byte_map()[op];
    if (d.flags & tables::kInvalid) return false;
    if (mode64_ && op == 0x63) {
      if (!read_modrm()) return false;
      u.mnemonic = tables::kMovsxd;
      if (!finish_ops({Spec::Gv, Spec::Ed}, 0, u)) return false;
    } else {
      if (mode64_ && (d.flags & tables::kI64)) return false;
      if (d.flags & tables::kModrm) {
        if (!read_modrm()) return false;
      }
      if (d.flags & tables::kGroup) {
        const auto& e = tables::group(static_cast<tables::GroupId>(d.group))[reg_];
        if ((op == 0xC6 || op == 0xC7) && modrm_ == 0xF8) {
          u.mnemonic = op == 0xC6 ? tables::kXabort : tables::kXbegin;
          if (!finish_ops({op == 0xC6 ? Spec::Ib : Spec::Jz}, tables::kF64, u)) return false;
        } else {
          if (e.mnemonic.empty()) return false;
          u.mnemonic = e.mnemonic;
          const auto& ops = e.ops[0] != Spec::None ? e.ops : d.ops;
          if (!finish_ops(ops, static_cast<std::uint16_t>(d.flags | e.flags), u)) return false;
        }
      } else if (op == 0x90 && last_rep_ == 0xF3 && !(rex_ & 1)) {
        drop_prefixes(u, false, true, false);
        u.mnemonic = tables::kPause;
      } else if (op == 0x90 && (rex_ & 1)) {
        u.mnemonic = "xchg";
        if (!finish_ops({Spec::Zv, Spec::rAX}, 0, u)) return false;
      } else {
        u.mnemonic = d.mnemonic;
        if (!finish_ops(d.ops, d.flags, u)) return false;
      }
    }
  }

  const std::size_t length = pos_ - start_;
  const std::uint64_t next_va = base_va_ + start_ + length;
  for (int i = 0; i < relative_count_; ++i) {
    auto& o = u.operands[static_cast<std::size_t>(relative_[i])];
    std::uint64_t target = next_va + static_cast<std::uint64_t>(*o.value);
    if (branch_bits_ == 32) target &= 0xFFFFFFFFull;
    if (branch_bits_ == 16) target &= 0xFFFFull;
    o.value = static_cast<std::int64_t>(target);
  }
  for (std::size_t i = 0; i < u.operands.size(); ++i) {
    auto& o = u.operands[i];
    if (o.kind == OperandKind::MemoryRef && o.mem->rip_relative) {
      std::uint64_t t = next_va + static_cast<std::uint64_t>(o.mem->displacement);
      if (o.mem->address_bits == 32) t &= 0xFFFFFFFFull;
      o.mem->rip_target = t;
    }
  }
  u.length = static_cast<std::uint8_t>(length);
  u.raw = b_.subspan(start_, length);
  u.kind = UnitKind::Instruction;
  return true;
}

}  // namespace

std::optional<std::uint64_t> MemExpr::absolute_address() const {
  if (rip_relative) return rip_target;
  if (base != kNoRegister || index != kNoRegister) return std::nullopt;
  const std::uint64_t mask = address_bits >= 64 ? ~0ull : ((1ull << address_bits) - 1);
  return static_cast<std::uint64_t>(displacement) & mask;
}

const std::vector<std::string_view>& register_names() {
  static const std::vector<std::string_view> names = [] {
    std::vector<std::string_view> v;
    for (const auto& s : register_storage()) v.emplace_back(s);
    return v;
  }();
  return names;
}

std::string_view register_name(RegId id) {
  const auto& names = register_names();
  return id < names.size() ? names[id] : std::string_view();
}

bool is_flags_register(std::string_view name) {
  return name == "eflags" || name == "rflags" || name == "flags";
}

std::string_view prefix_token(Prefix p) {
  return prefix_tokens()[static_cast<std::size_t>(p)];
}

const std::vector<std::string_view>& prefix_tokens() {
  static const std::vector<std::string_view> tokens = {"lock", "rep", "repne", "es:", "cs:", "ss:",
                                                       "ds:", "fs:", "gs:", "data16", "addr16", "addr32"};
  return tokens;
}

const std::vector<std::string_view>& mnemonic_tokens() { return tables::all_mnemonics(); }

DecodedUnit decode_one(ByteView bytes, std::size_t offset, Mode mode, std::uint64_t base_va) {
  DecodedUnit u;
  u.offset = offset;
  u.virtual_address = base_va + offset;
  if (offset >= bytes.size()) return u;
  Decoder d(bytes, offset, mode, base_va);
  if (!d.run(u)) {
    DecodedUnit raw;
    raw.offset = offset;
    raw.virtual_address = base_va + offset;
    raw.kind = UnitKind::RawByte;
    raw.length = 1;
    raw.raw = bytes.subspan(offset, 1);
    return raw;
  }
  return u;
}

std::vector<DecodedUnit> sweep_bytes(ByteView bytes, Mode mode, std::uint64_t base_va, std::uint64_t file_offset) {
  std::vector<DecodedUnit> units;
  units.reserve(bytes.size() / 3 + 1);
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    DecodedUnit u = decode_one(bytes, pos, mode, base_va);
    pos += u.length;
    u.offset += file_offset;
    units.push_back(u);
  }
  return units;
}

std::vector<DecodedUnit> linear_sweep(const binimage::BinaryImage& image, const binimage::Section* region) {
  std::vector<DecodedUnit> out;
  auto sweep_section = [&](const binimage::Section& s) {
    auto units = sweep_bytes(s.bytes, image.bitness(), s.virtual_address, s.file_offset);
    out.insert(out.end(), units.begin(), units.end());
  };
  if (region) {
    sweep_section(*region);
  } else {
    for (const auto& s : binimage::iter_sections(image)) sweep_section(s);
  }
  return out;
}

}  // namespace packsense::disasm
