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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "packsense/disasm.hpp"

namespace packsense::disasm {
namespace {

struct OracleRow {
  unsigned length;
  std::string mnemonic;
};

std::map<std::uint64_t, OracleRow> read_oracle(const std::string& path) {
  std::ifstream in(path);
  std::map<std::uint64_t, OracleRow> rows;
  std::uint64_t off;
  OracleRow r;
  while (in >> off >> r.length >> r.mnemonic) rows[off] = r;
  return rows;
}

struct OracleCase {
  std::string bin;
  std::string listing;
  Mode mode;
};

std::vector<OracleCase> oracle_cases() {
  std::vector<OracleCase> cases;
  const std::filesystem::path fixtures = std::string(PACKSENSE_TEST_FIXTURES) + "/x86";
  const std::filesystem::path data = PACKSENSE_DATA_DIR;
  for (const auto& dir : {fixtures, data}) {
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      if (e.path().extension() != ".bin") continue;
      const auto stem = e.path().stem().string();
      const Mode m = stem.find("_64") != std::string::npos ? Mode::x86_64 : Mode::x86_32;
      cases.push_back({e.path().string(), (fixtures / (stem + ".objdump.txt")).string(), m});
    }
  }
  std::sort(cases.begin(), cases.end(), [](const auto& a, const auto& b) { return a.bin < b.bin; });
  return cases;
}

// Wherever the sweep and objdump start an instruction at the same offset, the
// two must agree on its length, and the sweep must not have given up on a byte
// objdump decodes.
TEST(DecoderOracle, LengthsAgreeWithObjdump) {
  const auto cases = oracle_cases();
  ASSERT_GE(cases.size(), 10u);
  for (const auto& c : cases) {
    SCOPED_TRACE(c.bin);
    const auto oracle = read_oracle(c.listing);
    ASSERT_FALSE(oracle.empty());
    const auto bytes = read_file(c.bin);
    const auto units = sweep_bytes(bytes, c.mode);
    std::size_t synced = 0, mismatched = 0, gave_up = 0;
    for (const auto& u : units) {
      const auto it = oracle.find(u.offset);
      if (it == oracle.end()) continue;
      ++synced;
      if (u.kind == UnitKind::RawByte) {
        ++gave_up;
        continue;
      }
      // fwait before an x87 instruction is folded by objdump into one line.
      if (u.mnemonic == "fwait") continue;
      if (u.length != it->second.length) ++mismatched;
    }
    EXPECT_EQ(mismatched, 0u);
    EXPECT_EQ(gave_up, 0u);
    EXPECT_GE(synced * 10, units.size() * 9) << "sweep drifted from objdump";
  }
}

TEST(Decode, CommonForms) {
  const Bytes code{0x55,                          // push ebp
                   0x89, 0xE5,                    // mov ebp, esp
                   0x83, 0xC0, 0x01,              // add eax, 1
                   0x8B, 0x80, 0xE7, 0xE8, 0xD7, 0xF9,  // mov eax, [eax-0x6281719]
                   0xE8, 0x00, 0x00, 0x00, 0x00,  // call next
                   0xC3};
  const auto units = sweep_bytes(code, Mode::x86_32, 0x401000);
  ASSERT_EQ(units.size(), 6u);
  EXPECT_EQ(units[0].mnemonic, "push");
  EXPECT_EQ(units[1].mnemonic, "mov");
  EXPECT_EQ(units[2].mnemonic, "add");
  ASSERT_EQ(units[2].operands.size(), 2u);
  EXPECT_EQ(units[2].operands[1].kind, OperandKind::Immediate);
  EXPECT_EQ(*units[2].operands[1].value, 1);
  ASSERT_EQ(units[3].operands.size(), 2u);
  ASSERT_TRUE(units[3].operands[1].mem.has_value());
  EXPECT_EQ(units[3].operands[1].mem->displacement, -0x6281719);
  EXPECT_EQ(register_name(units[3].operands[1].mem->base), "eax");
  ASSERT_EQ(units[4].operands.size(), 1u);
  EXPECT_EQ(units[4].operands[0].kind, OperandKind::BranchTarget);
  EXPECT_EQ(*units[4].operands[0].value, 0x401000 + 17);
  EXPECT_EQ(units[5].mnemonic, "ret");
}

TEST(Decode, RipRelativeResolves) {
  // lea rax, [rip+0x10]
  const Bytes code{0x48, 0x8D, 0x05, 0x10, 0x00, 0x00, 0x00};
  const auto u = decode_one(code, 0, Mode::x86_64, 0x1000);
  EXPECT_EQ(u.length, 7);
  ASSERT_TRUE(u.operands[1].mem.has_value());
  EXPECT_TRUE(u.operands[1].mem->rip_relative);
  EXPECT_EQ(u.operands[1].mem->absolute_address(), std::optional<std::uint64_t>(0x1000 + 7 + 0x10));
}

TEST(Decode, TruncatedInstructionBecomesRawByte) {
  const Bytes code{0xE8, 0x00, 0x00};
  const auto u = decode_one(code, 0, Mode::x86_32);
  EXPECT_EQ(u.kind, UnitKind::RawByte);
  EXPECT_EQ(u.length, 1);
}

TEST(Sweep, TilesRandomBuffersInBothModes) {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    Bytes b(1 + rng.uniform(4096));
    for (auto& x : b) x = rng.byte();
    for (Mode m : {Mode::x86_32, Mode::x86_64}) {
      const auto units = sweep_bytes(b, m, 0, 100);
      std::uint64_t next = 100;
      for (const auto& u : units) {
        ASSERT_EQ(u.offset, next);
        ASSERT_GE(u.length, 1);
        ASSERT_LE(u.length, 15);
        ASSERT_EQ(u.raw.size(), u.length);
        next += u.length;
      }
      ASSERT_EQ(next, 100 + b.size());
    }
  }
}

TEST(Sweep, RestartsAtEverySection) {
  binimage::PeSectionSpec a{".text", Bytes{0xE8, 0x00}};  // truncated call at the section end
  binimage::PeSectionSpec b{".data", Bytes{0xC3}};
  const auto img = binimage::load_image(binimage::write_pe32({a, b}).bytes);
  const auto& secs = img.sections();
  const auto units = linear_sweep(img);
  std::size_t in_second = 0;
  for (const auto& u : units) {
    if (u.offset >= secs[1].file_offset && u.offset < secs[1].file_offset + secs[1].file_size) {
      ++in_second;
    }
  }
  ASSERT_GT(in_second, 0u);
  const auto second = linear_sweep(img, &secs[1]);
  ASSERT_FALSE(second.empty());
  EXPECT_EQ(second.front().offset, secs[1].file_offset);
  EXPECT_EQ(second.front().mnemonic, "ret");
}

TEST(Registers, FlagsAreNeverNamed) {
  for (auto name : register_names()) EXPECT_FALSE(is_flags_register(name)) << name;
  EXPECT_TRUE(is_flags_register("eflags"));
}

}  // namespace
}  // namespace packsense::disasm
