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

#include "packsense/codegen.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

namespace packsense::codegen {

namespace {

// eax, ecx, edx, ebx, esi, edi
constexpr std::array<std::uint8_t, 6> kGpr = {0, 1, 2, 3, 6, 7};
constexpr std::uint8_t kEbp = 5;

std::uint8_t modrm(std::uint8_t mod, std::uint8_t reg, std::uint8_t rm) {
  return static_cast<std::uint8_t>((mod << 6) | (reg << 3) | rm);
}

class Function {
 public:
  Function(Rng& rng, const CodegenOptions& opt, std::uint64_t va, const std::vector<std::uint64_t>& callees)
      : rng_(rng), opt_(opt), va_(va), callees_(callees) {}

  Bytes build(std::size_t budget) {
    const std::size_t saved = rng_.uniform(4);
    const std::size_t frame = 4 * (1 + rng_.uniform(16));
    emit({0x55, 0x89, 0xE5});  // push ebp; mov ebp, esp
    emit({0x83, 0xEC, static_cast<std::uint8_t>(frame)});
    for (std::size_t i = 0; i < saved; ++i) emit({static_cast<std::uint8_t>(0x50 + kGpr[3 + i % 3])});
    frame_ = frame;
    const std::size_t epilogue = 8 + saved;
    // A block is at most 8 * 14 + 9 bytes.
    while (out_.size() + 128 + epilogue < budget && blocks_ < 24) block();
    const auto exit = out_.size();
    for (auto at : pending_) patch32(at, exit);
    for (std::size_t i = saved; i > 0; --i) emit({static_cast<std::uint8_t>(0x58 + kGpr[3 + (i - 1) % 3])});
    if (rng_.uniform(2)) {
      emit({0xC9});  // leave
    } else {
      emit({0x89, 0xEC, 0x5D});  // mov esp, ebp; pop ebp
    }
    if (rng_.uniform(4) == 0) {
      emit({0xC2, static_cast<std::uint8_t>(4 * (1 + rng_.uniform(3))), 0x00});
    } else {
      emit({0xC3});
    }
    return std::move(out_);
  }

 private:
  std::uint8_t reg() { return kGpr[rng_.uniform(kGpr.size())]; }
  std::uint8_t local() { return static_cast<std::uint8_t>(-static_cast<int>(4 * (1 + rng_.uniform(frame_ / 4)))); }
  std::uint8_t arg() { return static_cast<std::uint8_t>(8 + 4 * rng_.uniform(4)); }

  void emit(std::initializer_list<std::uint8_t> b) { out_.insert(out_.end(), b); }
  void emit32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void patch32(std::size_t at, std::size_t target) {
    const auto rel = static_cast<std::uint32_t>(static_cast<std::int64_t>(target) - static_cast<std::int64_t>(at + 4));
    for (int i = 0; i < 4; ++i) out_[at + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(rel >> (8 * i));
  }
  std::uint32_t data_address() {
    const auto lo = opt_.data_hi > opt_.data_lo ? opt_.data_lo : opt_.base_va;
    const auto hi = opt_.data_hi > opt_.data_lo ? opt_.data_hi : opt_.base_va + 0x1000;
    return static_cast<std::uint32_t>((lo + rng_.uniform(hi - lo)) & ~std::uint64_t{3});
  }

  void block() {
    ++blocks_;
    const auto start = out_.size();
    // Resolve a few forward branches to this block.
    std::vector<std::size_t> keep;
    for (auto at : pending_) {
      if (rng_.uniform(2)) patch32(at, start);
      else keep.push_back(at);
    }
    pending_ = std::move(keep);
    const std::size_t n = 2 + rng_.uniform(7);
    for (std::size_t i = 0; i < n; ++i) instruction();
    switch (rng_.uniform(5)) {
      case 0: {  // loop back to this block
        const auto r = reg();
        emit({0x83, modrm(3, 7, r), static_cast<std::uint8_t>(rng_.uniform(64))});  // cmp r, imm8
        const auto dist = static_cast<std::int64_t>(start) - static_cast<std::int64_t>(out_.size() + 2);
        if (dist >= -128) {
          emit({static_cast<std::uint8_t>(0x7C + rng_.uniform(4)), static_cast<std::uint8_t>(dist)});
        } else {
          emit({0x0F, static_cast<std::uint8_t>(0x8C + rng_.uniform(4))});
          emit32(static_cast<std::uint32_t>(static_cast<std::int64_t>(start) - static_cast<std::int64_t>(out_.size() + 4)));
        }
        break;
      }
      case 1:
      case 2: {  // forward conditional
        const auto r = reg();
        emit({0x85, modrm(3, r, r)});  // test r, r
        emit({0x0F, static_cast<std::uint8_t>(0x84 + rng_.uniform(2))});
        pending_.push_back(out_.size());
        emit32(0);
        break;
      }
      case 3: {  // forward jump
        emit({0xE9});
        pending_.push_back(out_.size());
        emit32(0);
        break;
      }
      default:
        break;
    }
  }

  void instruction() {
    const auto r = reg(), s = reg();
    switch (rng_.uniform(16)) {
      case 0: emit({0x8B, modrm(1, r, kEbp), local()}); break;  // mov r, [ebp-x]
      case 1: emit({0x89, modrm(1, r, kEbp), local()}); break;  // mov [ebp-x], r
      case 2: emit({0x8B, modrm(1, r, kEbp), arg()}); break;    // mov r, [ebp+arg]
      case 3: {
        static constexpr std::array<std::uint8_t, 7> kAlu = {0x01, 0x29, 0x31, 0x21, 0x09, 0x39, 0x85};
        emit({kAlu[rng_.uniform(kAlu.size())], modrm(3, s, r)});
        break;
      }
      case 4: emit({0x83, modrm(3, static_cast<std::uint8_t>(rng_.uniform(8)), r), static_cast<std::uint8_t>(rng_.uniform(32))}); break;
      case 5: emit({0x89, modrm(3, s, r)}); break;  // mov r, s
      case 6:
        emit({static_cast<std::uint8_t>(0xB8 + r)});
        emit32(static_cast<std::uint32_t>(rng_.uniform(2) ? rng_.uniform(256) : rng_.uniform(0x10000)));
        break;
      case 7: emit({0x8D, modrm(1, r, s), static_cast<std::uint8_t>(4 * rng_.uniform(8))}); break;  // lea r, [s+d]
      case 8: emit({0x8B, modrm(1, r, s), static_cast<std::uint8_t>(4 * rng_.uniform(8))}); break;  // mov r, [s+d]
      case 9:
        if (r == 0 && rng_.uniform(2)) {
          emit({0xA1});  // mov eax, [abs]
        } else {
          emit({0x8B, modrm(0, r, kEbp)});
        }
        emit32(data_address());
        break;
      case 10: emit({0x0F, 0xB6, modrm(0, r, s == kEbp ? 0 : s)}); break;  // movzx r, byte [s]
      case 11: emit({0xC1, modrm(3, static_cast<std::uint8_t>(std::array<int, 3>{4, 5, 7}[rng_.uniform(3)]), r), static_cast<std::uint8_t>(1 + rng_.uniform(8))}); break;
      case 12: emit({static_cast<std::uint8_t>((rng_.uniform(2) ? 0x40 : 0x48) + r)}); break;  // inc/dec
      case 13: emit({0x0F, 0xAF, modrm(3, r, s)}); break;  // imul r, s
      case 14: {  // call with pushed arguments
        const std::size_t args = rng_.uniform(4);
        for (std::size_t i = 0; i < args; ++i) {
          if (rng_.uniform(2)) emit({static_cast<std::uint8_t>(0x50 + reg())});
          else emit({0x6A, static_cast<std::uint8_t>(rng_.uniform(16))});
        }
        const auto target = callees_.empty() ? va_ : callees_[rng_.uniform(callees_.size())];
        emit({0xE8});
        emit32(static_cast<std::uint32_t>(target - (va_ + out_.size() + 4)));
        if (args) emit({0x83, 0xC4, static_cast<std::uint8_t>(4 * args)});  // add esp, n
        break;
      }
      default: emit({0x89, modrm(0, r, s == kEbp ? 0 : s)}); break;  // mov [s], r
    }
  }

  Rng& rng_;
  const CodegenOptions& opt_;
  std::uint64_t va_;
  const std::vector<std::uint64_t>& callees_;
  Bytes out_;
  std::vector<std::size_t> pending_;
  std::size_t frame_ = 4;
  std::size_t blocks_ = 0;
};

}  // namespace

Bytes generate_code(Rng& rng, std::size_t size, const CodegenOptions& options) {
  Bytes out;
  out.reserve(size);
  std::vector<std::uint64_t> starts;
  constexpr std::size_t kMinFunction = 160;
  while (size - out.size() >= kMinFunction) {
    const auto va = options.base_va + out.size();
    const std::size_t budget = std::min<std::size_t>(size - out.size(), kMinFunction + rng.uniform(640));
    Function fn(rng, options, va, starts);
    const auto body = fn.build(budget);
    if (body.size() > budget) throw std::logic_error("generated function exceeds its budget");
    out.insert(out.end(), body.begin(), body.end());
    starts.push_back(va);
    while (out.size() % 16 != 0 && out.size() < size) out.push_back(0xCC);
  }
  out.resize(size, 0xCC);
  return out;
}

}  // namespace packsense::codegen
