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

#include <algorithm>
#include <cstring>

#include "packsense/binimage.hpp"

namespace packsense::binimage {

namespace {

constexpr std::uint32_t kFileAlign = 0x200;
constexpr std::uint32_t kSectionAlign = 0x1000;

std::uint32_t align_up(std::uint32_t v, std::uint32_t a) { return (v + a - 1) / a * a; }

template <typename T>
void put(Bytes& b, std::size_t off, T v) {
  std::memcpy(b.data() + off, &v, sizeof(T));
}

}  // namespace

PeFile write_pe32(const std::vector<PeSectionSpec>& sections, std::uint32_t image_base) {
  constexpr std::uint32_t kLfanew = 0x80;
  constexpr std::uint16_t kOptSize = 0xE0;
  const std::uint32_t table = kLfanew + 4 + 20 + kOptSize;
  const std::uint32_t headers_size = align_up(table + 40 * static_cast<std::uint32_t>(sections.size()), kFileAlign);

  PeFile pe;
  std::uint32_t raw = headers_size;
  std::uint32_t rva = kSectionAlign;
  for (const auto& s : sections) {
    PeLayout l;
    l.file_size = align_up(static_cast<std::uint32_t>(s.data.size()), kFileAlign);
    l.file_offset = l.file_size ? raw : 0;
    l.rva = rva;
    l.virtual_size = s.virtual_size ? s.virtual_size : static_cast<std::uint32_t>(s.data.size());
    raw += l.file_size;
    rva += align_up(std::max<std::uint32_t>(l.virtual_size, 1), kSectionAlign);
    pe.layout.push_back(l);
  }

  Bytes& b = pe.bytes;
  b.assign(raw, 0);
  b[0] = 'M';
  b[1] = 'Z';
  put<std::uint32_t>(b, 0x3C, kLfanew);
  std::memcpy(b.data() + kLfanew, "PE\0\0", 4);
  const std::size_t coff = kLfanew + 4;
  put<std::uint16_t>(b, coff + 0, 0x14C);  // i386
  put<std::uint16_t>(b, coff + 2, static_cast<std::uint16_t>(sections.size()));
  put<std::uint16_t>(b, coff + 16, kOptSize);
  put<std::uint16_t>(b, coff + 18, 0x0102);  // executable, 32-bit machine
  const std::size_t opt = coff + 20;
  put<std::uint16_t>(b, opt + 0, 0x10b);
  std::uint32_t code_size = 0;
  for (const auto& l : pe.layout) code_size += l.file_size;
  put<std::uint32_t>(b, opt + 4, code_size);
  put<std::uint32_t>(b, opt + 16, pe.layout.empty() ? 0 : pe.layout.front().rva);  // entry point
  put<std::uint32_t>(b, opt + 28, image_base);
  put<std::uint32_t>(b, opt + 32, kSectionAlign);
  put<std::uint32_t>(b, opt + 36, kFileAlign);
  put<std::uint16_t>(b, opt + 40, 4);  // OS version
  put<std::uint16_t>(b, opt + 48, 4);  // subsystem version
  put<std::uint32_t>(b, opt + 56, rva);  // SizeOfImage
  put<std::uint32_t>(b, opt + 60, headers_size);
  put<std::uint16_t>(b, opt + 68, 3);  // console subsystem
  put<std::uint32_t>(b, opt + 72, 0x100000);
  put<std::uint32_t>(b, opt + 76, 0x1000);
  put<std::uint32_t>(b, opt + 80, 0x100000);
  put<std::uint32_t>(b, opt + 84, 0x1000);
  put<std::uint32_t>(b, opt + 92, 16);  // data directory count

  for (std::size_t i = 0; i < sections.size(); ++i) {
    const std::size_t e = table + i * 40;
    const auto& s = sections[i];
    const auto& l = pe.layout[i];
    std::memcpy(b.data() + e, s.name.data(), std::min<std::size_t>(s.name.size(), 8));
    put<std::uint32_t>(b, e + 8, l.virtual_size);
    put<std::uint32_t>(b, e + 12, l.rva);
    put<std::uint32_t>(b, e + 16, l.file_size);
    put<std::uint32_t>(b, e + 20, l.file_offset);
    put<std::uint32_t>(b, e + 36, s.characteristics);
    if (!s.data.empty()) std::copy(s.data.begin(), s.data.end(), b.begin() + l.file_offset);
  }
  return pe;
}

}  // namespace packsense::binimage
