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

#include "packsense/binimage.hpp"

#include <algorithm>
#include <cstring>

namespace packsense::binimage {

std::string_view to_string(Format f) {
  switch (f) {
    case Format::PE: return "PE";
    case Format::ELF: return "ELF";
    case Format::RAW: return "RAW";
  }
  return "RAW";
}

AddressRange::AddressRange(std::vector<Interval> intervals) {
  std::erase_if(intervals, [](const Interval& i) { return i.hi <= i.lo; });
  std::sort(intervals.begin(), intervals.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  for (const auto& iv : intervals) {
    if (!intervals_.empty() && iv.lo <= intervals_.back().hi) {
      intervals_.back().hi = std::max(intervals_.back().hi, iv.hi);
    } else {
      intervals_.push_back(iv);
    }
  }
}

bool AddressRange::contains(std::uint64_t address) const {
  auto it = std::upper_bound(intervals_.begin(), intervals_.end(), address,
                             [](std::uint64_t a, const Interval& iv) { return a < iv.lo; });
  if (it == intervals_.begin()) return false;
  --it;
  return address < it->hi;
}

std::uint64_t AddressRange::span() const {
  if (intervals_.empty()) return 0;
  return intervals_.back().hi - intervals_.front().lo;
}

namespace {

template <typename T>
T read_le(ByteView b, std::size_t off) {
  T v{};
  std::memcpy(&v, b.data() + off, sizeof(T));  // x86 hosts only; little-endian
  return v;
}

bool has(ByteView b, std::size_t off, std::size_t len) {
  return off <= b.size() && len <= b.size() - off;
}

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorKind::MalformedHeader, what); }

// Trims raw ranges to the buffer and removes file-range overlap with earlier
// sections so that section byte views never alias.
void clamp_file_ranges(std::vector<Section>& sections, std::size_t buffer_size) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> taken;
  for (auto& s : sections) {
    if (s.file_offset > buffer_size) {
      s.file_offset = buffer_size;
      s.file_size = 0;
    }
    s.file_size = std::min<std::uint64_t>(s.file_size, buffer_size - s.file_offset);
    std::uint64_t lo = s.file_offset;
    std::uint64_t hi = s.file_offset + s.file_size;
    for (const auto& [tlo, thi] : taken) {
      if (lo < thi && tlo < hi) {
        if (tlo <= lo) lo = std::min(thi, hi);
        else hi = tlo;
      }
    }
    if (hi < lo) hi = lo;
    s.file_offset = lo;
    s.file_size = hi - lo;
    if (s.file_size > 0) taken.emplace_back(lo, hi);
  }
}

bool parse_pe(ByteView b, Format& fmt, Bitness& bits, std::uint64_t& base,
              std::vector<Section>& sections) {
  if (!has(b, 0, 0x40) || b[0] != 'M' || b[1] != 'Z') return false;
  const auto lfanew = read_le<std::uint32_t>(b, 0x3C);
  if (!has(b, lfanew, 4) || std::memcmp(b.data() + lfanew, "PE\0\0", 4) != 0) return false;
  const std::size_t coff = lfanew + 4;
  if (!has(b, coff, 20)) malformed("truncated COFF header");
  const auto nsections = read_le<std::uint16_t>(b, coff + 2);
  const auto opt_size = read_le<std::uint16_t>(b, coff + 16);
  const std::size_t opt = coff + 20;
  if (!has(b, opt, 2)) malformed("truncated optional header");
  const auto magic = read_le<std::uint16_t>(b, opt);
  if (magic == 0x10b) {
    if (opt_size < 32 || !has(b, opt, 32)) malformed("truncated PE32 optional header");
    base = read_le<std::uint32_t>(b, opt + 28);
    bits = Bitness::x86_32;
  } else if (magic == 0x20b) {
    if (opt_size < 32 || !has(b, opt, 32)) malformed("truncated PE32+ optional header");
    base = read_le<std::uint64_t>(b, opt + 24);
    bits = Bitness::x86_64;
  } else {
    malformed("unknown optional header magic");
  }
  const std::size_t table = opt + opt_size;
  if (!has(b, table, static_cast<std::size_t>(nsections) * 40)) malformed("section table past end of buffer");
  for (std::size_t i = 0; i < nsections; ++i) {
    const std::size_t e = table + i * 40;
    Section s;
    const char* name = reinterpret_cast<const char*>(b.data() + e);
    s.name.assign(name, strnlen(name, 8));
    const auto vsize = read_le<std::uint32_t>(b, e + 8);
    const auto rva = read_le<std::uint32_t>(b, e + 12);
    const auto raw_size = read_le<std::uint32_t>(b, e + 16);
    const auto raw_ptr = read_le<std::uint32_t>(b, e + 20);
    s.file_offset = raw_ptr;
    s.file_size = raw_ptr == 0 ? 0 : raw_size;
    s.virtual_address = base + rva;
    s.virtual_size = vsize == 0 ? raw_size : vsize;
    sections.push_back(std::move(s));
  }
  fmt = Format::PE;
  return true;
}

bool parse_elf(ByteView b, Format& fmt, Bitness& bits, std::uint64_t& base, std::vector<Section>& sections) {
  if (!has(b, 0, 16) || std::memcmp(b.data(), "\x7f" "ELF", 4) != 0) return false;
  const std::uint8_t cls = b[4];
  if (cls != 1 && cls != 2) malformed("bad ELF class");
  if (b[5] != 1) malformed("only little-endian ELF is supported");
  const bool is64 = cls == 2;
  if (!has(b, 0, is64 ? 64 : 52)) malformed("truncated ELF header");
  bits = is64 ? Bitness::x86_64 : Bitness::x86_32;
  const std::uint64_t shoff = is64 ? read_le<std::uint64_t>(b, 0x28) : read_le<std::uint32_t>(b, 0x20);
  const std::uint64_t phoff = is64 ? read_le<std::uint64_t>(b, 0x20) : read_le<std::uint32_t>(b, 0x1C);
  const std::uint16_t phentsize = read_le<std::uint16_t>(b, is64 ? 0x36 : 0x2A);
  const std::uint16_t phnum = read_le<std::uint16_t>(b, is64 ? 0x38 : 0x2C);
  const std::uint16_t shentsize = read_le<std::uint16_t>(b, is64 ? 0x3A : 0x2E);
  const std::uint16_t shnum = read_le<std::uint16_t>(b, is64 ? 0x3C : 0x30);
  const std::uint16_t shstrndx = read_le<std::uint16_t>(b, is64 ? 0x3E : 0x32);

  if (shnum > 0) {
    if (shentsize < (is64 ? 64 : 40) || !has(b, shoff, static_cast<std::size_t>(shnum) * shentsize)) {
      malformed("section header table past end of buffer");
    }
    auto field = [&](std::size_t e, std::size_t off32, std::size_t off64) -> std::uint64_t {
      return is64 ? read_le<std::uint64_t>(b, e + off64) : read_le<std::uint32_t>(b, e + off32);
    };
    std::uint64_t strtab_off = 0, strtab_size = 0;
    if (shstrndx < shnum) {
      const std::size_t e = shoff + static_cast<std::size_t>(shstrndx) * shentsize;
      strtab_off = field(e, 0x10, 0x18);
      strtab_size = field(e, 0x14, 0x20);
      if (!has(b, strtab_off, strtab_size)) strtab_size = 0;
    }
    for (std::size_t i = 1; i < shnum; ++i) {
      const std::size_t e = shoff + i * shentsize;
      const auto type = read_le<std::uint32_t>(b, e + 4);
      const std::uint64_t flags = field(e, 0x08, 0x08);
      constexpr std::uint64_t kAlloc = 0x2;
      constexpr std::uint32_t kProgbits = 1, kNobits = 8;
      if (!(flags & kAlloc) || (type != kProgbits && type != kNobits)) continue;
      Section s;
      const auto name_off = read_le<std::uint32_t>(b, e);
      if (name_off < strtab_size) {
        const char* p = reinterpret_cast<const char*>(b.data() + strtab_off + name_off);
        s.name.assign(p, strnlen(p, strtab_size - name_off));
      }
      s.virtual_address = field(e, 0x0C, 0x10);
      s.file_offset = field(e, 0x10, 0x18);
      const std::uint64_t size = field(e, 0x14, 0x20);
      s.virtual_size = size;
      s.file_size = type == kNobits ? 0 : size;
      sections.push_back(std::move(s));
    }
  } else {
    // Stripped section headers: fall back to PT_LOAD segments.
    if (phnum > 0 && (phentsize < (is64 ? 56 : 32) || !has(b, phoff, static_cast<std::size_t>(phnum) * phentsize))) {
      malformed("program header table past end of buffer");
    }
    for (std::size_t i = 0; i < phnum; ++i) {
      const std::size_t e = phoff + i * phentsize;
      if (read_le<std::uint32_t>(b, e) != 1) continue;
      Section s;
      s.name = "load" + std::to_string(i);
      if (is64) {
        s.file_offset = read_le<std::uint64_t>(b, e + 0x08);
        s.virtual_address = read_le<std::uint64_t>(b, e + 0x10);
        s.file_size = read_le<std::uint64_t>(b, e + 0x20);
        s.virtual_size = read_le<std::uint64_t>(b, e + 0x28);
      } else {
        s.file_offset = read_le<std::uint32_t>(b, e + 0x04);
        s.virtual_address = read_le<std::uint32_t>(b, e + 0x08);
        s.file_size = read_le<std::uint32_t>(b, e + 0x10);
        s.virtual_size = read_le<std::uint32_t>(b, e + 0x14);
      }
      sections.push_back(std::move(s));
    }
  }
  base = 0;
  bool first = true;
  for (const auto& s : sections) {
    if (s.virtual_address == 0) continue;
    base = first ? s.virtual_address : std::min(base, s.virtual_address);
    first = false;
  }
  base &= ~std::uint64_t{0xFFF};
  fmt = Format::ELF;
  return true;
}

}  // namespace

BinaryImage load_image(Bytes buffer, std::optional<Format> format_hint) {
  if (buffer.empty()) throw Error(ErrorKind::EmptyInput, "empty buffer");
  BinaryImage img;
  img.buffer_ = std::make_shared<const Bytes>(std::move(buffer));
  const ByteView b(*img.buffer_);

  Format fmt = Format::RAW;
  Bitness bits = Bitness::x86_32;
  std::uint64_t base = kRawImageBase;
  std::vector<Section> sections;
  bool parsed = false;
  if (!format_hint || *format_hint == Format::PE) parsed = parse_pe(b, fmt, bits, base, sections);
  if (!parsed && (!format_hint || *format_hint == Format::ELF)) parsed = parse_elf(b, fmt, bits, base, sections);
  if (!parsed) {
    fmt = Format::RAW;
    bits = Bitness::x86_32;
    base = kRawImageBase;
    sections.clear();
    Section s;
    s.name = "raw";
    s.file_offset = 0;
    s.file_size = b.size();
    s.virtual_address = base;
    s.virtual_size = b.size();
    sections.push_back(std::move(s));
  }
  clamp_file_ranges(sections, b.size());
  for (auto& s : sections) s.bytes = b.subspan(s.file_offset, s.file_size);

  img.format_ = fmt;
  img.bitness_ = bits;
  img.image_base_ = base;
  img.sections_ = std::move(sections);
  return img;
}

BinaryImage load_image_file(const std::string& path, std::optional<Format> format_hint) {
  return load_image(read_file(path), format_hint);
}

AddressRange valid_memory_range(const BinaryImage& image) {
  const std::uint64_t base = image.image_base();
  if (image.format() == Format::RAW) return AddressRange({{base, base + image.total_size()}});
  std::uint64_t end = base;
  for (const auto& s : image.sections()) {
    end = std::max(end, s.virtual_address + std::max(s.virtual_size, s.file_size));
  }
  if (end == base) end = base + image.total_size();
  return AddressRange({{base, end}});
}

std::vector<Section> iter_sections(const BinaryImage& image) {
  // Sections without file bytes keep their position behind the preceding section.
  std::vector<std::pair<std::uint64_t, Section>> keyed;
  std::uint64_t key = 0;
  for (const auto& s : image.sections()) {
    if (s.file_size > 0) key = s.file_offset;
    keyed.emplace_back(key, s);
  }
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Section> out;
  out.reserve(keyed.size());
  for (auto& [k, s] : keyed) out.push_back(std::move(s));
  return out;
}

}  // namespace packsense::binimage
