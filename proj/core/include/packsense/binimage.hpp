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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "packsense/common.hpp"

namespace packsense::binimage {

enum class Format { PE, ELF, RAW };
enum class Bitness { x86_32, x86_64 };

std::string_view to_string(Format f);

/// Image base assigned to headerless inputs.
inline constexpr std::uint64_t kRawImageBase = 0x400000;

struct Section {
  std::string name;
  std::uint64_t file_offset = 0;
  std::uint64_t file_size = 0;
  std::uint64_t virtual_address = 0;  // absolute, image_base already applied
  std::uint64_t virtual_size = 0;
  ByteView bytes;  // view into the owning BinaryImage buffer
};

struct Interval {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;  // exclusive
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Sorted, disjoint set of half-open virtual address intervals.
class AddressRange {
 public:
  AddressRange() = default;
  /// Normalizes arbitrary intervals: drops empties, sorts, merges overlaps.
  explicit AddressRange(std::vector<Interval> intervals);

  bool contains(std::uint64_t address) const;
  const std::vector<Interval>& intervals() const { return intervals_; }
  bool empty() const { return intervals_.empty(); }
  /// Distance from the lowest to the highest valid address.
  std::uint64_t span() const;

 private:
  std::vector<Interval> intervals_;
};

/// Parsed executable. Immutable after load; copies share the underlying buffer.
class BinaryImage {
 public:
  Format format() const { return format_; }
  Bitness bitness() const { return bitness_; }
  std::uint64_t image_base() const { return image_base_; }
  std::uint64_t total_size() const { return buffer_ ? buffer_->size() : 0; }
  const std::vector<Section>& sections() const { return sections_; }
  ByteView bytes() const { return buffer_ ? ByteView(*buffer_) : ByteView(); }

 private:
  friend BinaryImage load_image(Bytes buffer, std::optional<Format> format_hint);

  Format format_ = Format::RAW;
  Bitness bitness_ = Bitness::x86_32;
  std::uint64_t image_base_ = kRawImageBase;
  std::vector<Section> sections_;
  std::shared_ptr<const Bytes> buffer_;
};

/// Parses PE or ELF headers when they validate; anything else becomes a RAW
/// image with one synthetic section at kRawImageBase. A format_hint of RAW skips
/// header detection. Throws Error{MalformedHeader} when a recognised header is
/// structurally broken (e.g. a section table running past the buffer) and
/// Error{EmptyInput} for an empty buffer.
BinaryImage load_image(Bytes buffer, std::optional<Format> format_hint = std::nullopt);
BinaryImage load_image_file(const std::string& path, std::optional<Format> format_hint = std::nullopt);

AddressRange valid_memory_range(const BinaryImage& image);

/// Sections in file order.
std::vector<Section> iter_sections(const BinaryImage& image);

// Minimal PE32 writer used by the corpus generator and fixtures.
struct PeSectionSpec {
  std::string name;
  Bytes data;
  std::uint32_t virtual_size = 0;  // 0 means data.size()
  std::uint32_t characteristics = 0x60000020;
};

struct PeLayout {
  std::uint32_t file_offset = 0;
  std::uint32_t file_size = 0;
  std::uint32_t rva = 0;
  std::uint32_t virtual_size = 0;
};

struct PeFile {
  Bytes bytes;
  std::vector<PeLayout> layout;  // one per input section, in order
};

/// Writes a PE32 image with the given sections; raw data is laid out
/// contiguously after the headers with 0x200 file alignment, virtual addresses
/// with 0x1000 section alignment.
PeFile write_pe32(const std::vector<PeSectionSpec>& sections, std::uint32_t image_base = 0x400000);

}  // namespace packsense::binimage
