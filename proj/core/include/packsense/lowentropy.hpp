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
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "packsense/binimage.hpp"
#include "packsense/common.hpp"

namespace packsense::lowentropy {

// Shannon entropy in bits per byte, in [0, 8]. Throws Error{EmptyInput}.
double shannon_entropy(ByteView bytes);
double entropy_from_histogram(const std::array<std::uint64_t, 256>& histogram);
std::array<std::uint64_t, 256> histogram(ByteView bytes);

enum class Granularity { File, Section, Window };
std::string_view to_string(Granularity g);
Granularity granularity_from_string(std::string_view name);

inline constexpr double kThresholdStandard = 7.0;
inline constexpr double kThresholdLow = 6.5;
inline constexpr double kThresholdHigh = 7.4;
inline constexpr std::size_t kDefaultWindow = 2048;
inline constexpr std::size_t kTailFloor = 256;

struct Extent {
  std::string section;      // empty for File granularity
  std::uint64_t offset = 0;  // file offset
  std::uint64_t length = 0;
};

struct EntropyValue {
  Extent extent;
  double entropy = 0.0;
};

struct EntropyProfile {
  Granularity granularity = Granularity::File;
  std::size_t window_size = kDefaultWindow;
  std::size_t section_count = 0;  // sections with bytes, for the fraction rule
  std::vector<EntropyValue> values;
};

/// File: one value over all section bytes. Section: one value per non-empty
/// section. Window: non-overlapping windows per section; a shorter tail window
/// is kept when it has at least tail_floor bytes.
EntropyProfile entropy_profile(const binimage::BinaryImage& image, Granularity granularity,
                               std::size_t window_size = kDefaultWindow, std::size_t tail_floor = kTailFloor);

struct DetectOptions {
  double threshold = kThresholdStandard;
  /// Section granularity only: packed iff the fraction of sections at or above
  /// the threshold exceeds section_fraction.
  bool section_fraction_rule = false;
  double section_fraction = 0.20;
};

struct EntropyVerdict {
  bool packed = false;
  bool covered = false;  // false when the profile had nothing to judge
  double max_entropy = 0.0;
  std::vector<EntropyValue> evidence;  // values at or above the threshold
};

EntropyVerdict entropy_detect(const EntropyProfile& profile, const DetectOptions& options = {});

enum class Scheme { BytePadding, Encoding, MonoSub, Transposition, PolySub };
enum class PadPosition { Append, Prepend, Inject };
enum class Alphabet { Base64, Base32, Custom };

std::string_view to_string(Scheme s);
Scheme scheme_from_string(std::string_view name);

struct TransformSpec {
  Scheme scheme = Scheme::MonoSub;
  // BytePadding
  std::uint8_t pad_byte = 0;
  std::size_t pad_amount = 0;
  PadPosition pad_position = PadPosition::Append;
  std::size_t inject_offset = 0;
  // Encoding. The custom alphabet holds 64 distinct output symbols.
  Alphabet alphabet = Alphabet::Base64;
  Bytes custom_alphabet;
  // MonoSub: image of each byte value, a bijection.
  std::array<std::uint8_t, 256> substitution{};
  // Transposition: output[i] = input[permutation[i]] within each block.
  std::size_t block_size = 256;
  std::vector<std::uint32_t> permutation;
  // PolySub: cyclic key added modulo 256.
  Bytes key;
  /// Generator seed this TransformSpec was derived from, if any (lineage only).
  std::optional<std::uint64_t> seed;

  /// Throws Error{InvalidSpec} when the scheme's invariants do not hold.
  void validate() const;
};

TransformSpec make_padding(std::uint8_t pad_byte, std::size_t amount, PadPosition position = PadPosition::Append,
                           std::size_t inject_offset = 0);
TransformSpec make_encoding(Alphabet alphabet, std::uint64_t seed = 0);
TransformSpec make_monosub(std::uint64_t seed);
TransformSpec make_transposition(std::uint64_t seed, std::size_t block_size = 256);
TransformSpec make_polysub(std::uint64_t seed, std::size_t key_length = 16);

nlohmann::json spec_to_json(const TransformSpec& spec);
/// Throws Error{CorruptMetadata}.
TransformSpec spec_from_json(const nlohmann::json& j);

struct TransformResult {
  Bytes output;
  /// Everything invert_transform needs: the TransformSpec plus the input length.
  nlohmann::json metadata;
};

TransformResult transform(ByteView input, const TransformSpec& spec);
/// Throws Error{CorruptMetadata} for metadata that does not describe `output`.
Bytes invert_transform(ByteView output, const nlohmann::json& metadata);

/// Smallest number of appended pad_byte copies that brings the entropy strictly
/// below target. Throws Error{InvalidSpec} if max_amount is not enough.
std::size_t padding_needed(ByteView input, std::uint8_t pad_byte, double target,
                           std::size_t max_amount = std::size_t{1} << 30);

}  // namespace packsense::lowentropy
