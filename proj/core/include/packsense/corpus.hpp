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
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "packsense/common.hpp"
#include "packsense/lowentropy.hpp"

namespace packsense::corpus {

enum class Role { Pretrain, Finetune, Test };
enum class ProgramLabel { NonPacked, Packed };
enum class RealSource { CompiledFixture, DecodeSubsetSampler };
enum class NativeSource { Strings, Tables, ZeroPad };
enum class PackedSource { RandomBytes, MonoSub, PolySub, Transposition, Encoding, Padding };
enum class Container { Raw, Pe };

std::string_view to_string(Role r);
std::string_view to_string(ProgramLabel p);
std::string_view to_string(RealSource s);
std::string_view to_string(NativeSource s);
std::string_view to_string(PackedSource s);
/// The *_from_string parsers throw Error{InvalidRecipe}.
Role role_from_string(std::string_view s);
RealSource real_source_from_string(std::string_view s);
NativeSource native_source_from_string(std::string_view s);
PackedSource packed_source_from_string(std::string_view s);

/// One segment of the layout. Its length is drawn uniformly from
/// [min_length, max_length] in steps of kSegmentQuantum; the source is drawn
/// from the recipe's list for the segment's kind.
struct SegmentPlan {
  RegionLabel kind = RegionLabel::Instruction;
  std::size_t min_length = 0x400;
  std::size_t max_length = 0x400;
};

inline constexpr std::size_t kSegmentQuantum = 0x200;

struct SyntheticRecipe {
  std::string name;
  std::vector<RealSource> real_sources{RealSource::CompiledFixture, RealSource::DecodeSubsetSampler};
  std::vector<NativeSource> native_sources{NativeSource::Strings, NativeSource::Tables, NativeSource::ZeroPad};
  std::vector<PackedSource> packed_sources{PackedSource::RandomBytes};
  std::vector<SegmentPlan> layout;
  /// Shuffle the layout order per file (the first segment stays first).
  bool shuffle_layout = false;
  /// Containers to draw from per file.
  std::vector<Container> containers{Container::Raw, Container::Pe};
  /// When set, a ZeroPad segment is appended if the entropy over all section
  /// bytes would otherwise reach this ceiling.
  std::optional<double> entropy_ceiling;

  /// Throws Error{InvalidRecipe}.
  void validate() const;
  nlohmann::json to_json() const;
  static SyntheticRecipe from_json(const nlohmann::json& j);
};

/// A labelled byte range of a file; ranges of an entry tile its sections.
struct Region {
  std::string section;
  std::uint64_t start = 0;  // file offsets, half-open
  std::uint64_t end = 0;
  RegionLabel label = RegionLabel::Instruction;
  /// Generator provenance: the source name and, for transforms, the TransformSpec.
  std::string source;
  std::optional<std::uint64_t> seed;
  std::optional<nlohmann::json> transform;
};

struct ManifestEntry {
  std::string path;  // relative to the corpus root
  std::string sha256;
  Role role = Role::Pretrain;
  ProgramLabel program_label = ProgramLabel::NonPacked;
  std::string recipe;
  std::vector<Region> regions;
  std::optional<nlohmann::json> transform;  // first transformed payload, if any
  std::uint64_t seed = 0;
  /// Set for derived files (gen-adversarial); the lineage rule uses it.
  std::optional<std::string> parent_sha256;

  nlohmann::json to_json() const;
  static ManifestEntry from_json(const nlohmann::json& j);
};

struct CorpusManifest {
  std::vector<ManifestEntry> entries;
};

inline constexpr const char* kManifestSchemaVersion = "1.0";

/// JSON lines; the first line is a header object {"schema_version", "kind"}.
void write_manifest(const std::string& path, const CorpusManifest& manifest);
/// Throws Error{CorruptMetadata} or Error{Io}.
CorpusManifest read_manifest(const std::string& path);

struct CorpusPart {
  SyntheticRecipe recipe;
  Role role = Role::Pretrain;
  std::size_t count = 0;
};

struct GeneratedFile {
  Bytes bytes;
  ManifestEntry entry;  // path left empty
};

/// Builds one file from a recipe. Deterministic in (recipe, seed).
GeneratedFile generate_file(const SyntheticRecipe& recipe, std::uint64_t seed);

/// Writes every part's files under root/<role>/ and returns the manifest (also
/// written to root/manifest.jsonl). Files are generated in parallel; the result
/// is byte-identical for the same parts and seed. Throws Error{InvalidRecipe}.
CorpusManifest generate_corpus(const std::vector<CorpusPart>& parts, std::uint64_t seed, const std::string& root);

struct Violation {
  std::string rule;  // "sha256" or "lineage"
  std::string message;
  std::vector<std::string> paths;
};

/// Role-disjointness by sha256 and by lineage (a derived file in a different
/// train/test side than its parent, or a generator seed that appears on both
/// sides). Empty result means the split is clean.
std::vector<Violation> split_check(const CorpusManifest& manifest);

/// Majority ground-truth label over [start, end); ties go to the larger label
/// index. Empty optional when no region overlaps the range.
std::optional<RegionLabel> label_for_extent(const ManifestEntry& entry, std::uint64_t start, std::uint64_t end);

/// Compiled real-code fixtures embedded in the library: (name, .text bytes).
const std::vector<std::pair<std::string_view, ByteView>>& compiled_fixtures();

}  // namespace packsense::corpus
