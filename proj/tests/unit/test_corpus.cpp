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

#include "packsense/corpus.hpp"
#include "packsense/lowentropy.hpp"
#include "packsense/pipeline.hpp"

namespace packsense::corpus {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("packsense_" + name);
  fs::remove_all(p);
  return p;
}

// Regions must tile every section's bytes exactly.
void expect_tiling(const GeneratedFile& g) {
  const auto img = binimage::load_image(g.bytes);
  for (const auto& s : img.sections()) {
    std::vector<const Region*> in;
    for (const auto& r : g.entry.regions) {
      if (r.section == s.name) in.push_back(&r);
    }
    ASSERT_FALSE(in.empty()) << s.name;
    std::sort(in.begin(), in.end(), [](auto a, auto b) { return a->start < b->start; });
    std::uint64_t next = s.file_offset;
    for (auto* r : in) {
      EXPECT_EQ(r->start, next);
      EXPECT_LT(r->start, r->end);
      next = r->end;
    }
    EXPECT_EQ(next, s.file_offset + s.file_size);
  }
}

TEST(GenerateFile, DeterministicAndTiled) {
  for (const auto& recipe : {pipeline::native_recipe(), pipeline::random_packed_recipe(),
                             pipeline::low_entropy_recipe(), pipeline::mixed_packed_recipe()}) {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
      SCOPED_TRACE(recipe.name + " seed " + std::to_string(seed));
      const auto a = generate_file(recipe, seed);
      const auto b = generate_file(recipe, seed);
      EXPECT_EQ(a.bytes, b.bytes);
      EXPECT_EQ(a.entry.sha256, to_hex(sha256(a.bytes)));
      expect_tiling(a);
      const bool packed = std::any_of(a.entry.regions.begin(), a.entry.regions.end(),
                                      [](const Region& r) { return r.label == RegionLabel::PackedData; });
      EXPECT_EQ(packed, a.entry.program_label == ProgramLabel::Packed);
    }
  }
}

TEST(GenerateFile, EntropyCeilingHolds) {
  const auto recipe = pipeline::low_entropy_recipe();
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto g = generate_file(recipe, seed);
    const auto img = binimage::load_image(g.bytes);
    const auto p = lowentropy::entropy_profile(img, lowentropy::Granularity::File);
    EXPECT_LT(p.values.at(0).entropy, 7.0);
  }
}

TEST(Recipe, JsonRoundTripAndValidation) {
  const auto r = pipeline::mixed_packed_recipe();
  EXPECT_EQ(SyntheticRecipe::from_json(r.to_json()).to_json(), r.to_json());
  auto bad = r;
  bad.layout.clear();
  try {
    bad.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidRecipe);
  }
  bad = r;
  bad.layout[0].min_length = 0x300;
  bad.layout[0].max_length = 0x200;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Corpus, ManifestRoundTripAndDeterminism) {
  const auto a = scratch("corpus_a"), b = scratch("corpus_b");
  const auto plan = pipeline::desk_plan(4, 10, 10);
  const auto ma = generate_corpus(plan, 77, a.string());
  const auto mb = generate_corpus(plan, 77, b.string());
  ASSERT_EQ(ma.entries.size(), 24u);
  for (std::size_t i = 0; i < ma.entries.size(); ++i) {
    EXPECT_EQ(ma.entries[i].sha256, mb.entries[i].sha256);
    EXPECT_EQ(to_hex(sha256(read_file((a / ma.entries[i].path).string()))), ma.entries[i].sha256);
  }
  const auto back = read_manifest((a / "manifest.jsonl").string());
  ASSERT_EQ(back.entries.size(), ma.entries.size());
  for (std::size_t i = 0; i < back.entries.size(); ++i) {
    EXPECT_EQ(back.entries[i].to_json(), ma.entries[i].to_json());
  }
  EXPECT_TRUE(split_check(ma).empty());
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Manifest, CorruptLinesAreRejected) {
  const auto dir = scratch("manifest_bad");
  fs::create_directories(dir);
  const auto path = (dir / "manifest.jsonl").string();
  const std::string text = "{\"schema_version\":\"1.0\",\"kind\":\"packsense-manifest\"}\n{\"path\": 3}\n";
  write_file(path, ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  try {
    read_manifest(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CorruptMetadata);
  }
  EXPECT_THROW(read_manifest((dir / "missing.jsonl").string()), Error);
  fs::remove_all(dir);
}

ManifestEntry entry(const std::string& path, const std::string& sha, Role role, std::uint64_t seed) {
  ManifestEntry e;
  e.path = path;
  e.sha256 = sha;
  e.role = role;
  e.seed = seed;
  return e;
}

TEST(SplitCheck, FlagsLeaks) {
  CorpusManifest m;
  m.entries = {entry("a", "s1", Role::Pretrain, 1), entry("b", "s2", Role::Test, 2)};
  EXPECT_TRUE(split_check(m).empty());

  auto dup = m;
  dup.entries.push_back(entry("c", "s1", Role::Test, 3));
  auto v = split_check(dup);
  ASSERT_FALSE(v.empty());
  EXPECT_EQ(v[0].rule, "sha256");

  auto derived = m;
  auto child = entry("d", "s4", Role::Test, 4);
  child.parent_sha256 = "s1";
  derived.entries.push_back(child);
  v = split_check(derived);
  ASSERT_FALSE(v.empty());
  EXPECT_EQ(v[0].rule, "lineage");

  auto reseeded = m;
  reseeded.entries.push_back(entry("e", "s5", Role::Test, 1));
  EXPECT_FALSE(split_check(reseeded).empty());

  // Pretrain and Finetune sit on the same side.
  auto same_side = m;
  auto sibling = entry("f", "s6", Role::Finetune, 6);
  sibling.parent_sha256 = "s1";
  same_side.entries.push_back(sibling);
  EXPECT_TRUE(split_check(same_side).empty());
}

TEST(LabelForExtent, MajorityByOverlap) {
  ManifestEntry e;
  e.regions = {{"raw", 0, 100, RegionLabel::Instruction, "x", {}, {}},
               {"raw", 100, 150, RegionLabel::NativeData, "x", {}, {}},
               {"raw", 150, 300, RegionLabel::PackedData, "x", {}, {}}};
  EXPECT_EQ(label_for_extent(e, 0, 120), RegionLabel::Instruction);
  EXPECT_EQ(label_for_extent(e, 90, 200), RegionLabel::PackedData);
  EXPECT_EQ(label_for_extent(e, 125, 175), RegionLabel::PackedData);  // 25 vs 25: larger index
  EXPECT_FALSE(label_for_extent(e, 400, 500).has_value());
}

TEST(Fixtures, CompiledFixturesAreEmbedded) {
  const auto& f = compiled_fixtures();
  ASSERT_GE(f.size(), 6u);
  for (const auto& [name, bytes] : f) EXPECT_GT(bytes.size(), 1000u) << name;
}

}  // namespace
}  // namespace packsense::corpus
