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

#include <algorithm>
#include <cmath>
#include <map>

#include "packsense/lowentropy.hpp"

namespace packsense::lowentropy {
namespace {

double oracle_entropy(const Bytes& b) {
  std::map<std::uint8_t, std::size_t> counts;
  for (auto x : b) ++counts[x];
  double h = 0;
  for (const auto& [k, c] : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(b.size());
    h -= p * std::log2(p);
  }
  return h;
}

Bytes random_bytes(std::size_t n, std::uint64_t seed) {
  Rng r(seed);
  Bytes b(n);
  for (auto& x : b) x = r.byte();
  return b;
}

TEST(Entropy, MatchesOracleAndBounds) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto b = random_bytes(1 + s * 37, s);
    EXPECT_NEAR(shannon_entropy(b), oracle_entropy(b), 1e-9);
  }
  Bytes uniform(256 * 3);
  for (std::size_t i = 0; i < uniform.size(); ++i) uniform[i] = static_cast<std::uint8_t>(i);
  EXPECT_EQ(shannon_entropy(uniform), 8.0);
  EXPECT_EQ(shannon_entropy(Bytes(1000, 0x41)), 0.0);
  EXPECT_THROW(shannon_entropy(Bytes{}), Error);
}

TEST(Profile, GranularitiesCoverTheImage) {
  const auto pe = binimage::write_pe32({{".text", random_bytes(5000, 1)}, {".data", Bytes(0x400, 0)}});
  const auto img = binimage::load_image(pe.bytes);

  const auto file = entropy_profile(img, Granularity::File);
  ASSERT_EQ(file.values.size(), 1u);

  const auto sec = entropy_profile(img, Granularity::Section);
  ASSERT_EQ(sec.values.size(), 2u);
  EXPECT_EQ(sec.values[1].entropy, 0.0);
  EXPECT_GT(sec.values[0].entropy, 7.5);

  const auto win = entropy_profile(img, Granularity::Window, 2048, 256);
  std::uint64_t first_section = 0;
  for (const auto& v : win.values) {
    if (v.extent.section == ".text") first_section += v.extent.length;
  }
  // 5000 bytes of .text (file size rounded to 0x200): 2048 + 2048 + tail.
  EXPECT_GE(first_section, 5000u);
}

TEST(Profile, ShortTailIsDropped) {
  const auto img = binimage::load_image(random_bytes(2048 + 100, 3));
  const auto win = entropy_profile(img, Granularity::Window, 2048, 256);
  EXPECT_EQ(win.values.size(), 1u);
  const auto kept = entropy_profile(img, Granularity::Window, 2048, 64);
  EXPECT_EQ(kept.values.size(), 2u);
}

TEST(Detect, ThresholdAndSectionFraction) {
  EntropyProfile p;
  p.granularity = Granularity::Section;
  p.section_count = 5;
  for (double e : {7.2, 3.0, 4.0, 2.0, 5.0}) p.values.push_back({{"s", 0, 10}, e});
  const auto any = entropy_detect(p);
  EXPECT_TRUE(any.packed);
  EXPECT_EQ(any.evidence.size(), 1u);
  EXPECT_DOUBLE_EQ(any.max_entropy, 7.2);
  DetectOptions frac;
  frac.section_fraction_rule = true;
  EXPECT_FALSE(entropy_detect(p, frac).packed);  // 1/5 is not above 20%
  p.values[1].entropy = 7.0;                    // at the threshold counts
  EXPECT_TRUE(entropy_detect(p, frac).packed);
  EXPECT_FALSE(entropy_detect(EntropyProfile{}).covered);
}

std::vector<TransformSpec> all_specs(std::size_t n) {
  return {make_padding(0xFF, 300), make_padding(0x41, 10, PadPosition::Prepend),
          make_padding(0xAA, 50, PadPosition::Inject, std::min<std::size_t>(123, n)), make_encoding(Alphabet::Base64),
          make_encoding(Alphabet::Base32), make_encoding(Alphabet::Custom, 5), make_monosub(6),
          make_transposition(7, 64), make_transposition(8, 256), make_polysub(9, 16)};
}

TEST(Transforms, RoundTripExactly) {
  for (std::size_t n : {1u, 2u, 3u, 255u, 1000u, 4099u}) {
    for (const auto& spec : all_specs(n)) {
      const auto in = random_bytes(n, n + static_cast<std::size_t>(spec.scheme));
      const auto r = transform(in, spec);
      EXPECT_EQ(invert_transform(r.output, r.metadata), in) << to_string(spec.scheme) << " n=" << n;
    }
  }
}

TEST(Transforms, SubstitutionAndTranspositionKeepTheHistogram) {
  const auto in = random_bytes(3000, 10);
  for (const auto& spec : {make_monosub(1), make_transposition(2, 100)}) {
    const auto out = transform(in, spec).output;
    auto h_in = histogram(in), h_out = histogram(out);
    std::sort(h_in.begin(), h_in.end());
    std::sort(h_out.begin(), h_out.end());
    EXPECT_EQ(h_in, h_out);
    EXPECT_EQ(shannon_entropy(in), shannon_entropy(out));
  }
}

TEST(Transforms, EncodingCapsEntropy) {
  const auto in = random_bytes(20000, 11);
  EXPECT_LE(shannon_entropy(transform(in, make_encoding(Alphabet::Base64)).output), 6.0);
  EXPECT_LE(shannon_entropy(transform(in, make_encoding(Alphabet::Base32)).output), 5.0);
}

TEST(Transforms, SpecJsonRoundTrips) {
  for (const auto& spec : all_specs(1000)) {
    const auto back = spec_from_json(spec_to_json(spec));
    EXPECT_EQ(spec_to_json(back), spec_to_json(spec));
  }
  EXPECT_THROW(spec_from_json(nlohmann::json{{"scheme", "Rot13"}}), Error);
}

TEST(Transforms, InvalidSpecsAreRejected) {
  auto s = make_monosub(1);
  s.substitution[0] = s.substitution[1];
  EXPECT_THROW(s.validate(), Error);
  auto t = make_transposition(1, 16);
  t.permutation[0] = t.permutation[1];
  EXPECT_THROW(t.validate(), Error);
  auto p = make_polysub(1, 4);
  p.key.clear();
  EXPECT_THROW(p.validate(), Error);
}

TEST(Transforms, CorruptMetadataIsRejected) {
  const auto in = random_bytes(100, 12);
  auto r = transform(in, make_transposition(3, 16));
  auto meta = r.metadata;
  meta.erase("spec");
  try {
    invert_transform(r.output, meta);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CorruptMetadata);
  }
}

TEST(Padding, NeededAmountIsMinimal) {
  const auto in = random_bytes(4096, 13);
  const auto n = padding_needed(in, 0x00, 7.0);
  auto padded = in;
  padded.insert(padded.end(), n, 0x00);
  EXPECT_LT(shannon_entropy(padded), 7.0);
  padded.pop_back();
  EXPECT_GE(shannon_entropy(padded), 7.0);
  EXPECT_EQ(padding_needed(Bytes(100, 0), 0x00, 7.0), 0u);
  EXPECT_THROW(padding_needed(in, 0x00, 1.0, 10), Error);
}

}  // namespace
}  // namespace packsense::lowentropy
