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
#include <cstdlib>
#include <vector>

#include "packsense/common.hpp"

namespace packsense {
namespace {

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformStaysInBounds) {
  Rng r(7);
  std::vector<int> seen(10, 0);
  for (int i = 0; i < 10000; ++i) {
    const auto v = r.uniform(10);
    ASSERT_LT(v, 10u);
    ++seen[v];
    const double u = r.uniform01();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
  for (int n : seen) EXPECT_GT(n, 800);
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng r(1);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  r.shuffle(std::span<int>(v));
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(Seeds, DerivationSeparatesStreams) {
  EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
  EXPECT_NE(derive_seed(1, 2), derive_seed(2, 2));
}

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(to_hex(sha256(std::string_view(""))),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(to_hex(sha256(std::string_view("abc"))),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(ParallelFor, ResultsIndependentOfThreadCount) {
  auto run = [](const char* threads) {
    setenv("PACKSENSE_THREADS", threads, 1);
    std::vector<std::uint64_t> out(1000);
    parallel_for(out.size(), [&](std::size_t i) { out[i] = Rng(derive_seed(9, i)).next_u64(); });
    unsetenv("PACKSENSE_THREADS");
    return out;
  };
  EXPECT_EQ(run("1"), run("4"));
}

TEST(WorkerCount, HonorsEnvironmentCap) {
  setenv("PACKSENSE_THREADS", "1", 1);
  EXPECT_EQ(worker_count(), 1u);
  unsetenv("PACKSENSE_THREADS");
  EXPECT_GE(worker_count(), 1u);
}

TEST(Labels, StringRoundTrip) {
  for (auto l : {RegionLabel::Instruction, RegionLabel::NativeData, RegionLabel::PackedData}) {
    EXPECT_EQ(region_label_from_string(to_string(l)), l);
  }
  try {
    region_label_from_string("Code");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidSpec);
  }
}

}  // namespace
}  // namespace packsense
