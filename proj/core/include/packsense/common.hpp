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
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace packsense {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

enum class ErrorKind {
  MalformedHeader,
  EmptyInput,
  InvalidSpec,
  CorruptMetadata,
  PlanMismatch,
  NoTargets,
  ShapeMismatch,
  UntrainedHead,
  UntrainedModel,
  EmptyCorpus,
  MissingLabels,
  EmptyVerdicts,
  SingleClassDataset,
  LengthMismatch,
  InvalidRecipe,
  CheckpointMismatch,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Ground-truth and predicted class of a code region.
enum class RegionLabel : std::uint8_t { Instruction = 0, NativeData = 1, PackedData = 2 };
inline constexpr int kRegionLabelCount = 3;
std::string_view to_string(RegionLabel label);
/// Inverse of to_string; throws Error{InvalidSpec} for unknown names.
RegionLabel region_label_from_string(std::string_view name);

// All library failures surface as this exception; kind() identifies the contract
// violation so callers and tests can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Seeded generator used everywhere randomness is needed. Wraps mt19937_64 but
/// derives bounded integers and reals itself so streams are identical across
/// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t uniform(std::uint64_t bound);
  /// Uniform double in [0, 1).
  double uniform01();
  double normal(double mean, double stddev);
  std::uint8_t byte() { return static_cast<std::uint8_t>(next_u64() >> 56); }

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = uniform(i);
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// splitmix64 finalizer; used to derive subsystem seeds from the root seed.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0);

using Sha256Digest = std::array<std::uint8_t, 32>;
Sha256Digest sha256(ByteView data);
Sha256Digest sha256(std::string_view text);
std::string to_hex(ByteView data);
inline std::string to_hex(const Sha256Digest& d) { return to_hex(ByteView(d.data(), d.size())); }

Bytes read_file(const std::string& path);
void write_file(const std::string& path, ByteView data);

/// Worker count honoring PACKSENSE_THREADS; at least 1.
unsigned worker_count();

/// Runs fn(i) for i in [0, n) on up to worker_count() threads. Work is assigned
/// by index, so results written per index do not depend on the thread count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn);

}  // namespace packsense

#include "packsense/detail/parallel.hpp"
