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

#include "packsense/common.hpp"

#include <algorithm>
#include <thread>

#include <openssl/evp.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <numbers>

namespace packsense {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedHeader: return "MalformedHeader";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::CorruptMetadata: return "CorruptMetadata";
    case ErrorKind::PlanMismatch: return "PlanMismatch";
    case ErrorKind::NoTargets: return "NoTargets";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::UntrainedHead: return "UntrainedHead";
    case ErrorKind::UntrainedModel: return "UntrainedModel";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::MissingLabels: return "MissingLabels";
    case ErrorKind::EmptyVerdicts: return "EmptyVerdicts";
    case ErrorKind::SingleClassDataset: return "SingleClassDataset";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::InvalidRecipe: return "InvalidRecipe";
    case ErrorKind::CheckpointMismatch: return "CheckpointMismatch";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

std::string_view to_string(RegionLabel label) {
  switch (label) {
    case RegionLabel::Instruction: return "Instruction";
    case RegionLabel::NativeData: return "NativeData";
    case RegionLabel::PackedData: return "PackedData";
  }
  return "Unknown";
}

RegionLabel region_label_from_string(std::string_view name) {
  for (int i = 0; i < kRegionLabelCount; ++i) {
    auto l = static_cast<RegionLabel>(i);
    if (to_string(l) == name) return l;
  }
  throw Error(ErrorKind::InvalidSpec, "unknown region label '" + std::string(name) + "'");
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

std::uint64_t Rng::next_u64() { return engine_(); }

std::uint64_t Rng::uniform(std::uint64_t bound) {
  // Lemire's multiply-and-reject; unbiased.
  std::uint64_t x = next_u64();
  unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      x = next_u64();
      m = static_cast<unsigned __int128>(x) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double Rng::uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal(double mean, double stddev) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + stddev * spare_;
  }
  double u1 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return mean + stddev * r * std::cos(theta);
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(mix64(root) ^ a) ^ (b * 0x9e3779b97f4a7c15ULL));
}

Sha256Digest sha256(ByteView data) {
  Sha256Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != out.size()) {
    throw Error(ErrorKind::Io, "sha256 digest failed");
  }
  return out;
}

Sha256Digest sha256(std::string_view text) {
  return sha256(ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string to_hex(ByteView data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(data.size() * 2);
  for (auto b : data) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0xF]);
  }
  return s;
}

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, ByteView data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorKind::Io, "short write to " + path);
}

unsigned worker_count() {
  unsigned n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (const char* env = std::getenv("PACKSENSE_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap > 0) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

}  // namespace packsense
