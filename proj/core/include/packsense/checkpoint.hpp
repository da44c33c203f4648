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

#include <map>
#include <string>

#include "packsense/encoder.hpp"

namespace packsense::checkpoint {

inline constexpr char kMagic[4] = {'P', 'A', 'L', 'M'};
inline constexpr std::uint32_t kVersion = 1;

struct Checkpoint {
  encoder::ModelConfig config;
  std::string vocab_hash;
  encoder::ModelParams<float> params;
  /// Additional named tensors (e.g. a program-level classifier).
  std::map<std::string, encoder::Mat<float>> extra;
};

/// Layout: magic, u32 version, u32 length + config JSON, u32 length + vocabulary
/// hash, u32 tensor count, then per tensor: u32 name length, name, u32 rank
/// (always 2), u64 rows, u64 cols, rows*cols little-endian float32 in row-major
/// order. All integers are little-endian.
Bytes serialize(const Checkpoint& ckpt);
/// Throws Error{CorruptMetadata} for malformed input and
/// Error{CheckpointMismatch} when expected_vocab_hash is non-empty and differs.
Checkpoint deserialize(ByteView bytes, const std::string& expected_vocab_hash);

void save(const std::string& path, const Checkpoint& ckpt);
Checkpoint load(const std::string& path, const std::string& expected_vocab_hash);

/// SHA-256 (hex) of the serialized form.
std::string hash(const Checkpoint& ckpt);

}  // namespace packsense::checkpoint
