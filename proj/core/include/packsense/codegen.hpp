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

#include "packsense/binimage.hpp"
#include "packsense/common.hpp"

namespace packsense::codegen {

struct CodegenOptions {
  std::uint64_t base_va = binimage::kRawImageBase;
  /// Absolute memory operands point into [data_lo, data_hi). Empty means base_va.
  std::uint64_t data_lo = 0;
  std::uint64_t data_hi = 0;
};

/// Emits exactly `size` bytes of 32-bit code shaped like unoptimized compiler
/// output: frame-pointer prologues and epilogues, stack-slot loads and stores,
/// ALU ops, calls between generated functions, and conditional branches that
/// stay inside their function. Functions are aligned to 16 with int3 filler;
/// the tail that cannot hold a whole function is int3 as well.
Bytes generate_code(Rng& rng, std::size_t size, const CodegenOptions& options = {});

}  // namespace packsense::codegen
