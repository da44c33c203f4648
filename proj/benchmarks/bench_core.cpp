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

#include <benchmark/benchmark.h>

#include "packsense/corpus.hpp"
#include "packsense/detect.hpp"
#include "packsense/disasm.hpp"
#include "packsense/encoder.hpp"
#include "packsense/lowentropy.hpp"
#include "packsense/normalizer.hpp"

namespace {

using namespace packsense;

Bytes random_buffer(std::size_t n, std::uint64_t seed) {
  Rng r(seed);
  Bytes b(n);
  for (auto& x : b) x = r.byte();
  return b;
}

Bytes fixture_code() {
  const auto& f = corpus::compiled_fixtures();
  return Bytes(f.front().second.begin(), f.front().second.end());
}

void BM_ShannonEntropy(benchmark::State& state) {
  const auto b = random_buffer(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(lowentropy::shannon_entropy(b));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_ShannonEntropy)->Arg(4096)->Arg(1 << 20);

void BM_LinearSweepRandom(benchmark::State& state) {
  const auto image = binimage::load_image(random_buffer(static_cast<std::size_t>(state.range(0)), 2),
                                          binimage::Format::RAW);
  for (auto _ : state) benchmark::DoNotOptimize(disasm::linear_sweep(image));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_LinearSweepRandom)->Arg(64 * 1024);

void BM_LinearSweepCode(benchmark::State& state) {
  const auto code = fixture_code();
  const auto image = binimage::load_image(code, binimage::Format::RAW);
  for (auto _ : state) benchmark::DoNotOptimize(disasm::linear_sweep(image));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * code.size()));
}
BENCHMARK(BM_LinearSweepCode);

void BM_ImageWindows(benchmark::State& state) {
  const auto image = binimage::load_image(fixture_code(), binimage::Format::RAW);
  for (auto _ : state) benchmark::DoNotOptimize(detect::image_windows(image));
}
BENCHMARK(BM_ImageWindows);

encoder::ModelConfig desk_config() {
  encoder::ModelConfig c;
  c.vocab_size = static_cast<int>(normalizer::default_vocabulary().size());
  return c;
}

std::vector<normalizer::TokenId> window_tokens(std::size_t n) {
  const auto image = binimage::load_image(fixture_code(), binimage::Format::RAW);
  auto ids = detect::image_windows(image).front().tokens.tokens;
  ids.resize(std::min(ids.size(), n));
  return ids;
}

void BM_ForwardFloat(benchmark::State& state) {
  const auto c = desk_config();
  const auto p = encoder::init_params<float>(c, 1);
  const auto ids = window_tokens(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(encoder::forward(ids, p, c).pooled);
}
BENCHMARK(BM_ForwardFloat)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_ClassifierStep(benchmark::State& state) {
  const auto c = desk_config();
  const auto p = encoder::init_params<float>(c, 1);
  auto grad = encoder::zero_params<float>(c);
  const auto ids = window_tokens(512);
  for (auto _ : state) {
    benchmark::DoNotOptimize(encoder::classifier_loss_and_grad<float>(ids, 1, p, c, &grad));
  }
}
BENCHMARK(BM_ClassifierStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
