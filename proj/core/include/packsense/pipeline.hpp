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

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "packsense/checkpoint.hpp"
#include "packsense/corpus.hpp"
#include "packsense/detect.hpp"
#include "packsense/encoder.hpp"

namespace packsense::pipeline {

using Logger = std::function<void(const std::string&)>;

/// Non-packed programs: real code interleaved with native data.
corpus::SyntheticRecipe native_recipe();
/// Real-code stub plus a high-entropy payload (random bytes).
corpus::SyntheticRecipe random_packed_recipe();
/// Stub plus MonoSub or Transposition of real code, kept below 7.0 bits/byte
/// over all section bytes.
corpus::SyntheticRecipe low_entropy_recipe();
/// Stub plus PolySub, Encoding or BytePadding payloads.
corpus::SyntheticRecipe mixed_packed_recipe();

/// Pretrain files are non-packed. Finetune and test files are split
/// 3:1:2:1 (roughly) over native, random, low-entropy and mixed recipes.
std::vector<corpus::CorpusPart> desk_plan(std::size_t pretrain, std::size_t finetune, std::size_t test);
std::vector<corpus::CorpusPart> low_entropy_plan(std::size_t count, corpus::Role role = corpus::Role::Test);

struct LabeledWindow {
  std::size_t entry = 0;  // index into the manifest
  detect::ImageWindow window;  // tokens.label holds the ground truth
};

/// Windows of every file whose role is in `roles`, labelled by the manifest.
std::vector<LabeledWindow> manifest_windows(const corpus::CorpusManifest& manifest, const std::string& root,
                                            std::span<const corpus::Role> roles);

checkpoint::Checkpoint pretrain_stage(const corpus::CorpusManifest& manifest, const std::string& root,
                                      const encoder::ModelConfig& config, const encoder::TrainHyper& hyper,
                                      const Logger& log = {});

struct FinetuneOptions {
  encoder::TrainHyper hyper;
  int knn_k = 5;
  /// Finetune files scanned to build the program classifier; 0 means all.
  std::size_t knn_files = 0;
};

/// Fine-tunes the classifier head on Finetune windows, then fits the KNN
/// program classifier on features of the model's own verdicts for Finetune
/// files and stores it in the checkpoint.
checkpoint::Checkpoint finetune_stage(const checkpoint::Checkpoint& pretrained, const corpus::CorpusManifest& manifest,
                                      const std::string& root, const FinetuneOptions& options, const Logger& log = {});

struct FileScan {
  std::vector<detect::RegionVerdict> verdicts;
  std::optional<detect::ProgramVerdict> program;  // absent when there are no windows
  std::optional<detect::Features> features;
};

/// Throws Error{UntrainedModel} when the checkpoint has no fine-tuned head or
/// no program classifier.
FileScan scan_image(const checkpoint::Checkpoint& ckpt, const binimage::BinaryImage& image);

struct Evaluation {
  nlohmann::json metrics;
  std::vector<std::size_t> files;  // manifest indices of the evaluated files
  std::vector<FileScan> scans;
};

/// Scores a checkpoint on the Test files of a manifest: window-level task A
/// (real vs pseudo instructions, pseudo positive) and task B (packed vs native
/// among pseudo windows, packed positive, decided by the larger of the two
/// probabilities), program-level KNN metrics, the File-granularity entropy
/// baseline at 7.0, and both detectors' recall on files packed only with
/// MonoSub or Transposition.
Evaluation evaluate_stage(const checkpoint::Checkpoint& ckpt, const corpus::CorpusManifest& manifest,
                          const std::string& root, const Logger& log = {});

/// True when the entry is packed and every packed region is MonoSub or Transposition.
bool is_low_entropy_packed(const corpus::ManifestEntry& entry);

}  // namespace packsense::pipeline
