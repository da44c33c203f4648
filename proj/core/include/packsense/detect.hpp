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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "packsense/binimage.hpp"
#include "packsense/encoder.hpp"
#include "packsense/normalizer.hpp"

namespace packsense::detect {

struct RegionVerdict {
  std::string section;
  std::uint64_t byte_start = 0;  // file offsets, half-open
  std::uint64_t byte_end = 0;
  std::size_t instruction_count = 0;
  std::array<double, 3> probs{};
  RegionLabel label = RegionLabel::Instruction;
};

struct ScanOptions {
  normalizer::InstructionWindowOptions windows;
};

/// Sweep, normalize, window and classify every section of the image. Verdicts
/// come back in file order. Throws Error{UntrainedModel} when the classifier
/// head was never fine-tuned.
std::vector<RegionVerdict> scan_regions(const binimage::BinaryImage& image, const encoder::ModelParams<float>& params,
                                        const encoder::ModelConfig& config, const ScanOptions& options = {});

/// Token window of every instruction window in the image, with extents. Shared by
/// scanning and by corpus-driven training.
struct ImageWindow {
  std::string section;
  normalizer::InstructionWindow extent;
  normalizer::TokenWindow tokens;
};
std::vector<ImageWindow> image_windows(const binimage::BinaryImage& image,
                                       const normalizer::InstructionWindowOptions& options = {});

inline constexpr std::size_t kFeatureCount = 32;
using Features = std::array<double, kFeatureCount>;

/// 27 trigram fractions (index a*9 + b*3 + c over label ids; sequences shorter
/// than 3 are padded with NativeData), then the three label fractions of the
/// unpadded sequence, the longest PackedData run divided by the sequence
/// length, and the number of label changes divided by max(length - 1, 1).
/// Throws Error{EmptyVerdicts}.
Features extract_features(const std::vector<RegionLabel>& labels);
Features extract_features(const std::vector<RegionVerdict>& verdicts);

enum class ProgramClass : int { NonPacked = 0, Packed = 1 };
std::string_view to_string(ProgramClass c);

struct KnnModel {
  int k = 5;
  std::vector<Features> points;
  std::vector<int> labels;
  bool trained() const { return !points.empty(); }
};

/// Stores the training set with identical (features, label) pairs merged, so
/// duplicating the whole set does not change any decision. Throws
/// Error{SingleClassDataset} and Error{InvalidSpec} for k that is not odd and positive.
KnnModel knn_train(const std::vector<std::pair<Features, ProgramClass>>& dataset, int k = 5);

struct ProgramVerdict {
  ProgramClass decision = ProgramClass::NonPacked;
  std::array<int, 2> votes{};
  std::vector<std::size_t> neighbors;  // indices into KnnModel::points, nearest first
  double packed_fraction = 0.0;        // share of PackedData windows
  std::vector<RegionVerdict> evidence;  // the PackedData windows
};

/// Majority vote among the k nearest points by Euclidean distance. Equal
/// distances are ordered by class index, then by training order; a tied vote
/// goes to the smaller class index. Throws Error{UntrainedModel}.
ProgramVerdict knn_classify(const KnnModel& model, const Features& features,
                            const std::vector<RegionVerdict>* verdicts = nullptr);

std::map<std::string, encoder::Mat<float>> knn_to_tensors(const KnnModel& model);
/// Empty optional when the tensors are absent. Features are stored as float32,
/// so a reloaded model sees float-rounded coordinates.
std::optional<KnnModel> knn_from_tensors(const std::map<std::string, encoder::Mat<float>>& tensors);
/// Rounds features to float32, matching what a checkpoint stores.
Features round_to_float(const Features& f);

struct Metrics {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total = 0, covered = 0;
  double precision = 0, recall = 0, f1 = 0, accuracy = 0;
  double tpr = 0, fpr = 0, tnr = 0, fnr = 0;
  double dcr = 0;  // detection coverage rate
  nlohmann::json to_json() const;
};

/// Binary metrics with `true` as the positive class. A missing prediction
/// (no verdict) counts as negative and lowers the coverage rate. Throws
/// Error{LengthMismatch}.
Metrics evaluate(const std::vector<std::optional<bool>>& predictions, const std::vector<bool>& truth);
Metrics evaluate(const std::vector<bool>& predictions, const std::vector<bool>& truth);

inline constexpr const char* kReportSchemaVersion = "1.0";

nlohmann::json make_report(const std::string& file, const std::string& sha256_hex,
                           const std::vector<RegionVerdict>& verdicts, const std::optional<ProgramVerdict>& program);

}  // namespace packsense::detect
