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

#include "packsense/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "packsense/lowentropy.hpp"

namespace packsense::pipeline {

namespace {

using corpus::CorpusPart;
using corpus::PackedSource;
using corpus::Role;
using corpus::SegmentPlan;
using corpus::SyntheticRecipe;

void emit(const Logger& log, const std::string& line) {
  if (log) log(line);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

SyntheticRecipe packed_recipe(std::string name, std::vector<PackedSource> sources) {
  SyntheticRecipe r;
  r.name = std::move(name);
  r.packed_sources = std::move(sources);
  r.layout = {{RegionLabel::Instruction, 0x200, 0x400},
              {RegionLabel::PackedData, 0x400, 0xA00},
              {RegionLabel::NativeData, 0x200, 0x400}};
  r.shuffle_layout = true;
  return r;
}

std::string file_path(const std::string& root, const corpus::ManifestEntry& e) {
  return (std::filesystem::path(root) / e.path).string();
}

detect::KnnModel stored_knn(const checkpoint::Checkpoint& ckpt) {
  auto knn = detect::knn_from_tensors(ckpt.extra);
  if (!knn) throw Error(ErrorKind::UntrainedModel, "checkpoint has no program classifier");
  return *knn;
}

FileScan scan_with(const checkpoint::Checkpoint& ckpt, const detect::KnnModel& knn, const binimage::BinaryImage& image) {
  FileScan out;
  out.verdicts = detect::scan_regions(image, ckpt.params, ckpt.config);
  if (out.verdicts.empty()) return out;
  out.features = detect::extract_features(out.verdicts);
  out.program = detect::knn_classify(knn, *out.features, &out.verdicts);
  return out;
}

std::vector<normalizer::TokenWindow> tokens_of(std::vector<LabeledWindow>& windows) {
  std::vector<normalizer::TokenWindow> out;
  out.reserve(windows.size());
  for (auto& w : windows) out.push_back(std::move(w.window.tokens));
  return out;
}

}  // namespace

SyntheticRecipe native_recipe() {
  SyntheticRecipe r;
  r.name = "native";
  r.layout = {{RegionLabel::Instruction, 0x400, 0x800},
              {RegionLabel::NativeData, 0x200, 0x400},
              {RegionLabel::Instruction, 0x200, 0x600},
              {RegionLabel::NativeData, 0x200, 0x400}};
  r.shuffle_layout = true;
  return r;
}

SyntheticRecipe random_packed_recipe() { return packed_recipe("random-packed", {PackedSource::RandomBytes}); }

SyntheticRecipe low_entropy_recipe() {
  auto r = packed_recipe("low-entropy", {PackedSource::MonoSub, PackedSource::Transposition});
  r.entropy_ceiling = lowentropy::kThresholdStandard;
  return r;
}

SyntheticRecipe mixed_packed_recipe() {
  return packed_recipe("mixed-packed", {PackedSource::PolySub, PackedSource::Encoding, PackedSource::Padding});
}

std::vector<CorpusPart> desk_plan(std::size_t pretrain, std::size_t finetune, std::size_t test) {
  std::vector<CorpusPart> parts;
  if (pretrain) parts.push_back({native_recipe(), Role::Pretrain, pretrain});
  for (auto [role, n] : {std::pair{Role::Finetune, finetune}, std::pair{Role::Test, test}}) {
    if (!n) continue;
    const auto random = n / 5, low = n / 4, mixed = n * 3 / 20;
    parts.push_back({native_recipe(), role, n - random - low - mixed});
    parts.push_back({random_packed_recipe(), role, random});
    parts.push_back({low_entropy_recipe(), role, low});
    parts.push_back({mixed_packed_recipe(), role, mixed});
  }
  return parts;
}

std::vector<CorpusPart> low_entropy_plan(std::size_t count, Role role) { return {{low_entropy_recipe(), role, count}}; }

bool is_low_entropy_packed(const corpus::ManifestEntry& entry) {
  if (entry.program_label != corpus::ProgramLabel::Packed) return false;
  for (const auto& r : entry.regions) {
    if (r.label == RegionLabel::PackedData && r.source != "MonoSub" && r.source != "Transposition") return false;
  }
  return true;
}

std::vector<LabeledWindow> manifest_windows(const corpus::CorpusManifest& manifest, const std::string& root,
                                            std::span<const Role> roles) {
  std::vector<LabeledWindow> out;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    if (std::find(roles.begin(), roles.end(), e.role) == roles.end()) continue;
    const auto image = binimage::load_image_file(file_path(root, e));
    for (auto& w : detect::image_windows(image)) {
      w.tokens.label = corpus::label_for_extent(e, w.extent.byte_start, w.extent.byte_end);
      w.tokens.source.image_id = e.sha256;
      out.push_back({i, std::move(w)});
    }
  }
  return out;
}

checkpoint::Checkpoint pretrain_stage(const corpus::CorpusManifest& manifest, const std::string& root,
                                      const encoder::ModelConfig& config, const encoder::TrainHyper& hyper,
                                      const Logger& log) {
  const Role roles[] = {Role::Pretrain};
  auto labeled = manifest_windows(manifest, root, roles);
  const auto windows = tokens_of(labeled);
  emit(log, "pretrain: " + std::to_string(windows.size()) + " windows");
  checkpoint::Checkpoint ck;
  ck.config = config;
  ck.config.vocab_size = static_cast<int>(normalizer::default_vocabulary().size());
  ck.vocab_hash = normalizer::default_vocabulary().hash();
  auto result = encoder::train_pretrain(windows, ck.config, hyper, nullptr, [&](const encoder::EpochLog& e) {
    emit(log, "pretrain epoch " + std::to_string(e.epoch) + " loss " + fmt(e.mean_loss) + " samples " +
                  std::to_string(e.samples));
  });
  ck.params = std::move(result.params);
  return ck;
}

checkpoint::Checkpoint finetune_stage(const checkpoint::Checkpoint& pretrained, const corpus::CorpusManifest& manifest,
                                      const std::string& root, const FinetuneOptions& options, const Logger& log) {
  const Role roles[] = {Role::Finetune};
  auto labeled = manifest_windows(manifest, root, roles);
  std::vector<std::size_t> owner;
  std::vector<detect::ImageWindow> extents;
  for (const auto& w : labeled) {
    owner.push_back(w.entry);
    extents.push_back({w.window.section, w.window.extent, {}});
  }
  const auto windows = tokens_of(labeled);
  emit(log, "finetune: " + std::to_string(windows.size()) + " windows");
  auto result = encoder::train_finetune(windows, pretrained.params, pretrained.config, options.hyper, nullptr,
                                        [&](const encoder::EpochLog& e) {
                                          emit(log, "finetune epoch " + std::to_string(e.epoch) + " loss " +
                                                        fmt(e.mean_loss) + " samples " + std::to_string(e.samples));
                                        });
  checkpoint::Checkpoint ck = pretrained;
  ck.params = std::move(result.params);
  ck.extra.clear();

  // Program classifier over the model's own verdicts on (a subset of) the
  // fine-tuning files.
  std::vector<std::size_t> files;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    if (manifest.entries[i].role == Role::Finetune) files.push_back(i);
  }
  if (options.knn_files > 0 && options.knn_files < files.size()) {
    Rng rng(derive_seed(options.hyper.seed, 0x4B4E));
    rng.shuffle(std::span<std::size_t>(files));
    files.resize(options.knn_files);
    std::sort(files.begin(), files.end());
  }
  std::vector<char> chosen(manifest.entries.size(), 0);
  for (auto f : files) chosen[f] = 1;
  std::vector<std::size_t> todo;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    if (chosen[owner[w]]) todo.push_back(w);
  }
  std::vector<RegionLabel> predicted(todo.size());
  parallel_for(todo.size(), [&](std::size_t i) {
    const auto p = encoder::classify_region(windows[todo[i]], ck.params, ck.config);
    predicted[i] = static_cast<RegionLabel>(std::max_element(p.begin(), p.end()) - p.begin());
  });
  std::map<std::size_t, std::vector<RegionLabel>> per_file;
  for (std::size_t i = 0; i < todo.size(); ++i) per_file[owner[todo[i]]].push_back(predicted[i]);
  std::vector<std::pair<detect::Features, detect::ProgramClass>> dataset;
  for (const auto& [entry, labels] : per_file) {
    const auto cls = manifest.entries[entry].program_label == corpus::ProgramLabel::Packed
                         ? detect::ProgramClass::Packed
                         : detect::ProgramClass::NonPacked;
    dataset.emplace_back(detect::round_to_float(detect::extract_features(labels)), cls);
  }
  const auto knn = detect::knn_train(dataset, options.knn_k);
  ck.extra = detect::knn_to_tensors(knn);
  emit(log, "knn: " + std::to_string(dataset.size()) + " programs, " + std::to_string(knn.points.size()) +
                " distinct points, k=" + std::to_string(knn.k));
  return ck;
}

FileScan scan_image(const checkpoint::Checkpoint& ckpt, const binimage::BinaryImage& image) {
  if (!ckpt.params.head_trained) throw Error(ErrorKind::UntrainedModel, "model has not been fine-tuned");
  return scan_with(ckpt, stored_knn(ckpt), image);
}

Evaluation evaluate_stage(const checkpoint::Checkpoint& ckpt, const corpus::CorpusManifest& manifest,
                          const std::string& root, const Logger& log) {
  if (!ckpt.params.head_trained) throw Error(ErrorKind::UntrainedModel, "model has not been fine-tuned");
  const auto knn = stored_knn(ckpt);
  Evaluation ev;
  std::vector<bool> a_truth, a_pred, b_truth, b_pred;
  std::vector<int> truth3, pred3;
  std::vector<std::optional<bool>> prog_pred;
  std::vector<bool> prog_truth, ent_pred;
  std::size_t low_files = 0, low_model = 0, low_entropy = 0;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    if (e.role != Role::Test) continue;
    const auto image = binimage::load_image_file(file_path(root, e));
    auto scan = scan_with(ckpt, knn, image);
    for (const auto& v : scan.verdicts) {
      const auto truth = corpus::label_for_extent(e, v.byte_start, v.byte_end);
      if (!truth) continue;
      truth3.push_back(static_cast<int>(*truth));
      pred3.push_back(static_cast<int>(v.label));
      a_truth.push_back(*truth != RegionLabel::Instruction);
      a_pred.push_back(v.label != RegionLabel::Instruction);
      if (*truth != RegionLabel::Instruction) {
        b_truth.push_back(*truth == RegionLabel::PackedData);
        b_pred.push_back(v.probs[2] > v.probs[1]);
      }
    }
    const bool packed = e.program_label == corpus::ProgramLabel::Packed;
    prog_truth.push_back(packed);
    std::optional<bool> decision;
    if (scan.program) decision = scan.program->decision == detect::ProgramClass::Packed;
    prog_pred.push_back(decision);
    const auto verdict =
        lowentropy::entropy_detect(lowentropy::entropy_profile(image, lowentropy::Granularity::File), {});
    ent_pred.push_back(verdict.packed);
    if (is_low_entropy_packed(e)) {
      ++low_files;
      low_model += decision.value_or(false) ? 1 : 0;
      low_entropy += verdict.packed ? 1 : 0;
    }
    ev.files.push_back(i);
    ev.scans.push_back(std::move(scan));
  }
  if (ev.files.empty()) throw Error(ErrorKind::EmptyCorpus, "manifest has no Test files");
  const auto task_a = detect::evaluate(a_pred, a_truth);
  const auto task_b = detect::evaluate(b_pred, b_truth);
  const auto program = detect::evaluate(prog_pred, prog_truth);
  const auto entropy = detect::evaluate(ent_pred, prog_truth);
  auto ratio = [](std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
  ev.metrics = {{"test_files", ev.files.size()},
                {"windows", truth3.size()},
                {"region_macro_f1", encoder::macro_f1(truth3, pred3)},
                {"task_a", task_a.to_json()},
                {"task_b", task_b.to_json()},
                {"program_knn", program.to_json()},
                {"entropy_file_7", entropy.to_json()},
                {"low_entropy",
                 {{"files", low_files},
                  {"model_recall", ratio(low_model, low_files)},
                  {"entropy_recall", ratio(low_entropy, low_files)}}}};
  emit(log, "eval: task A F1 " + fmt(task_a.f1) + ", task B F1 " + fmt(task_b.f1) + ", program accuracy " +
                fmt(program.accuracy) + ", low-entropy recall model " + fmt(ratio(low_model, low_files)) +
                " entropy " + fmt(ratio(low_entropy, low_files)));
  return ev;
}

}  // namespace packsense::pipeline
