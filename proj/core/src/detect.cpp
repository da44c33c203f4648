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

#include "packsense/detect.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "packsense/disasm.hpp"

namespace packsense::detect {

std::vector<ImageWindow> image_windows(const binimage::BinaryImage& image,
                                       const normalizer::InstructionWindowOptions& options) {
  const auto range = binimage::valid_memory_range(image);
  const auto& vocab = normalizer::default_vocabulary();
  std::vector<ImageWindow> out;
  for (const auto& section : binimage::iter_sections(image)) {
    const auto units = disasm::linear_sweep(image, &section);
    const auto windows = normalizer::windowize_instructions(units, options);
    const std::size_t first = out.size();
    out.resize(first + windows.size());
    parallel_for(windows.size(), [&](std::size_t i) {
      const auto& w = windows[i];
      auto& slot = out[first + i];
      slot.section = section.name;
      slot.extent = w;
      slot.tokens = normalizer::window_from_units(
          std::span<const disasm::DecodedUnit>(units).subspan(w.first_unit, w.unit_count), range, vocab);
      slot.tokens.source.section = section.name;
      slot.tokens.source.first_offset = w.byte_start;
    });
  }
  return out;
}

std::vector<RegionVerdict> scan_regions(const binimage::BinaryImage& image, const encoder::ModelParams<float>& params,
                                        const encoder::ModelConfig& config, const ScanOptions& options) {
  if (!params.head_trained) throw Error(ErrorKind::UntrainedModel, "model has not been fine-tuned");
  const auto windows = image_windows(image, options.windows);
  std::vector<RegionVerdict> out(windows.size());
  parallel_for(windows.size(), [&](std::size_t i) {
    const auto& w = windows[i];
    auto& v = out[i];
    v.section = w.section;
    v.byte_start = w.extent.byte_start;
    v.byte_end = w.extent.byte_end;
    v.instruction_count = w.extent.unit_count;
    v.probs = encoder::classify_region(w.tokens, params, config);
    v.label = static_cast<RegionLabel>(std::max_element(v.probs.begin(), v.probs.end()) - v.probs.begin());
  });
  return out;
}

Features extract_features(const std::vector<RegionLabel>& labels) {
  if (labels.empty()) throw Error(ErrorKind::EmptyVerdicts, "no region verdicts");
  Features f{};
  std::vector<int> padded;
  for (auto l : labels) padded.push_back(static_cast<int>(l));
  while (padded.size() < 3) padded.push_back(static_cast<int>(RegionLabel::NativeData));
  const std::size_t trigrams = padded.size() - 2;
  for (std::size_t i = 0; i < trigrams; ++i) {
    f[static_cast<std::size_t>(padded[i] * 9 + padded[i + 1] * 3 + padded[i + 2])] += 1.0;
  }
  for (std::size_t i = 0; i < 27; ++i) f[i] /= static_cast<double>(trigrams);

  const auto n = static_cast<double>(labels.size());
  std::size_t run = 0, longest = 0, changes = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    f[27 + static_cast<std::size_t>(labels[i])] += 1.0;
    run = labels[i] == RegionLabel::PackedData ? run + 1 : 0;
    longest = std::max(longest, run);
    if (i > 0 && labels[i] != labels[i - 1]) ++changes;
  }
  for (std::size_t i = 27; i < 30; ++i) f[i] /= n;
  f[30] = static_cast<double>(longest) / n;
  f[31] = static_cast<double>(changes) / std::max(n - 1.0, 1.0);
  return f;
}

Features extract_features(const std::vector<RegionVerdict>& verdicts) {
  std::vector<RegionLabel> labels;
  labels.reserve(verdicts.size());
  for (const auto& v : verdicts) labels.push_back(v.label);
  return extract_features(labels);
}

std::string_view to_string(ProgramClass c) { return c == ProgramClass::Packed ? "Packed" : "NonPacked"; }

KnnModel knn_train(const std::vector<std::pair<Features, ProgramClass>>& dataset, int k) {
  if (k < 1 || k % 2 == 0) throw Error(ErrorKind::InvalidSpec, "k must be odd and positive");
  KnnModel model;
  model.k = k;
  std::set<std::pair<Features, int>> seen;
  std::array<bool, 2> present{};
  for (const auto& [features, cls] : dataset) {
    const int label = static_cast<int>(cls);
    present[static_cast<std::size_t>(label)] = true;
    if (!seen.insert({features, label}).second) continue;
    model.points.push_back(features);
    model.labels.push_back(label);
  }
  if (!present[0] || !present[1]) throw Error(ErrorKind::SingleClassDataset, "training set has a single class");
  return model;
}

ProgramVerdict knn_classify(const KnnModel& model, const Features& features, const std::vector<RegionVerdict>* verdicts) {
  if (!model.trained()) throw Error(ErrorKind::UntrainedModel, "program classifier has no training points");
  const std::size_t n = model.points.size();
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      const double d = model.points[i][j] - features[j];
      s += d * d;
    }
    dist[i] = s;  // squared distance orders identically
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(model.k), n);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (dist[a] != dist[b]) return dist[a] < dist[b];
                      if (model.labels[a] != model.labels[b]) return model.labels[a] < model.labels[b];
                      return a < b;
                    });
  ProgramVerdict out;
  out.neighbors.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  for (auto i : out.neighbors) ++out.votes[static_cast<std::size_t>(model.labels[i])];
  out.decision = out.votes[1] > out.votes[0] ? ProgramClass::Packed : ProgramClass::NonPacked;
  if (verdicts && !verdicts->empty()) {
    std::size_t packed = 0;
    for (const auto& v : *verdicts) {
      if (v.label != RegionLabel::PackedData) continue;
      ++packed;
      out.evidence.push_back(v);
    }
    out.packed_fraction = static_cast<double>(packed) / static_cast<double>(verdicts->size());
  }
  return out;
}

std::map<std::string, encoder::Mat<float>> knn_to_tensors(const KnnModel& model) {
  const auto n = static_cast<Eigen::Index>(model.points.size());
  encoder::Mat<float> pts(n, static_cast<Eigen::Index>(kFeatureCount));
  encoder::Mat<float> meta(n + 1, 1);
  meta(0, 0) = static_cast<float>(model.k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(kFeatureCount); ++j) {
      pts(i, j) = static_cast<float>(model.points[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
    }
    meta(i + 1, 0) = static_cast<float>(model.labels[static_cast<std::size_t>(i)]);
  }
  return {{"knn.points", pts}, {"knn.meta", meta}};
}

std::optional<KnnModel> knn_from_tensors(const std::map<std::string, encoder::Mat<float>>& tensors) {
  const auto p = tensors.find("knn.points");
  const auto m = tensors.find("knn.meta");
  if (p == tensors.end() || m == tensors.end()) return std::nullopt;
  const auto& pts = p->second;
  const auto& meta = m->second;
  if (pts.cols() != static_cast<Eigen::Index>(kFeatureCount) || meta.cols() != 1 || meta.rows() != pts.rows() + 1) {
    throw Error(ErrorKind::CorruptMetadata, "program classifier tensors have inconsistent shapes");
  }
  KnnModel model;
  model.k = static_cast<int>(meta(0, 0));
  if (model.k < 1 || model.k % 2 == 0) throw Error(ErrorKind::CorruptMetadata, "stored k is invalid");
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    Features f{};
    for (std::size_t j = 0; j < kFeatureCount; ++j) f[j] = static_cast<double>(pts(i, static_cast<Eigen::Index>(j)));
    const int label = static_cast<int>(meta(i + 1, 0));
    if (label != 0 && label != 1) throw Error(ErrorKind::CorruptMetadata, "stored program label is invalid");
    model.points.push_back(f);
    model.labels.push_back(label);
  }
  return model;
}

Features round_to_float(const Features& f) {
  Features out{};
  for (std::size_t i = 0; i < kFeatureCount; ++i) out[i] = static_cast<double>(static_cast<float>(f[i]));
  return out;
}

namespace {

double ratio(std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; }

}  // namespace

Metrics evaluate(const std::vector<std::optional<bool>>& predictions, const std::vector<bool>& truth) {
  if (predictions.size() != truth.size()) {
    throw Error(ErrorKind::LengthMismatch, "predictions and truth differ in length");
  }
  Metrics m;
  m.total = truth.size();
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predictions[i]) ++m.covered;
    const bool p = predictions[i].value_or(false);
    if (p && truth[i]) ++m.tp;
    else if (p) ++m.fp;
    else if (truth[i]) ++m.fn;
    else ++m.tn;
  }
  m.precision = ratio(m.tp, m.tp + m.fp);
  m.recall = ratio(m.tp, m.tp + m.fn);
  m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.accuracy = ratio(m.tp + m.tn, m.total);
  m.tpr = m.recall;
  m.fnr = ratio(m.fn, m.tp + m.fn);
  m.fpr = ratio(m.fp, m.fp + m.tn);
  m.tnr = ratio(m.tn, m.fp + m.tn);
  m.dcr = ratio(m.covered, m.total);
  return m;
}

Metrics evaluate(const std::vector<bool>& predictions, const std::vector<bool>& truth) {
  std::vector<std::optional<bool>> p(predictions.begin(), predictions.end());
  return evaluate(p, truth);
}

nlohmann::json Metrics::to_json() const {
  return {{"tp", tp},         {"fp", fp},   {"tn", tn},     {"fn", fn},         {"total", total},
          {"covered", covered}, {"precision", precision}, {"recall", recall}, {"f1", f1},
          {"accuracy", accuracy}, {"tpr", tpr}, {"fpr", fpr}, {"tnr", tnr}, {"fnr", fnr}, {"dcr", dcr}};
}

nlohmann::json make_report(const std::string& file, const std::string& sha256_hex,
                           const std::vector<RegionVerdict>& verdicts, const std::optional<ProgramVerdict>& program) {
  nlohmann::json windows = nlohmann::json::array();
  for (const auto& v : verdicts) {
    windows.push_back({{"section", v.section},
                       {"byte_start", v.byte_start},
                       {"byte_end", v.byte_end},
                       {"instructions", v.instruction_count},
                       {"probs", v.probs},
                       {"label", std::string(to_string(v.label))}});
  }
  nlohmann::json prog = nullptr;
  if (program) {
    nlohmann::json evidence = nlohmann::json::array();
    for (const auto& v : program->evidence) {
      evidence.push_back({{"section", v.section}, {"byte_start", v.byte_start}, {"byte_end", v.byte_end}});
    }
    prog = {{"decision", std::string(to_string(program->decision))},
            {"votes", {{"NonPacked", program->votes[0]}, {"Packed", program->votes[1]}}},
            {"packed_fraction", program->packed_fraction},
            {"evidence", evidence}};
  }
  return {{"schema_version", kReportSchemaVersion},
          {"file", file},
          {"sha256", sha256_hex},
          {"windows", windows},
          {"program", prog}};
}

}  // namespace packsense::detect
