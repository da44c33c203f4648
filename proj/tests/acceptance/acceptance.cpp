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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only when
// every selected criterion passes. Tolerances and time limits are the
// constants below.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "packsense/checkpoint.hpp"
#include "packsense/corpus.hpp"
#include "packsense/detect.hpp"
#include "packsense/disasm.hpp"
#include "packsense/encoder.hpp"
#include "packsense/lowentropy.hpp"
#include "packsense/normalizer.hpp"
#include "packsense/pipeline.hpp"
#include "packsense/simlm.hpp"

namespace fs = std::filesystem;
using namespace packsense;

namespace {

// Criterion 1
constexpr int kEntropyBuffers = 10000;
constexpr double kEntropyTolerance = 1e-9;
// Criterion 2
constexpr int kTransformTrials = 200;
constexpr double kBase64Ceiling = 6.0;
constexpr double kBase32Ceiling = 5.0;
// Criterion 3
constexpr std::size_t kLowEntropyFiles = 200;
constexpr double kEntropyThreshold = 7.0;
// Criterion 4
constexpr int kMaskPlans = 10000;
constexpr double kSelectLo = 0.19, kSelectHi = 0.21;
constexpr double kActionTolerance = 0.02;
// Criterion 5
constexpr double kGradTolerance = 1e-4;
// Criterion 6
constexpr std::size_t kFuzzBytes = 1000000;
// Criterion 7
constexpr std::uint64_t kRootSeed = 20260;
constexpr std::size_t kPretrainFiles = 150, kFinetuneFiles = 350, kTestFiles = 200;
constexpr int kEpochs = 3;
constexpr double kTaskAF1 = 0.90, kTaskBF1 = 0.80, kLowEntropyRecall = 0.80;
// Criterion 8
constexpr double kProgramAccuracy = 0.90;
constexpr int kOracleQueries = 100;
// Criterion 9
constexpr double kReproTolerance = 1e-6;
// Criterion 10
constexpr int kSweepBuffers = 10000;
constexpr std::size_t kSweepMaxBytes = 64 * 1024;

// Wall-clock limits in seconds.
constexpr double kLimit1 = 10, kLimit2 = 30, kLimit3 = 60, kLimit4 = 30, kLimit5 = 120, kLimit6 = 60;
constexpr double kLimit7 = 30 * 60, kLimit8 = 120, kLimit10 = 60;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 6) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

void report(int id, const Outcome& o, double elapsed, double limit) {
  const bool in_time = elapsed <= limit;
  std::printf("criterion %2d: %s  %s  [%.1fs, limit %.0fs]\n", id, o.pass && in_time ? "PASS" : "FAIL",
              o.detail.c_str(), elapsed, limit);
  std::fflush(stdout);
}

Bytes random_bytes(Rng& rng, std::size_t n) {
  Bytes b(n);
  for (auto& x : b) x = rng.byte();
  return b;
}

// Entropy by an independent route: sort the buffer, measure run lengths, and
// accumulate in long double.
double oracle_entropy(Bytes b) {
  std::sort(b.begin(), b.end());
  long double h = 0;
  const long double n = static_cast<long double>(b.size());
  for (std::size_t i = 0; i < b.size();) {
    std::size_t j = i;
    while (j < b.size() && b[j] == b[i]) ++j;
    const long double p = static_cast<long double>(j - i) / n;
    h -= p * std::log2(p);
    i = j;
  }
  return static_cast<double>(h);
}

Outcome criterion1() {
  Rng rng(1);
  double worst = 0;
  for (int i = 0; i < kEntropyBuffers; ++i) {
    const auto b = random_bytes(rng, 1 + rng.uniform(4096));
    // Mix in skewed buffers so low entropies are exercised too.
    Bytes skewed = b;
    for (auto& x : skewed) x &= static_cast<std::uint8_t>(rng.uniform(256));
    worst = std::max(worst, std::abs(lowentropy::shannon_entropy(b) - oracle_entropy(b)));
    worst = std::max(worst, std::abs(lowentropy::shannon_entropy(skewed) - oracle_entropy(skewed)));
  }
  Bytes uniform(256);
  for (int i = 0; i < 256; ++i) uniform[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
  const double hu = lowentropy::shannon_entropy(uniform);
  const double hc = lowentropy::shannon_entropy(Bytes(4096, 0x5A));
  Outcome o;
  o.pass = worst <= kEntropyTolerance && hu == 8.0 && hc == 0.0;
  o.detail = "max |H - oracle| = " + fmt(worst, 3) + " (tol 1e-9), uniform = " + fmt(hu, 17) +
             ", constant = " + fmt(hc, 17);
  return o;
}

Outcome criterion2() {
  Rng rng(2);
  std::size_t histogram_failures = 0, roundtrip_failures = 0, trials = 0;
  double max64 = 0, max32 = 0;
  for (int t = 0; t < kTransformTrials; ++t) {
    const auto in = random_bytes(rng, 1 + rng.uniform(8192));
    const auto seed = rng.next_u64();
    for (const auto& spec : {lowentropy::make_monosub(seed), lowentropy::make_transposition(seed, 1 + rng.uniform(512))}) {
      const auto out = lowentropy::transform(in, spec).output;
      auto a = lowentropy::histogram(in), b = lowentropy::histogram(out);
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      if (a != b || lowentropy::shannon_entropy(in) != lowentropy::shannon_entropy(out)) ++histogram_failures;
    }
    max64 = std::max(max64, lowentropy::shannon_entropy(
                                lowentropy::transform(in, lowentropy::make_encoding(lowentropy::Alphabet::Base64)).output));
    max32 = std::max(max32, lowentropy::shannon_entropy(
                                lowentropy::transform(in, lowentropy::make_encoding(lowentropy::Alphabet::Base32)).output));
    const auto position = static_cast<lowentropy::PadPosition>(rng.uniform(3));
    const std::size_t offset = position == lowentropy::PadPosition::Inject ? rng.uniform(in.size() + 1) : 0;
    const std::vector<lowentropy::TransformSpec> specs{
        lowentropy::make_padding(rng.byte(), rng.uniform(2048), position, offset),
        lowentropy::make_encoding(static_cast<lowentropy::Alphabet>(rng.uniform(3)), seed),
        lowentropy::make_monosub(seed),
        lowentropy::make_transposition(seed, 1 + rng.uniform(1024)),
        lowentropy::make_polysub(seed, 1 + rng.uniform(64))};
    for (const auto& spec : specs) {
      ++trials;
      const auto r = lowentropy::transform(in, spec);
      // Go through JSON text so the metadata alone carries the inverse.
      const auto meta = nlohmann::json::parse(r.metadata.dump());
      if (lowentropy::invert_transform(r.output, meta) != in) ++roundtrip_failures;
    }
  }
  Outcome o;
  o.pass = histogram_failures == 0 && roundtrip_failures == 0 && max64 <= kBase64Ceiling && max32 <= kBase32Ceiling;
  o.detail = "histogram mismatches " + std::to_string(histogram_failures) + ", max base64 H " + fmt(max64) +
             " (<= 6.0), max base32 H " + fmt(max32) + " (<= 5.0), roundtrip failures " +
             std::to_string(roundtrip_failures) + "/" + std::to_string(trials);
  return o;
}

Outcome criterion3(const fs::path& work) {
  const auto root = work / "low_entropy";
  fs::remove_all(root);
  const auto m = corpus::generate_corpus(pipeline::low_entropy_plan(kLowEntropyFiles), kRootSeed, root.string());
  std::size_t eligible = 0, detected = 0;
  double max_source = 0, max_file = 0;
  for (const auto& e : m.entries) {
    if (!pipeline::is_low_entropy_packed(e)) continue;
    ++eligible;
    const auto image = binimage::load_image_file((root / e.path).string());
    const auto profile = lowentropy::entropy_profile(image, lowentropy::Granularity::File);
    lowentropy::DetectOptions opt;
    opt.threshold = kEntropyThreshold;
    const auto v = lowentropy::entropy_detect(profile, opt);
    detected += v.packed ? 1 : 0;
    max_file = std::max(max_file, v.max_entropy);
    // The transformed payloads keep their source's entropy, so the source
    // entropy is the payload entropy.
    const auto bytes = image.bytes();
    for (const auto& r : e.regions) {
      if (r.label != RegionLabel::PackedData) continue;
      max_source = std::max(max_source, lowentropy::shannon_entropy(bytes.subspan(r.start, r.end - r.start)));
    }
  }
  Outcome o;
  const double recall = eligible ? static_cast<double>(detected) / static_cast<double>(eligible) : 1.0;
  o.pass = eligible == kLowEntropyFiles && recall == 0.0 && max_source < kEntropyThreshold;
  o.detail = "files " + std::to_string(eligible) + ", entropy recall " + fmt(recall) + " (== 0), max payload H " +
             fmt(max_source) + ", max file H " + fmt(max_file);
  return o;
}

// Token windows cut from the compiled fixtures and from random code-like bytes.
std::vector<normalizer::TokenWindow> mask_windows() {
  std::vector<normalizer::TokenWindow> out;
  for (const auto& [name, bytes] : corpus::compiled_fixtures()) {
    const auto image = binimage::load_image(Bytes(bytes.begin(), bytes.end()), binimage::Format::RAW);
    for (auto& w : detect::image_windows(image)) out.push_back(std::move(w.tokens));
  }
  return out;
}

Outcome criterion4() {
  const auto windows = mask_windows();
  const auto& vocab = normalizer::default_vocabulary();
  Rng rng(4);
  std::size_t maskable = 0, selected = 0, violations = 0, plans = 0;
  std::array<std::size_t, 3> actions{};
  for (int i = 0; i < kMaskPlans; ++i) {
    const auto& w = windows[static_cast<std::size_t>(i) % windows.size()];
    const auto plan = simlm::plan_mask(w, rng);
    if (plan.degenerate) continue;
    ++plans;
    maskable += simlm::maskable_positions(w).size();
    selected += plan.selected.size();
    for (auto a : plan.actions) ++actions[static_cast<std::size_t>(a)];
    const auto mnem = simlm::mnemonic_positions(w, vocab);
    for (std::size_t s = 0; s < w.instr_spans.size(); ++s) {
      const auto [lo, hi] = w.instr_spans[s];
      bool has_m = false, has_op = false;
      for (auto p : plan.selected) {
        if (p < lo || p >= hi) continue;
        if (static_cast<std::int64_t>(p) == mnem[s]) has_m = true;
        else if (mnem[s] >= 0 && static_cast<std::int64_t>(p) > mnem[s]) has_op = true;
      }
      if (has_m && has_op) ++violations;
    }
    for (auto p : plan.selected) {
      if (w.tokens[p] == normalizer::kSos || w.tokens[p] == normalizer::kEos) ++violations;
    }
  }
  const double frac = static_cast<double>(selected) / static_cast<double>(maskable);
  const double total = static_cast<double>(selected);
  const double pm = static_cast<double>(actions[0]) / total, pr = static_cast<double>(actions[1]) / total,
               pk = static_cast<double>(actions[2]) / total;
  Outcome o;
  o.pass = plans == static_cast<std::size_t>(kMaskPlans) && frac >= kSelectLo && frac <= kSelectHi &&
           std::abs(pm - 0.40) <= kActionTolerance && std::abs(pr - 0.50) <= kActionTolerance &&
           std::abs(pk - 0.10) <= kActionTolerance && violations == 0;
  o.detail = "plans " + std::to_string(plans) + ", selected fraction " + fmt(frac, 4) + ", mask/randomize/keep " +
             fmt(pm, 4) + "/" + fmt(pr, 4) + "/" + fmt(pk, 4) + ", violations " + std::to_string(violations);
  return o;
}

Outcome criterion5() {
  encoder::ModelConfig c;
  c.layers = 2;
  c.heads = 2;
  c.d_model = 16;
  c.d_ffn = 32;
  c.vocab_size = static_cast<int>(normalizer::default_vocabulary().size());
  const auto params = encoder::init_params<double>(c, 5);
  // A real window, masked by a real plan.
  auto w = mask_windows().front();
  w.tokens.resize(24);
  w.tokens.back() = normalizer::kEos;
  w.instr_spans.clear();
  w.instr_spans.emplace_back(1, 24);
  Rng rng(6);
  simlm::MaskPlan plan;
  while (plan.selected.empty()) plan = simlm::plan_mask(w, rng);
  const auto masked = simlm::apply_mask(w, plan);
  encoder::GradCheckFixture f;
  f.input = masked.input;
  f.target = masked.target;
  f.label = 1;
  const auto mlm = encoder::grad_check(c, params, encoder::LossKind::Mlm, f, 1e-4, 16, 7);
  f.input = w.tokens;
  const auto cls = encoder::grad_check(c, params, encoder::LossKind::Classifier, f, 1e-4, 16, 8);
  Outcome o;
  o.pass = mlm.max_relative_error < kGradTolerance && cls.max_relative_error < kGradTolerance;
  o.detail = "MLM max rel err " + fmt(mlm.max_relative_error, 3) + " (" + mlm.worst_tensor + ", " +
             std::to_string(mlm.checked) + " entries), classifier " + fmt(cls.max_relative_error, 3) + " (" +
             cls.worst_tensor + ", " + std::to_string(cls.checked) + " entries), tol 1e-4";
  return o;
}

Outcome criterion6() {
  const auto& vocab = normalizer::default_vocabulary();
  const auto image = binimage::load_image(Bytes(0x10000, 0));
  const auto range = binimage::valid_memory_range(image);
  auto text = [&](const Bytes& code) {
    const auto u = disasm::decode_one(code, 0, disasm::Mode::x86_32, image.image_base());
    std::string s;
    for (auto id : normalizer::normalize_unit(u, range)) s += std::string(vocab.text(id)) + " ";
    return s;
  };
  auto raw = [&](std::uint8_t b) {
    const Bytes one{b};
    disasm::DecodedUnit u;
    u.kind = disasm::UnitKind::RawByte;
    u.raw = one;
    std::string s;
    for (auto id : normalizer::normalize_unit(u, range)) s += std::string(vocab.text(id)) + " ";
    return s;
  };
  std::vector<std::pair<std::string, std::string>> cases{
      {text({0x83, 0xC0, 0x01}), "add eax [const] [EOS] "},
      {text({0x8B, 0x80, 0xE7, 0xE8, 0xD7, 0xF9}), "mov eax eax [const_abnormal] [EOS] "},
      {text({0xE9, 0x00, 0x10, 0x00, 0x00}), "jmp [mem_normal] [EOS] "},
      {text({0xE9, 0x00, 0x00, 0x00, 0x10}), "jmp [mem_abnormal] [EOS] "},
      {raw(0x00), "[pad_normal] [EOS] "},
      {raw(0x7F), "[pad_abnormal] [EOS] "}};
  std::size_t case_failures = 0;
  for (const auto& [got, want] : cases) case_failures += got == want ? 0 : 1;

  Rng rng(6);
  const auto fuzz = random_bytes(rng, kFuzzBytes);
  std::size_t oov = 0, tokens = 0;
  for (auto mode : {disasm::Mode::x86_32, disasm::Mode::x86_64}) {
    for (const auto& u : disasm::sweep_bytes(fuzz, mode, image.image_base())) {
      try {
        for (auto id : normalizer::normalize_unit(u, range)) {
          ++tokens;
          if (id < 0 || static_cast<std::size_t>(id) >= vocab.size() || vocab.find(vocab.text(id)) != id) ++oov;
        }
      } catch (const Error&) {
        ++oov;
      }
    }
  }
  Outcome o;
  o.pass = case_failures == 0 && oov == 0;
  o.detail = "worked cases " + std::to_string(cases.size() - case_failures) + "/" + std::to_string(cases.size()) +
             ", fuzz tokens " + std::to_string(tokens) + " over 32- and 64-bit sweeps, OOV " + std::to_string(oov);
  return o;
}

struct EndToEnd {
  nlohmann::json metrics;
  std::string checkpoint_hash;
  std::string manifest_hash;
  std::size_t violations = 0;
  std::size_t train_files = 0, test_files = 0;
  checkpoint::Checkpoint model;
  pipeline::Evaluation eval;
  double seconds = 0;
};

EndToEnd run_end_to_end(const fs::path& root) {
  const auto t0 = Clock::now();
  fs::remove_all(root);
  auto log = [&](const std::string& line) {
    std::printf("    [%6.0fs] %s\n", seconds_since(t0), line.c_str());
    std::fflush(stdout);
  };
  EndToEnd r;
  const auto m = corpus::generate_corpus(pipeline::desk_plan(kPretrainFiles, kFinetuneFiles, kTestFiles), kRootSeed,
                                         root.string());
  r.violations = corpus::split_check(m).size();
  for (const auto& e : m.entries) (e.role == corpus::Role::Test ? r.test_files : r.train_files) += 1;
  r.manifest_hash = to_hex(sha256(read_file((root / "manifest.jsonl").string())));

  encoder::ModelConfig config;  // 4 layers, 4 heads, d 128, ffn 512
  encoder::TrainHyper pre;
  pre.seed = derive_seed(kRootSeed, 1);
  pre.epochs = kEpochs;
  pre.lr = 5e-4;
  pre.max_windows_per_epoch = 600;
  pipeline::FinetuneOptions ft;
  ft.hyper = pre;
  ft.hyper.seed = derive_seed(kRootSeed, 2);
  ft.hyper.max_windows_per_epoch = 1500;
  ft.knn_k = 5;
  ft.knn_files = 200;
  const nlohmann::json run_config = {{"config", config.to_json()},
                                     {"pretrain_lr", pre.lr},
                                     {"pretrain_windows", pre.max_windows_per_epoch},
                                     {"finetune_windows", ft.hyper.max_windows_per_epoch},
                                     {"epochs", kEpochs},
                                     {"knn_k", ft.knn_k},
                                     {"knn_files", ft.knn_files}};
  log("seed=" + std::to_string(kRootSeed) + " config_hash=" + to_hex(sha256(run_config.dump())) +
      " vocab_hash=" + normalizer::default_vocabulary().hash());
  const auto pretrained = pipeline::pretrain_stage(m, root.string(), config, pre, log);
  r.model = pipeline::finetune_stage(pretrained, m, root.string(), ft, log);
  r.checkpoint_hash = checkpoint::hash(r.model);
  log("checkpoint_hash=" + r.checkpoint_hash);
  r.eval = pipeline::evaluate_stage(r.model, m, root.string(), log);
  r.metrics = r.eval.metrics;
  r.seconds = seconds_since(t0);
  return r;
}

Outcome criterion7(const EndToEnd& r) {
  const double fa = r.metrics["task_a"]["f1"], fb = r.metrics["task_b"]["f1"];
  const double model_recall = r.metrics["low_entropy"]["model_recall"];
  const double entropy_recall = r.metrics["low_entropy"]["entropy_recall"];
  Outcome o;
  o.pass = r.violations == 0 && r.train_files == kPretrainFiles + kFinetuneFiles && r.test_files == kTestFiles &&
           fa >= kTaskAF1 && fb >= kTaskBF1 && model_recall >= kLowEntropyRecall && entropy_recall == 0.0;
  o.detail = "files " + std::to_string(r.train_files) + "/" + std::to_string(r.test_files) + ", split violations " +
             std::to_string(r.violations) + ", task A F1 " + fmt(fa, 4) + " (>= 0.90), task B F1 " + fmt(fb, 4) +
             " (>= 0.80), low-entropy recall model " + fmt(model_recall, 4) + " (>= 0.80) vs entropy " +
             fmt(entropy_recall, 4) + " over " + r.metrics["low_entropy"]["files"].dump() + " files";
  return o;
}

// Brute force: full sort of every training point by (distance, class, index).
detect::ProgramClass brute_force(const detect::KnnModel& m, const detect::Features& q) {
  std::vector<std::tuple<double, int, std::size_t>> all;
  for (std::size_t i = 0; i < m.points.size(); ++i) {
    double d = 0;
    for (std::size_t k = 0; k < q.size(); ++k) d += (m.points[i][k] - q[k]) * (m.points[i][k] - q[k]);
    all.emplace_back(d, m.labels[i], i);
  }
  std::sort(all.begin(), all.end());
  int votes[2] = {0, 0};
  for (int i = 0; i < m.k && i < static_cast<int>(all.size()); ++i) ++votes[std::get<1>(all[static_cast<std::size_t>(i)])];
  return votes[1] > votes[0] ? detect::ProgramClass::Packed : detect::ProgramClass::NonPacked;
}

Outcome criterion8(const EndToEnd& r) {
  const double accuracy = r.metrics["program_knn"]["accuracy"];
  const auto knn = detect::knn_from_tensors(r.model.extra);
  std::size_t mismatches = 0;
  if (knn) {
    Rng rng(8);
    for (int q = 0; q < kOracleQueries; ++q) {
      // Half the queries are real test-file features, half are perturbed ones.
      const auto& scan = r.eval.scans[rng.uniform(r.eval.scans.size())];
      detect::Features f = scan.features.value_or(detect::Features{});
      if (q % 2) {
        for (auto& x : f) x = std::max(0.0, x + rng.normal(0, 0.05));
      }
      if (detect::knn_classify(*knn, f).decision != brute_force(*knn, f)) ++mismatches;
    }
  }
  Outcome o;
  o.pass = knn.has_value() && knn->k == 5 && accuracy >= kProgramAccuracy && mismatches == 0;
  o.detail = "k " + std::to_string(knn ? knn->k : 0) + ", training points " +
             std::to_string(knn ? knn->points.size() : 0) + ", held-out accuracy " + fmt(accuracy, 4) +
             " (>= 0.90), oracle mismatches " + std::to_string(mismatches) + "/" + std::to_string(kOracleQueries);
  return o;
}

void max_numeric_difference(const nlohmann::json& a, const nlohmann::json& b, double& worst, bool& shape_ok) {
  if (a.is_number() && b.is_number()) {
    worst = std::max(worst, std::abs(a.get<double>() - b.get<double>()));
  } else if (a.is_object() && b.is_object()) {
    if (a.size() != b.size()) shape_ok = false;
    for (auto it = a.begin(); it != a.end(); ++it) {
      if (!b.contains(it.key())) {
        shape_ok = false;
        continue;
      }
      max_numeric_difference(it.value(), b[it.key()], worst, shape_ok);
    }
  } else if (a != b) {
    shape_ok = false;
  }
}

Outcome criterion9(const EndToEnd& a, const EndToEnd& b) {
  double worst = 0;
  bool shape_ok = true;
  max_numeric_difference(a.metrics, b.metrics, worst, shape_ok);
  Outcome o;
  o.pass = shape_ok && worst <= kReproTolerance && a.checkpoint_hash == b.checkpoint_hash &&
           a.manifest_hash == b.manifest_hash;
  o.detail = "max metric difference " + fmt(worst, 3) + " (<= 1e-6), checkpoint hash " +
             (a.checkpoint_hash == b.checkpoint_hash ? "identical " + a.checkpoint_hash.substr(0, 16)
                                                     : "DIFFERS") +
             ", manifest " + (a.manifest_hash == b.manifest_hash ? "identical" : "DIFFERS");
  return o;
}

Outcome criterion10() {
  Rng rng(10);
  std::size_t bad = 0, units_total = 0;
  std::uint64_t bytes_total = 0;
  for (int i = 0; i < kSweepBuffers; ++i) {
    const auto n = 1 + rng.uniform(kSweepMaxBytes);
    const auto image = binimage::load_image(random_bytes(rng, n), binimage::Format::RAW);
    const auto units = disasm::linear_sweep(image);
    std::uint64_t next = 0;
    bool ok = true;
    for (const auto& u : units) {
      if (u.offset != next || u.length == 0) ok = false;
      next = u.offset + u.length;
    }
    if (next != n) ok = false;
    bad += ok ? 0 : 1;
    units_total += units.size();
    bytes_total += n;
  }
  Outcome o;
  o.pass = bad == 0;
  o.detail = "buffers " + std::to_string(kSweepBuffers) + ", bytes " + std::to_string(bytes_total) + ", units " +
             std::to_string(units_total) + ", gap/overlap failures " + std::to_string(bad);
  return o;
}

template <typename Fn>
bool timed(int id, double limit, Fn&& fn) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  const double s = seconds_since(t0);
  report(id, o, s, limit);
  return o.pass && s <= limit;
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "packsense_acceptance";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work-dir" && i + 1 < argc) {
      work = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    } else {
      std::fprintf(stderr, "usage: packsense_acceptance [--work-dir DIR] [--only 1,2,...]\n");
      return 2;
    }
  }
  fs::create_directories(work);
  auto selected = [&](int id) { return only.empty() || only.count(id) > 0; };
  bool all = true;

  if (selected(1)) all &= timed(1, kLimit1, criterion1);
  if (selected(2)) all &= timed(2, kLimit2, criterion2);
  if (selected(3)) all &= timed(3, kLimit3, [&] { return criterion3(work); });
  if (selected(4)) all &= timed(4, kLimit4, criterion4);
  if (selected(5)) all &= timed(5, kLimit5, criterion5);
  if (selected(6)) all &= timed(6, kLimit6, criterion6);
  if (selected(10)) all &= timed(10, kLimit10, criterion10);

  if (selected(7) || selected(8) || selected(9)) {
    std::optional<EndToEnd> first;
    try {
      std::printf("end-to-end run 1\n");
      first = run_end_to_end(work / "desk_run1");
    } catch (const std::exception& e) {
      std::printf("end-to-end run 1 failed: %s\n", e.what());
    }
    if (selected(7)) {
      if (first) {
        report(7, criterion7(*first), first->seconds, kLimit7);
        all &= criterion7(*first).pass && first->seconds <= kLimit7;
      } else {
        report(7, {false, "run failed"}, 0, kLimit7);
        all = false;
      }
    }
    if (selected(8)) {
      if (first) {
        all &= timed(8, kLimit8, [&] { return criterion8(*first); });
      } else {
        report(8, {false, "run failed"}, 0, kLimit8);
        all = false;
      }
    }
    if (selected(9)) {
      std::optional<EndToEnd> second;
      try {
        std::printf("end-to-end run 2\n");
        second = run_end_to_end(work / "desk_run2");
      } catch (const std::exception& e) {
        std::printf("end-to-end run 2 failed: %s\n", e.what());
      }
      if (first && second) {
        const auto o = criterion9(*first, *second);
        report(9, o, second->seconds, kLimit7);
        all &= o.pass && second->seconds <= kLimit7;
      } else {
        report(9, {false, "run failed"}, 0, kLimit7);
        all = false;
      }
    }
  }
  std::printf("acceptance: %s\n", all ? "ALL PASS" : "FAILURES");
  return all ? 0 : 1;
}
