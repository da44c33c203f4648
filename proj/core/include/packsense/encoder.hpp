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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "packsense/common.hpp"
#include "packsense/normalizer.hpp"

namespace packsense::encoder {

using normalizer::TokenId;

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

struct ModelConfig {
  int layers = 4;
  int heads = 4;
  int d_model = 128;
  int d_ffn = 512;
  int max_len = 512;
  int vocab_size = 0;
  double dropout = 0.0;
  static constexpr int kClasses = kRegionLabelCount;

  /// Throws Error{InvalidSpec}.
  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  /// SHA-256 (hex) of the canonical JSON form.
  std::string hash() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename S>
struct LayerParams {
  Mat<S> wq, bq, wk, bk, wv, bv, wo, bo;
  Mat<S> ln1_g, ln1_b;
  Mat<S> w1, b1, w2, b2;
  Mat<S> ln2_g, ln2_b;
};

/// Weights are stored input-major: a linear layer computes X * W + b with X of
/// shape (positions x in). Biases and layer-norm vectors are (1 x width).
template <typename S>
struct ModelParams {
  Mat<S> tok_emb;  // vocab x d; also the MLM output projection
  Mat<S> pos_emb;  // max_len x d
  std::vector<LayerParams<S>> layers;
  Mat<S> lnf_g, lnf_b;
  Mat<S> mlm_b;               // 1 x vocab
  Mat<S> cls_w1, cls_b1;      // d x d, 1 x d (tanh)
  Mat<S> cls_w2, cls_b2;      // d x 3, 1 x 3
  bool head_trained = false;  // set once fine-tuning has run

  /// Calls f(name, tensor) for every tensor in a fixed order.
  template <typename F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <typename F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit([&](const std::string&, const Mat<S>& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& p, F& f) {
    f(std::string("tok_emb"), p.tok_emb);
    f(std::string("pos_emb"), p.pos_emb);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      auto& L = p.layers[l];
      const std::string pre = "layer" + std::to_string(l) + ".";
      f(pre + "wq", L.wq);
      f(pre + "bq", L.bq);
      f(pre + "wk", L.wk);
      f(pre + "bk", L.bk);
      f(pre + "wv", L.wv);
      f(pre + "bv", L.bv);
      f(pre + "wo", L.wo);
      f(pre + "bo", L.bo);
      f(pre + "ln1_g", L.ln1_g);
      f(pre + "ln1_b", L.ln1_b);
      f(pre + "w1", L.w1);
      f(pre + "b1", L.b1);
      f(pre + "w2", L.w2);
      f(pre + "b2", L.b2);
      f(pre + "ln2_g", L.ln2_g);
      f(pre + "ln2_b", L.ln2_b);
    }
    f(std::string("lnf_g"), p.lnf_g);
    f(std::string("lnf_b"), p.lnf_b);
    f(std::string("mlm_b"), p.mlm_b);
    f(std::string("cls_w1"), p.cls_w1);
    f(std::string("cls_b1"), p.cls_b1);
    f(std::string("cls_w2"), p.cls_w2);
    f(std::string("cls_b2"), p.cls_b2);
  }
};

/// Zero tensors of the right shapes (layer-norm gains included).
template <typename S>
ModelParams<S> zero_params(const ModelConfig& config);
/// N(0, 0.02) weights, zero biases, unit layer-norm gains.
template <typename S>
ModelParams<S> init_params(const ModelConfig& config, std::uint64_t seed);

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& p) {
  ModelParams<To> out;
  out.layers.resize(p.layers.size());
  std::vector<Mat<To>*> dst;
  out.visit([&](const std::string&, Mat<To>& m) { dst.push_back(&m); });
  std::size_t i = 0;
  p.visit([&](const std::string&, const Mat<From>& m) { *dst[i++] = m.template cast<To>(); });
  out.head_trained = p.head_trained;
  return out;
}

template <typename S>
struct ForwardOutput {
  Mat<S> hidden;  // positions x d, after the final layer norm
  Mat<S> pooled;  // 1 x d, mean over non-pad positions
};

/// [PAD] ids are excluded from attention keys and from pooling. Throws
/// Error{ShapeMismatch} for empty, oversized or out-of-vocabulary input.
template <typename S>
ForwardOutput<S> forward(const std::vector<TokenId>& ids, const ModelParams<S>& params, const ModelConfig& config);

/// hidden * tok_emb^T + mlm_b.
template <typename S>
Mat<S> mlm_logits(const Mat<S>& hidden, const ModelParams<S>& params);

/// Class logits from a pooled vector (1 x 3).
template <typename S>
Mat<S> classifier_logits(const Mat<S>& pooled, const ModelParams<S>& params);

/// Softmax over the three region classes. Throws Error{UntrainedHead} when the
/// classifier head has never been fine-tuned.
std::array<double, 3> classify_region(const normalizer::TokenWindow& window, const ModelParams<float>& params,
                                      const ModelConfig& config);
std::array<double, 3> classify_ids(const std::vector<TokenId>& ids, const ModelParams<float>& params,
                                   const ModelConfig& config);

/// Mean masked-token NLL and, when grad is non-null, its gradient accumulated
/// into *grad. dropout_seed feeds the dropout masks (unused when dropout is 0).
template <typename S>
S mlm_loss_and_grad(const std::vector<TokenId>& input, const std::vector<std::int32_t>& target,
                    const ModelParams<S>& params, const ModelConfig& config, ModelParams<S>* grad,
                    std::uint64_t dropout_seed = 0);

/// Cross-entropy of the class label; same gradient convention.
template <typename S>
S classifier_loss_and_grad(const std::vector<TokenId>& input, int label, const ModelParams<S>& params,
                           const ModelConfig& config, ModelParams<S>* grad, std::uint64_t dropout_seed = 0);

enum class LossKind { Mlm, Classifier };

struct GradCheckFixture {
  std::vector<TokenId> input;
  std::vector<std::int32_t> target;  // Mlm
  int label = 0;                     // Classifier
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t checked = 0;
};

/// Compares analytic gradients with central differences on up to
/// samples_per_tensor entries of every tensor. The relative error of an entry
/// is |a - n| / max(|a| + |n|, 1e-6).
GradCheckResult grad_check(const ModelConfig& config, const ModelParams<double>& params, LossKind kind,
                           const GradCheckFixture& fixture, double eps = 1e-4, std::size_t samples_per_tensor = 8,
                           std::uint64_t seed = 0);

struct TrainHyper {
  double lr = 1e-4;
  std::size_t batch = 8;
  int epochs = 3;
  std::uint64_t seed = 0;
  double warmup_fraction = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Cap on windows drawn per epoch (0 = all); chosen windows are re-drawn
  /// every epoch from the seed.
  std::size_t max_windows_per_epoch = 0;
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  std::size_t steps = 0;
  std::size_t samples = 0;
  double lr = 0.0;
  std::optional<double> validation_macro_f1;
};

struct TrainResult {
  ModelParams<float> params;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Masked-language-model pre-training with dynamic masking. Throws Error{EmptyCorpus}.
TrainResult train_pretrain(const std::vector<normalizer::TokenWindow>& windows, const ModelConfig& config,
                           const TrainHyper& hyper, const ModelParams<float>* init = nullptr,
                           const EpochCallback& on_epoch = {});

/// End-to-end classification fine-tuning. Throws Error{EmptyCorpus} and
/// Error{MissingLabels}.
TrainResult train_finetune(const std::vector<normalizer::TokenWindow>& windows, const ModelParams<float>& pretrained,
                           const ModelConfig& config, const TrainHyper& hyper,
                           const std::vector<normalizer::TokenWindow>* validation = nullptr,
                           const EpochCallback& on_epoch = {});

/// Macro-averaged F1 over the three classes.
double macro_f1(const std::vector<int>& truth, const std::vector<int>& predicted);

}  // namespace packsense::encoder
