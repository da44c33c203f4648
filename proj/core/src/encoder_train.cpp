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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "packsense/encoder.hpp"
#include "packsense/simlm.hpp"

namespace packsense::encoder {

namespace {

struct Adam {
  ModelParams<float> m, v;
  std::size_t t = 0;
};

std::vector<Mat<float>*> tensor_list(ModelParams<float>& p) {
  std::vector<Mat<float>*> out;
  p.visit([&](const std::string&, Mat<float>& m) { out.push_back(&m); });
  return out;
}

void zero(ModelParams<float>& p) {
  p.visit([](const std::string&, Mat<float>& m) { m.setZero(); });
}

void adam_step(ModelParams<float>& params, ModelParams<float>& grad, Adam& opt, double lr, const TrainHyper& h) {
  ++opt.t;
  const auto P = tensor_list(params);
  const auto G = tensor_list(grad);
  const auto M = tensor_list(opt.m);
  const auto V = tensor_list(opt.v);
  const auto b1 = static_cast<float>(h.beta1), b2 = static_cast<float>(h.beta2);
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(opt.t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(opt.t));
  const auto step = static_cast<float>(lr * std::sqrt(c2) / c1);
  const auto eps = static_cast<float>(h.adam_eps * std::sqrt(c2));
  for (std::size_t i = 0; i < P.size(); ++i) {
    auto g = G[i]->array();
    M[i]->array() = b1 * M[i]->array() + (1.0f - b1) * g;
    V[i]->array() = b2 * V[i]->array() + (1.0f - b2) * g.square();
    P[i]->array() -= step * M[i]->array() / (V[i]->array().sqrt() + eps);
  }
}

double scheduled_lr(const TrainHyper& h, std::size_t step, std::size_t total_steps) {
  const auto warmup =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(h.warmup_fraction * static_cast<double>(total_steps))));
  return h.lr * std::min(1.0, static_cast<double>(step) / static_cast<double>(warmup));
}

std::vector<std::size_t> epoch_order(std::size_t n, std::size_t cap, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0xE90C, static_cast<std::uint64_t>(epoch)));
  rng.shuffle(std::span<std::size_t>(order));
  if (cap > 0 && cap < n) order.resize(cap);
  return order;
}

// One sample's contribution: loss and gradient into grad (pre-zeroed).
using SampleFn = std::function<std::optional<double>(std::size_t sample, ModelParams<float>& grad)>;

// Runs minibatch Adam over `order`; per-sample gradients are computed in
// parallel and summed in sample order so results do not depend on threads.
struct Loop {
  const ModelConfig& config;
  const TrainHyper& hyper;
  ModelParams<float>& params;
  Adam& opt;
  std::size_t& global_step;
  std::size_t total_steps;

  EpochLog run_epoch(int epoch, const std::vector<std::size_t>& order, const SampleFn& fn) {
    EpochLog log;
    log.epoch = epoch;
    const std::size_t B = std::max<std::size_t>(hyper.batch, 1);
    std::vector<ModelParams<float>> grads(B, zero_params<float>(config));
    std::vector<std::optional<double>> losses(B);
    ModelParams<float> total = zero_params<float>(config);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += B) {
      const std::size_t nb = std::min(B, order.size() - start);
      parallel_for(nb, [&](std::size_t i) {
        zero(grads[i]);
        losses[i] = fn(order[start + i], grads[i]);
      });
      zero(total);
      std::size_t used = 0;
      const auto T = tensor_list(total);
      for (std::size_t i = 0; i < nb; ++i) {
        if (!losses[i]) continue;
        ++used;
        loss_sum += *losses[i];
        const auto Gi = tensor_list(grads[i]);
        for (std::size_t k = 0; k < T.size(); ++k) *T[k] += *Gi[k];
      }
      if (used == 0) continue;
      for (auto* t : T) *t /= static_cast<float>(used);
      ++global_step;
      log.lr = scheduled_lr(hyper, global_step, total_steps);
      adam_step(params, total, opt, log.lr, hyper);
      log.samples += used;
      ++log.steps;
    }
    log.mean_loss = log.samples ? loss_sum / static_cast<double>(log.samples) : 0.0;
    return log;
  }
};

std::size_t steps_per_epoch(std::size_t n, const TrainHyper& h) {
  const std::size_t used = h.max_windows_per_epoch > 0 ? std::min(n, h.max_windows_per_epoch) : n;
  const std::size_t B = std::max<std::size_t>(h.batch, 1);
  return (used + B - 1) / B;
}

}  // namespace

TrainResult train_pretrain(const std::vector<normalizer::TokenWindow>& windows, const ModelConfig& config,
                           const TrainHyper& hyper, const ModelParams<float>* init, const EpochCallback& on_epoch) {
  if (windows.empty()) throw Error(ErrorKind::EmptyCorpus, "no pre-training windows");
  config.validate();
  TrainResult result;
  result.params = init ? *init : init_params<float>(config, derive_seed(hyper.seed, 0x1417));
  Adam opt{zero_params<float>(config), zero_params<float>(config)};
  std::size_t step = 0;
  const std::size_t total = steps_per_epoch(windows.size(), hyper) * static_cast<std::size_t>(hyper.epochs);
  const auto& vocab = normalizer::default_vocabulary();
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    Loop loop{config, hyper, result.params, opt, step, total};
    const auto order = epoch_order(windows.size(), hyper.max_windows_per_epoch, hyper.seed, epoch);
    const auto& params = result.params;
    auto log = loop.run_epoch(epoch + 1, order, [&](std::size_t w, ModelParams<float>& grad) -> std::optional<double> {
      const auto& win = windows[w];
      // Dynamic masking: a fresh plan per window and epoch.
      Rng rng(derive_seed(hyper.seed, 0x3A5C00 + static_cast<std::uint64_t>(epoch), w));
      const auto plan = simlm::plan_mask(win, rng, {}, vocab);
      if (plan.degenerate || plan.selected.empty()) return std::nullopt;
      const auto masked = simlm::apply_mask(win, plan, vocab);
      return mlm_loss_and_grad<float>(masked.input, masked.target, params, config, &grad,
                                      derive_seed(hyper.seed, 0xD50 + static_cast<std::uint64_t>(epoch), w));
    });
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

TrainResult train_finetune(const std::vector<normalizer::TokenWindow>& windows, const ModelParams<float>& pretrained,
                           const ModelConfig& config, const TrainHyper& hyper,
                           const std::vector<normalizer::TokenWindow>* validation, const EpochCallback& on_epoch) {
  if (windows.empty()) throw Error(ErrorKind::EmptyCorpus, "no fine-tuning windows");
  for (const auto& w : windows) {
    if (!w.label) throw Error(ErrorKind::MissingLabels, "fine-tuning window without a label");
  }
  config.validate();
  TrainResult result;
  result.params = pretrained;
  Adam opt{zero_params<float>(config), zero_params<float>(config)};
  std::size_t step = 0;
  const std::size_t total = steps_per_epoch(windows.size(), hyper) * static_cast<std::size_t>(hyper.epochs);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    Loop loop{config, hyper, result.params, opt, step, total};
    const auto order = epoch_order(windows.size(), hyper.max_windows_per_epoch, derive_seed(hyper.seed, 0xF7), epoch);
    const auto& params = result.params;
    auto log = loop.run_epoch(epoch + 1, order, [&](std::size_t w, ModelParams<float>& grad) -> std::optional<double> {
      const auto& win = windows[w];
      return classifier_loss_and_grad<float>(win.tokens, static_cast<int>(*win.label), params, config, &grad,
                                             derive_seed(hyper.seed, 0xC1A5 + static_cast<std::uint64_t>(epoch), w));
    });
    result.params.head_trained = true;
    if (validation && !validation->empty()) {
      std::vector<int> truth, pred(validation->size());
      for (const auto& v : *validation) truth.push_back(v.label ? static_cast<int>(*v.label) : -1);
      parallel_for(validation->size(), [&](std::size_t i) {
        const auto pr = classify_region((*validation)[i], result.params, config);
        pred[i] = static_cast<int>(std::max_element(pr.begin(), pr.end()) - pr.begin());
      });
      log.validation_macro_f1 = macro_f1(truth, pred);
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

}  // namespace packsense::encoder
