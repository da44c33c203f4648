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

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "packsense/common.hpp"
#include "packsense/normalizer.hpp"

namespace packsense::simlm {

using normalizer::TokenId;

enum class MaskAction : std::uint8_t { Mask, Randomize, Keep };

struct MaskRates {
  double select = 0.20;
  double mask = 0.40;
  double randomize = 0.50;
  double keep = 0.10;
};

/// Windows with fewer maskable tokens than this get an empty plan.
inline constexpr std::size_t kMinMaskable = 5;
/// Target value for positions that do not contribute to the loss.
inline constexpr std::int32_t kIgnoreIndex = -100;

struct MaskPlan {
  std::vector<std::uint32_t> selected;  // ascending token positions
  std::vector<MaskAction> actions;      // parallel to selected
  std::vector<TokenId> replacements;    // parallel; meaningful for Randomize
  std::vector<TokenId> originals;       // parallel
  bool degenerate = false;              // too few maskable tokens; plan is empty
};

struct MaskedWindow {
  std::vector<TokenId> input;
  std::vector<std::int32_t> target;
};

/// Positions eligible for selection: everything except [SOS] and [EOS].
std::vector<std::uint32_t> maskable_positions(const normalizer::TokenWindow& window);

/// Mnemonic position of each instruction span, or -1 when the span has none.
std::vector<std::int64_t> mnemonic_positions(const normalizer::TokenWindow& window,
                                             const normalizer::Vocabulary& vocab);

/// Component-aware selection and per-token action sampling. Returns an empty plan
/// with degenerate=true when fewer than kMinMaskable tokens are maskable.
MaskPlan plan_mask(const normalizer::TokenWindow& window, Rng& rng, const MaskRates& rates = {},
                   const normalizer::Vocabulary& vocab = normalizer::default_vocabulary());

/// Uniform draw from the original's token class, never equal to the original.
TokenId sample_replacement(TokenId original, Rng& rng, const normalizer::Vocabulary& vocab);

/// Throws Error{PlanMismatch} if the plan does not belong to the window.
MaskedWindow apply_mask(const normalizer::TokenWindow& window, const MaskPlan& plan,
                        const normalizer::Vocabulary& vocab = normalizer::default_vocabulary());

/// Mean negative log-softmax of the target ids over active positions. logits is
/// (positions x vocabulary). When grad is non-null it receives dLoss/dlogits.
/// Throws Error{NoTargets} when no position is active and Error{ShapeMismatch}
/// when shapes disagree.
template <typename Scalar>
Scalar mlm_loss(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& logits,
                const std::vector<std::int32_t>& target,
                Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>* grad = nullptr) {
  if (static_cast<std::size_t>(logits.rows()) != target.size()) {
    throw Error(ErrorKind::ShapeMismatch, "logits rows differ from target length");
  }
  std::size_t active = 0;
  for (auto t : target) {
    if (t == kIgnoreIndex) continue;
    if (t < 0 || t >= logits.cols()) throw Error(ErrorKind::ShapeMismatch, "target id outside vocabulary");
    ++active;
  }
  if (active == 0) throw Error(ErrorKind::NoTargets, "no selected positions");
  if (grad) grad->setZero(logits.rows(), logits.cols());
  const Scalar inv = Scalar(1) / static_cast<Scalar>(active);
  Scalar total = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const auto t = target[static_cast<std::size_t>(i)];
    if (t == kIgnoreIndex) continue;
    const Scalar mx = logits.row(i).maxCoeff();
    const Scalar lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    total += lse - logits(i, t);
    if (grad) {
      grad->row(i) = (logits.row(i).array() - lse).exp() * inv;
      (*grad)(i, t) -= inv;
    }
  }
  return total * inv;
}

}  // namespace packsense::simlm
