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

#include <gtest/gtest.h>

#include <cmath>

#include "packsense/simlm.hpp"

namespace packsense::simlm {
namespace {

using normalizer::TokenWindow;
using normalizer::Vocabulary;

TokenWindow sample_window(std::size_t instructions, std::uint64_t seed) {
  Rng rng(seed);
  Bytes code;
  // push ebp; mov ebp, esp; add eax, imm8; mov eax, [ebp+disp8] ... repeated
  for (std::size_t i = 0; i < instructions; ++i) {
    switch (rng.uniform(4)) {
      case 0: code.insert(code.end(), {0x55}); break;
      case 1: code.insert(code.end(), {0x89, 0xE5}); break;
      case 2: code.insert(code.end(), {0x83, 0xC0, rng.byte()}); break;
      default: code.insert(code.end(), {0x8B, 0x44, 0xB3, 0x10}); break;
    }
  }
  const auto img = binimage::load_image(code);
  const auto units = disasm::linear_sweep(img);
  return normalizer::window_from_units(units, binimage::valid_memory_range(img));
}

TEST(Maskable, ExcludesBoundaryTokens) {
  const auto w = sample_window(30, 1);
  for (auto p : maskable_positions(w)) {
    EXPECT_NE(w.tokens[p], normalizer::kSos);
    EXPECT_NE(w.tokens[p], normalizer::kEos);
  }
}

TEST(PlanMask, RespectsMutualExclusionAndBoundaries) {
  const auto& vocab = normalizer::default_vocabulary();
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const auto w = sample_window(40, 100 + t);
    const auto plan = plan_mask(w, rng);
    ASSERT_FALSE(plan.degenerate);
    ASSERT_TRUE(std::is_sorted(plan.selected.begin(), plan.selected.end()));
    const auto mnem = mnemonic_positions(w, vocab);
    std::vector<int> mn(w.instr_spans.size(), 0), op(w.instr_spans.size(), 0);
    for (auto pos : plan.selected) {
      ASSERT_NE(w.tokens[pos], normalizer::kSos);
      ASSERT_NE(w.tokens[pos], normalizer::kEos);
      for (std::size_t s = 0; s < w.instr_spans.size(); ++s) {
        const auto [lo, hi] = w.instr_spans[s];
        if (pos < lo || pos >= hi) continue;
        if (static_cast<std::int64_t>(pos) == mnem[s]) ++mn[s];
        else if (static_cast<std::int64_t>(pos) > mnem[s]) ++op[s];
      }
    }
    for (std::size_t s = 0; s < mn.size(); ++s) EXPECT_FALSE(mn[s] && op[s]);
  }
}

TEST(PlanMask, TooFewMaskableTokensIsDegenerate) {
  TokenWindow w;
  w.tokens = {normalizer::kSos, 30, normalizer::kEos};
  w.instr_spans = {{1, 3}};
  Rng rng(0);
  const auto plan = plan_mask(w, rng);
  EXPECT_TRUE(plan.degenerate);
  EXPECT_TRUE(plan.selected.empty());
}

TEST(PlanMask, RejectsRatesThatDoNotSumToOne) {
  Rng rng(0);
  MaskRates r;
  r.keep = 0.3;
  EXPECT_THROW(plan_mask(sample_window(20, 3), rng, r), Error);
}

TEST(Replacement, StaysInClassAndDiffers) {
  const auto& v = normalizer::default_vocabulary();
  Rng rng(4);
  for (int i = 0; i < 2000; ++i) {
    const TokenId orig = static_cast<TokenId>(rng.uniform(v.size()));
    const auto r = sample_replacement(orig, rng, v);
    if (v.members(v.token_class(orig)).size() > 1) EXPECT_NE(r, orig);
    EXPECT_EQ(v.token_class(r), v.token_class(orig));
  }
}

TEST(ApplyMask, WritesInputsAndTargets) {
  const auto w = sample_window(30, 5);
  Rng rng(6);
  const auto plan = plan_mask(w, rng);
  const auto m = apply_mask(w, plan);
  ASSERT_EQ(m.input.size(), w.tokens.size());
  std::size_t active = 0;
  for (std::size_t i = 0; i < m.target.size(); ++i) {
    if (m.target[i] != kIgnoreIndex) {
      ++active;
      EXPECT_EQ(m.target[i], w.tokens[i]);
    }
  }
  EXPECT_EQ(active, plan.selected.size());
  for (std::size_t i = 0; i < plan.selected.size(); ++i) {
    const auto pos = plan.selected[i];
    switch (plan.actions[i]) {
      case MaskAction::Mask: EXPECT_EQ(m.input[pos], normalizer::kMask); break;
      case MaskAction::Randomize: EXPECT_EQ(m.input[pos], plan.replacements[i]); break;
      case MaskAction::Keep: EXPECT_EQ(m.input[pos], w.tokens[pos]); break;
    }
  }
}

TEST(ApplyMask, ForeignPlanIsRejected) {
  const auto a = sample_window(30, 7);
  const auto b = sample_window(30, 8);
  Rng rng(9);
  auto plan = plan_mask(a, rng);
  bool differs = false;
  for (auto p : plan.selected) differs |= p >= b.tokens.size() || b.tokens[p] != a.tokens[p];
  if (differs) {
    try {
      apply_mask(b, plan);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::PlanMismatch);
    }
  }
  plan.actions.pop_back();
  EXPECT_THROW(apply_mask(a, plan), Error);
}

TEST(MlmLoss, MatchesDirectComputation) {
  Eigen::MatrixXd logits(3, 4);
  logits << 1, 2, 3, 4, 0, 0, 0, 0, -1, 5, 2, 0.5;
  const std::vector<std::int32_t> target{2, kIgnoreIndex, 1};
  double expect = 0;
  for (int r : {0, 2}) {
    double z = 0;
    for (int c = 0; c < 4; ++c) z += std::exp(logits(r, c));
    expect += std::log(z) - logits(r, target[static_cast<std::size_t>(r)]);
  }
  expect /= 2;
  Eigen::MatrixXd grad;
  EXPECT_NEAR(mlm_loss(logits, target, &grad), expect, 1e-12);
  EXPECT_DOUBLE_EQ(grad.row(1).norm(), 0.0);
  const double h = 1e-6;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      auto p = logits, m = logits;
      p(r, c) += h;
      m(r, c) -= h;
      EXPECT_NEAR(grad(r, c), (mlm_loss(p, target) - mlm_loss(m, target)) / (2 * h), 1e-8);
    }
  }
}

TEST(MlmLoss, Contracts) {
  Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(2, 3);
  try {
    mlm_loss(logits, {kIgnoreIndex, kIgnoreIndex});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoTargets);
  }
  try {
    mlm_loss(logits, {1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
}

}  // namespace
}  // namespace packsense::simlm
