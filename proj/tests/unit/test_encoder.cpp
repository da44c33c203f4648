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

#include "packsense/encoder.hpp"
#include "packsense/simlm.hpp"

namespace packsense::encoder {
namespace {

ModelConfig tiny(int layers = 1, int d = 8) {
  ModelConfig c;
  c.layers = layers;
  c.heads = 2;
  c.d_model = d;
  c.d_ffn = 2 * d;
  c.vocab_size = static_cast<int>(normalizer::default_vocabulary().size());
  return c;
}

std::vector<TokenId> ids(std::initializer_list<TokenId> l) { return l; }

TEST(Config, ValidationAndJson) {
  auto c = tiny();
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(ModelConfig::from_json(c.to_json()), c);
  EXPECT_EQ(c.hash(), ModelConfig::from_json(c.to_json()).hash());
  c.heads = 3;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Init, SeededAndShaped) {
  const auto c = tiny();
  const auto a = init_params<double>(c, 1), b = init_params<double>(c, 1), d = init_params<double>(c, 2);
  EXPECT_TRUE(a.tok_emb.isApprox(b.tok_emb));
  EXPECT_FALSE(a.tok_emb.isApprox(d.tok_emb));
  EXPECT_EQ(a.tok_emb.rows(), c.vocab_size);
  EXPECT_EQ(a.tok_emb.cols(), c.d_model);
  EXPECT_EQ(a.layers.size(), 1u);
  EXPECT_TRUE((a.layers[0].ln1_g.array() == 1.0).all());
  EXPECT_FALSE(a.head_trained);
}

TEST(Forward, PaddingDoesNotChangeThePooledVector) {
  const auto c = tiny(2);
  const auto p = init_params<double>(c, 3);
  const auto x = ids({normalizer::kSos, 20, 21, 22, normalizer::kEos});
  auto padded = x;
  padded.insert(padded.end(), 4, normalizer::kPad);
  const auto a = forward(x, p, c), b = forward(padded, p, c);
  EXPECT_LT((a.pooled - b.pooled).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((a.hidden - b.hidden.topRows(x.size())).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forward, RejectsBadInput) {
  const auto c = tiny();
  const auto p = init_params<double>(c, 3);
  EXPECT_THROW(forward(std::vector<TokenId>{}, p, c), Error);
  EXPECT_THROW(forward(std::vector<TokenId>(513, 20), p, c), Error);
  EXPECT_THROW(forward(ids({0, c.vocab_size}), p, c), Error);
}

TEST(GradCheck, BothLossesAgreeWithFiniteDifferences) {
  const auto c = tiny(1, 8);
  auto p = init_params<double>(c, 4);
  // Larger weights than the default init so every term contributes.
  p.visit([](const std::string& name, Mat<double>& m) {
    if (name.find("_g") == std::string::npos) m *= 5.0;
  });
  GradCheckFixture f;
  f.input = ids({normalizer::kSos, 20, normalizer::kMask, 22, 23, normalizer::kEos, normalizer::kPad});
  f.target = {simlm::kIgnoreIndex, simlm::kIgnoreIndex, 21, simlm::kIgnoreIndex, 23, simlm::kIgnoreIndex,
              simlm::kIgnoreIndex};
  f.label = 2;
  const auto mlm = grad_check(c, p, LossKind::Mlm, f, 1e-5, 6, 1);
  EXPECT_LT(mlm.max_relative_error, 1e-4) << mlm.worst_tensor;
  EXPECT_GT(mlm.checked, 50u);
  const auto cls = grad_check(c, p, LossKind::Classifier, f, 1e-5, 6, 1);
  EXPECT_LT(cls.max_relative_error, 1e-4) << cls.worst_tensor;
}

TEST(Classify, UntrainedHeadIsRejected) {
  const auto c = tiny();
  const auto p = init_params<float>(c, 5);
  try {
    classify_ids(ids({0, 20, 1}), p, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UntrainedHead);
  }
}

TEST(MacroF1, HandComputed) {
  // class 0: tp 1 fp 0 fn 1 -> f1 2/3; class 1: tp 1 fp 1 fn 0 -> 2/3; class 2: tp 1 -> 1
  EXPECT_NEAR(macro_f1({0, 0, 1, 2}, {0, 1, 1, 2}), (2.0 / 3 + 2.0 / 3 + 1.0) / 3, 1e-12);
}

std::vector<normalizer::TokenWindow> toy_windows(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<normalizer::TokenWindow> out;
  for (std::size_t i = 0; i < n; ++i) {
    normalizer::TokenWindow w;
    const int label = static_cast<int>(i % 3);
    w.tokens.push_back(normalizer::kSos);
    for (int k = 0; k < 6; ++k) {
      const auto start = static_cast<std::uint32_t>(w.tokens.size());
      w.tokens.push_back(static_cast<TokenId>(20 + label * 5 + rng.uniform(3)));
      w.tokens.push_back(static_cast<TokenId>(40 + rng.uniform(3)));
      w.tokens.push_back(normalizer::kEos);
      w.instr_spans.emplace_back(start, static_cast<std::uint32_t>(w.tokens.size()));
    }
    w.label = static_cast<RegionLabel>(label);
    out.push_back(std::move(w));
  }
  return out;
}

TEST(Training, DeterministicAndLearnsASeparableTask) {
  auto c = tiny(1, 16);
  TrainHyper h;
  h.lr = 3e-3;
  h.epochs = 2;
  h.seed = 17;
  h.batch = 4;
  const auto windows = toy_windows(60, 1);
  const auto a = train_pretrain(windows, c, h);
  const auto b = train_pretrain(windows, c, h);
  ASSERT_EQ(a.log.size(), 2u);
  EXPECT_EQ(a.log.back().mean_loss, b.log.back().mean_loss);
  EXPECT_TRUE(a.params.tok_emb == b.params.tok_emb);

  h.epochs = 10;
  h.lr = 1e-2;
  const auto ft = train_finetune(windows, a.params, c, h);
  EXPECT_TRUE(ft.params.head_trained);
  const auto test = toy_windows(30, 2);
  std::vector<int> truth, pred;
  for (const auto& w : test) {
    const auto p = classify_region(w, ft.params, c);
    truth.push_back(static_cast<int>(*w.label));
    pred.push_back(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
    EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-9);
  }
  EXPECT_GT(macro_f1(truth, pred), 0.9);
}

TEST(Training, Contracts) {
  const auto c = tiny();
  TrainHyper h;
  try {
    train_pretrain({}, c, h);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyCorpus);
  }
  auto w = toy_windows(3, 1);
  w[1].label.reset();
  try {
    train_finetune(w, init_params<float>(c, 1), c, h);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingLabels);
  }
}

}  // namespace
}  // namespace packsense::encoder
