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

#include "packsense/simlm.hpp"

#include <algorithm>
#include <cmath>

namespace packsense::simlm {

using normalizer::TokenClass;
using normalizer::TokenWindow;
using normalizer::Vocabulary;

std::vector<std::uint32_t> maskable_positions(const TokenWindow& window) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 1; i < window.tokens.size(); ++i) {
    const auto t = window.tokens[i];
    if (t != normalizer::kEos && t != normalizer::kSos) out.push_back(i);
  }
  return out;
}

std::vector<std::int64_t> mnemonic_positions(const TokenWindow& window, const Vocabulary& vocab) {
  std::vector<std::int64_t> out;
  out.reserve(window.instr_spans.size());
  for (const auto& [lo, hi] : window.instr_spans) {
    std::int64_t pos = -1;
    for (auto i = lo; i < hi; ++i) {
      if (vocab.token_class(window.tokens[i]) == TokenClass::Mnemonic) {
        pos = i;
        break;
      }
    }
    out.push_back(pos);
  }
  return out;
}

TokenId sample_replacement(TokenId original, Rng& rng, const Vocabulary& vocab) {
  const auto& pool = vocab.members(vocab.token_class(original));
  if (pool.size() < 2) return original;
  // Draw from the pool minus the original by skipping over its slot.
  const auto it = std::lower_bound(pool.begin(), pool.end(), original);
  const auto skip = static_cast<std::size_t>(it - pool.begin());
  std::size_t k = rng.uniform(pool.size() - 1);
  if (k >= skip) ++k;
  return pool[k];
}

MaskPlan plan_mask(const TokenWindow& window, Rng& rng, const MaskRates& rates, const Vocabulary& vocab) {
  if (std::abs(rates.mask + rates.randomize + rates.keep - 1.0) > 1e-9 || rates.select <= 0 || rates.select > 1) {
    throw Error(ErrorKind::InvalidSpec, "mask rates must sum to 1");
  }
  MaskPlan plan;
  const auto maskable = maskable_positions(window);
  if (maskable.size() < kMinMaskable) {
    plan.degenerate = true;
    return plan;
  }
  const std::size_t want =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(rates.select * static_cast<double>(maskable.size()))));

  // Per-position bookkeeping: owning span and whether it is the mnemonic slot.
  const auto n = window.tokens.size();
  std::vector<std::int32_t> span_of(n, -1);
  std::vector<std::uint8_t> is_mnemonic(n, 0), is_operand(n, 0);
  const auto mnem = mnemonic_positions(window, vocab);
  for (std::size_t s = 0; s < window.instr_spans.size(); ++s) {
    const auto [lo, hi] = window.instr_spans[s];
    for (auto i = lo; i < hi && i < n; ++i) {
      span_of[i] = static_cast<std::int32_t>(s);
      if (mnem[s] >= 0) {
        if (static_cast<std::int64_t>(i) == mnem[s]) is_mnemonic[i] = 1;
        else if (static_cast<std::int64_t>(i) > mnem[s] && window.tokens[i] != normalizer::kEos) is_operand[i] = 1;
      }
    }
  }
  std::vector<std::uint8_t> span_has_mnemonic(window.instr_spans.size(), 0), span_has_operand(window.instr_spans.size(), 0);

  // Draw without replacement. A draw that would break mutual exclusion is
  // rejected; since the constraint only tightens, it is discarded for good.
  std::vector<std::uint32_t> pool = maskable;
  std::vector<std::uint32_t> chosen;
  chosen.reserve(want);
  while (chosen.size() < want && !pool.empty()) {
    const std::size_t k = rng.uniform(pool.size());
    const std::uint32_t pos = pool[k];
    pool[k] = pool.back();
    pool.pop_back();
    const auto s = span_of[pos];
    if (s >= 0) {
      if (is_mnemonic[pos] && span_has_operand[static_cast<std::size_t>(s)]) continue;
      if (is_operand[pos] && span_has_mnemonic[static_cast<std::size_t>(s)]) continue;
      if (is_mnemonic[pos]) span_has_mnemonic[static_cast<std::size_t>(s)] = 1;
      if (is_operand[pos]) span_has_operand[static_cast<std::size_t>(s)] = 1;
    }
    chosen.push_back(pos);
  }
  std::sort(chosen.begin(), chosen.end());

  plan.selected = chosen;
  for (auto pos : chosen) {
    const TokenId orig = window.tokens[pos];
    const double u = rng.uniform01();
    MaskAction a = u < rates.mask ? MaskAction::Mask : (u < rates.mask + rates.randomize ? MaskAction::Randomize : MaskAction::Keep);
    TokenId repl = orig;
    if (a == MaskAction::Randomize) {
      repl = sample_replacement(orig, rng, vocab);
      if (repl == orig) a = MaskAction::Mask;
    }
    if (a == MaskAction::Mask) repl = normalizer::kMask;
    plan.actions.push_back(a);
    plan.replacements.push_back(repl);
    plan.originals.push_back(orig);
  }
  return plan;
}

MaskedWindow apply_mask(const TokenWindow& window, const MaskPlan& plan, const Vocabulary& vocab) {
  const auto n = plan.selected.size();
  if (plan.actions.size() != n || plan.replacements.size() != n || plan.originals.size() != n) {
    throw Error(ErrorKind::PlanMismatch, "plan arrays have inconsistent lengths");
  }
  MaskedWindow out;
  out.input = window.tokens;
  out.target.assign(window.tokens.size(), kIgnoreIndex);
  for (std::size_t i = 0; i < n; ++i) {
    const auto pos = plan.selected[i];
    if (pos >= window.tokens.size() || window.tokens[pos] != plan.originals[i]) {
      throw Error(ErrorKind::PlanMismatch, "plan position does not match window");
    }
    const auto r = plan.replacements[i];
    if (r < 0 || static_cast<std::size_t>(r) >= vocab.size()) throw Error(ErrorKind::PlanMismatch, "replacement id out of range");
    switch (plan.actions[i]) {
      case MaskAction::Mask: out.input[pos] = normalizer::kMask; break;
      case MaskAction::Randomize: out.input[pos] = r; break;
      case MaskAction::Keep: break;
    }
    out.target[pos] = plan.originals[i];
  }
  return out;
}

}  // namespace packsense::simlm
