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

#include "packsense/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "packsense/simlm.hpp"

namespace packsense::encoder {

namespace {

template <typename S>
using Col = Eigen::Matrix<S, Eigen::Dynamic, 1>;

constexpr double kLnEps = 1e-5;

template <typename S>
struct LnCache {
  Mat<S> xhat;
  Col<S> rstd;
};

template <typename S>
Mat<S> layer_norm(const Mat<S>& x, const Mat<S>& g, const Mat<S>& b, LnCache<S>* cache) {
  const auto d = static_cast<S>(x.cols());
  const Col<S> mu = x.rowwise().mean();
  Mat<S> xc = x.colwise() - mu;
  const Col<S> var = xc.array().square().rowwise().sum() / d;
  const Col<S> rstd = (var.array() + static_cast<S>(kLnEps)).rsqrt();
  xc.array().colwise() *= rstd.array();
  Mat<S> y = (xc.array().rowwise() * g.row(0).array()).rowwise() + b.row(0).array();
  if (cache) {
    cache->xhat = std::move(xc);
    cache->rstd = rstd;
  }
  return y;
}

template <typename S>
Mat<S> layer_norm_backward(const Mat<S>& dy, const Mat<S>& g, const LnCache<S>& c, Mat<S>& dg, Mat<S>& db) {
  dg += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  db += dy.colwise().sum();
  const Mat<S> dxhat = dy.array().rowwise() * g.row(0).array();
  const Col<S> m1 = dxhat.rowwise().mean();
  const Col<S> m2 = (dxhat.array() * c.xhat.array()).rowwise().mean();
  Mat<S> dx = dxhat.colwise() - m1;
  dx.array() -= c.xhat.array().colwise() * m2.array();
  dx.array().colwise() *= c.rstd.array();
  return dx;
}

// tanh-form GeLU; t caches the inner tanh for the backward pass.
template <typename S>
Mat<S> gelu(const Mat<S>& u, Mat<S>* t_out) {
  const S c = static_cast<S>(0.7978845608028654);  // sqrt(2/pi)
  const S k = static_cast<S>(0.044715);
  Mat<S> t = (c * (u.array() + k * u.array().cube())).tanh().matrix();
  Mat<S> y = (static_cast<S>(0.5) * u.array() * (static_cast<S>(1) + t.array())).matrix();
  if (t_out) *t_out = std::move(t);
  return y;
}

template <typename S>
Mat<S> gelu_backward(const Mat<S>& dy, const Mat<S>& u, const Mat<S>& t) {
  const S c = static_cast<S>(0.7978845608028654);
  const S k = static_cast<S>(0.044715);
  const auto one = static_cast<S>(1);
  const auto half = static_cast<S>(0.5);
  auto d = half * (one + t.array()) +
           half * u.array() * (one - t.array().square()) * c * (one + 3 * k * u.array().square());
  return (dy.array() * d).matrix();
}

template <typename S>
Mat<S> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  Mat<S> m(rows, cols);
  const S keep = static_cast<S>(1.0 / (1.0 - p));
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform01() < p ? S(0) : keep;
  }
  return m;
}

template <typename S>
struct LayerCache {
  LnCache<S> ln1;
  Mat<S> a, q, k, v;
  std::vector<Mat<S>> probs;  // one per head
  Mat<S> o;
  Mat<S> drop1;
  LnCache<S> ln2;
  Mat<S> b, u, t, g;
  Mat<S> drop2;
};

template <typename S>
struct Cache {
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> valid;  // non-pad positions
  std::size_t valid_count = 0;
  Mat<S> drop0;
  std::vector<LayerCache<S>> layers;
  LnCache<S> lnf;
  Mat<S> hidden;
};

void check_ids(const std::vector<TokenId>& ids, const ModelConfig& config) {
  if (ids.empty() || static_cast<int>(ids.size()) > config.max_len) {
    throw Error(ErrorKind::ShapeMismatch, "input length must be in [1, max_len]");
  }
  for (auto id : ids) {
    if (id < 0 || id >= config.vocab_size) throw Error(ErrorKind::ShapeMismatch, "token id outside vocabulary");
  }
}

template <typename S>
ForwardOutput<S> run_forward(const std::vector<TokenId>& ids, const ModelParams<S>& p, const ModelConfig& cfg,
                             Cache<S>* cache, Rng* rng) {
  check_ids(ids, cfg);
  const auto n = static_cast<Eigen::Index>(ids.size());
  const Eigen::Index d = cfg.d_model;
  const int H = cfg.heads;
  const Eigen::Index hd = d / H;
  const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(hd)));
  const bool drop = rng && cfg.dropout > 0.0;

  std::vector<std::uint8_t> valid(ids.size());
  std::size_t valid_count = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    valid[i] = ids[i] != normalizer::kPad;
    valid_count += valid[i];
  }
  if (valid_count == 0) throw Error(ErrorKind::ShapeMismatch, "input has no non-pad positions");

  Mat<S> h(n, d);
  for (Eigen::Index i = 0; i < n; ++i) h.row(i) = p.tok_emb.row(ids[static_cast<std::size_t>(i)]) + p.pos_emb.row(i);
  if (drop) {
    Mat<S> m = dropout_mask<S>(n, d, cfg.dropout, *rng);
    h.array() *= m.array();
    if (cache) cache->drop0 = std::move(m);
  }
  if (cache) {
    cache->ids = ids;
    cache->valid = valid;
    cache->valid_count = valid_count;
    cache->layers.resize(p.layers.size());
  }

  Mat<S> scores(n, n);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& L = p.layers[l];
    LayerCache<S> local;
    LayerCache<S>& c = cache ? cache->layers[l] : local;

    c.a = layer_norm(h, L.ln1_g, L.ln1_b, cache ? &c.ln1 : nullptr);
    c.q.noalias() = c.a * L.wq;
    c.q.rowwise() += L.bq.row(0);
    c.k.noalias() = c.a * L.wk;
    c.k.rowwise() += L.bk.row(0);
    c.v.noalias() = c.a * L.wv;
    c.v.rowwise() += L.bv.row(0);
    c.o.resize(n, d);
    c.probs.resize(static_cast<std::size_t>(H));
    for (int hh = 0; hh < H; ++hh) {
      const auto q = c.q.middleCols(hh * hd, hd);
      const auto k = c.k.middleCols(hh * hd, hd);
      const auto v = c.v.middleCols(hh * hd, hd);
      scores.noalias() = q * k.transpose();
      scores *= scale;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!valid[static_cast<std::size_t>(j)]) scores.col(j).setConstant(-std::numeric_limits<S>::infinity());
      }
      const Col<S> mx = scores.rowwise().maxCoeff();
      Mat<S>& P = c.probs[static_cast<std::size_t>(hh)];
      P = (scores.colwise() - mx).array().exp();
      const Col<S> sum = P.rowwise().sum();
      P.array().colwise() /= sum.array();
      c.o.middleCols(hh * hd, hd).noalias() = P * v;
    }
    Mat<S> attn = c.o * L.wo;
    attn.rowwise() += L.bo.row(0);
    if (drop) {
      c.drop1 = dropout_mask<S>(n, d, cfg.dropout, *rng);
      attn.array() *= c.drop1.array();
    }
    h += attn;

    c.b = layer_norm(h, L.ln2_g, L.ln2_b, cache ? &c.ln2 : nullptr);
    c.u.noalias() = c.b * L.w1;
    c.u.rowwise() += L.b1.row(0);
    c.g = gelu(c.u, cache ? &c.t : nullptr);
    Mat<S> f = c.g * L.w2;
    f.rowwise() += L.b2.row(0);
    if (drop) {
      c.drop2 = dropout_mask<S>(n, d, cfg.dropout, *rng);
      f.array() *= c.drop2.array();
    }
    h += f;
  }

  ForwardOutput<S> out;
  out.hidden = layer_norm(h, p.lnf_g, p.lnf_b, cache ? &cache->lnf : nullptr);
  out.pooled = Mat<S>::Zero(1, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (valid[static_cast<std::size_t>(i)]) out.pooled += out.hidden.row(i);
  }
  out.pooled /= static_cast<S>(valid_count);
  if (cache) cache->hidden = out.hidden;
  return out;
}

// Backpropagates dhidden (gradient w.r.t. the final layer-norm output).
template <typename S>
void run_backward(const Mat<S>& dhidden, const ModelParams<S>& p, const ModelConfig& cfg, const Cache<S>& cache,
                  ModelParams<S>& g) {
  const Eigen::Index n = dhidden.rows();
  const Eigen::Index d = cfg.d_model;
  const int H = cfg.heads;
  const Eigen::Index hd = d / H;
  const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(hd)));
  const bool drop = cfg.dropout > 0.0 && cache.drop0.size() > 0;

  Mat<S> dh = layer_norm_backward(dhidden, p.lnf_g, cache.lnf, g.lnf_g, g.lnf_b);
  Mat<S> dP(n, n), dS(n, n);
  for (std::size_t li = p.layers.size(); li-- > 0;) {
    const auto& L = p.layers[li];
    auto& G = g.layers[li];
    const auto& c = cache.layers[li];

    // Feed-forward branch.
    Mat<S> df = dh;
    if (drop) df.array() *= c.drop2.array();
    G.w2.noalias() += c.g.transpose() * df;
    G.b2 += df.colwise().sum();
    Mat<S> dg = df * L.w2.transpose();
    const Mat<S> du = gelu_backward(dg, c.u, c.t);
    G.w1.noalias() += c.b.transpose() * du;
    G.b1 += du.colwise().sum();
    const Mat<S> db = du * L.w1.transpose();
    dh += layer_norm_backward(db, L.ln2_g, c.ln2, G.ln2_g, G.ln2_b);

    // Attention branch.
    Mat<S> dattn = dh;
    if (drop) dattn.array() *= c.drop1.array();
    G.wo.noalias() += c.o.transpose() * dattn;
    G.bo += dattn.colwise().sum();
    const Mat<S> dO = dattn * L.wo.transpose();
    Mat<S> dq(n, d), dk(n, d), dv(n, d);
    for (int hh = 0; hh < H; ++hh) {
      const auto& P = c.probs[static_cast<std::size_t>(hh)];
      const auto dOh = dO.middleCols(hh * hd, hd);
      dP.noalias() = dOh * c.v.middleCols(hh * hd, hd).transpose();
      dv.middleCols(hh * hd, hd).noalias() = P.transpose() * dOh;
      const Col<S> rs = (dP.array() * P.array()).rowwise().sum();
      dS = (P.array() * (dP.colwise() - rs).array()).matrix();
      dS *= scale;
      dq.middleCols(hh * hd, hd).noalias() = dS * c.k.middleCols(hh * hd, hd);
      dk.middleCols(hh * hd, hd).noalias() = dS.transpose() * c.q.middleCols(hh * hd, hd);
    }
    G.wq.noalias() += c.a.transpose() * dq;
    G.bq += dq.colwise().sum();
    G.wk.noalias() += c.a.transpose() * dk;
    G.bk += dk.colwise().sum();
    G.wv.noalias() += c.a.transpose() * dv;
    G.bv += dv.colwise().sum();
    Mat<S> da = dq * L.wq.transpose();
    da.noalias() += dk * L.wk.transpose();
    da.noalias() += dv * L.wv.transpose();
    dh += layer_norm_backward(da, L.ln1_g, c.ln1, G.ln1_g, G.ln1_b);
  }
  if (drop) dh.array() *= cache.drop0.array();
  for (Eigen::Index i = 0; i < n; ++i) {
    g.tok_emb.row(cache.ids[static_cast<std::size_t>(i)]) += dh.row(i);
    g.pos_emb.row(i) += dh.row(i);
  }
}

template <typename S>
Mat<S> softmax_row(const Mat<S>& logits) {
  const S mx = logits.maxCoeff();
  Mat<S> e = (logits.array() - mx).exp();
  return e / e.sum();
}

}  // namespace

void ModelConfig::validate() const {
  if (layers < 1 || heads < 1 || d_model < 1 || d_ffn < 1 || vocab_size < 1) {
    throw Error(ErrorKind::InvalidSpec, "model dimensions must be positive");
  }
  if (d_model % heads != 0) throw Error(ErrorKind::InvalidSpec, "d_model must be divisible by heads");
  if (max_len != 512) throw Error(ErrorKind::InvalidSpec, "max_len is fixed at 512");
  if (dropout < 0.0 || dropout >= 1.0) throw Error(ErrorKind::InvalidSpec, "dropout must be in [0, 1)");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"layers", layers},   {"heads", heads},           {"d_model", d_model},   {"d_ffn", d_ffn},
          {"max_len", max_len}, {"vocab_size", vocab_size}, {"dropout", dropout},   {"activation", "gelu"},
          {"pool_activation", "tanh"}, {"classes", kClasses}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.layers = j.at("layers").get<int>();
    c.heads = j.at("heads").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.d_ffn = j.at("d_ffn").get<int>();
    c.max_len = j.at("max_len").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::CorruptMetadata, std::string("model config: ") + e.what());
  }
}

std::string ModelConfig::hash() const { return to_hex(sha256(std::string_view(to_json().dump()))); }

template <typename S>
ModelParams<S> zero_params(const ModelConfig& cfg) {
  cfg.validate();
  const Eigen::Index d = cfg.d_model, f = cfg.d_ffn, V = cfg.vocab_size;
  ModelParams<S> p;
  p.tok_emb = Mat<S>::Zero(V, d);
  p.pos_emb = Mat<S>::Zero(cfg.max_len, d);
  p.layers.resize(static_cast<std::size_t>(cfg.layers));
  for (auto& L : p.layers) {
    for (Mat<S>* w : {&L.wq, &L.wk, &L.wv, &L.wo}) *w = Mat<S>::Zero(d, d);
    for (Mat<S>* b : {&L.bq, &L.bk, &L.bv, &L.bo, &L.ln1_b, &L.ln2_b, &L.b2}) *b = Mat<S>::Zero(1, d);
    L.ln1_g = Mat<S>::Zero(1, d);
    L.ln2_g = Mat<S>::Zero(1, d);
    L.w1 = Mat<S>::Zero(d, f);
    L.b1 = Mat<S>::Zero(1, f);
    L.w2 = Mat<S>::Zero(f, d);
  }
  p.lnf_g = Mat<S>::Zero(1, d);
  p.lnf_b = Mat<S>::Zero(1, d);
  p.mlm_b = Mat<S>::Zero(1, V);
  p.cls_w1 = Mat<S>::Zero(d, d);
  p.cls_b1 = Mat<S>::Zero(1, d);
  p.cls_w2 = Mat<S>::Zero(d, ModelConfig::kClasses);
  p.cls_b2 = Mat<S>::Zero(1, ModelConfig::kClasses);
  return p;
}

template <typename S>
ModelParams<S> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams<S> p = zero_params<S>(cfg);
  Rng rng(seed);
  p.visit([&](const std::string& name, Mat<S>& m) {
    const bool gain = name.ends_with("_g");
    const bool vector = m.rows() == 1;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (gain) m(i, j) = S(1);
        else if (!vector) m(i, j) = static_cast<S>(rng.normal(0.0, 0.02));
      }
    }
  });
  return p;
}

template <typename S>
ForwardOutput<S> forward(const std::vector<TokenId>& ids, const ModelParams<S>& params, const ModelConfig& config) {
  return run_forward<S>(ids, params, config, nullptr, nullptr);
}

template <typename S>
Mat<S> mlm_logits(const Mat<S>& hidden, const ModelParams<S>& params) {
  if (hidden.cols() != params.tok_emb.cols()) throw Error(ErrorKind::ShapeMismatch, "hidden width mismatch");
  Mat<S> logits = hidden * params.tok_emb.transpose();
  logits.rowwise() += params.mlm_b.row(0);
  return logits;
}

template <typename S>
Mat<S> classifier_logits(const Mat<S>& pooled, const ModelParams<S>& params) {
  if (pooled.rows() != 1 || pooled.cols() != params.cls_w1.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "pooled vector has the wrong shape");
  }
  Mat<S> z = (pooled * params.cls_w1 + params.cls_b1).array().tanh().matrix();
  return z * params.cls_w2 + params.cls_b2;
}

std::array<double, 3> classify_ids(const std::vector<TokenId>& ids, const ModelParams<float>& params,
                                   const ModelConfig& config) {
  if (!params.head_trained) throw Error(ErrorKind::UntrainedHead, "classifier head has not been fine-tuned");
  const auto out = forward<float>(ids, params, config);
  const Mat<double> logits = classifier_logits<float>(out.pooled, params).cast<double>();
  const Mat<double> pr = softmax_row<double>(logits);
  return {pr(0, 0), pr(0, 1), pr(0, 2)};
}

std::array<double, 3> classify_region(const normalizer::TokenWindow& window, const ModelParams<float>& params,
                                      const ModelConfig& config) {
  return classify_ids(window.tokens, params, config);
}

template <typename S>
S mlm_loss_and_grad(const std::vector<TokenId>& input, const std::vector<std::int32_t>& target,
                    const ModelParams<S>& params, const ModelConfig& config, ModelParams<S>* grad,
                    std::uint64_t dropout_seed) {
  if (target.size() != input.size()) throw Error(ErrorKind::ShapeMismatch, "target length differs from input");
  Cache<S> cache;
  Rng rng(dropout_seed);
  const auto out = run_forward<S>(input, params, config, grad ? &cache : nullptr, &rng);

  // Only target rows influence the loss, so only those logits are formed.
  std::vector<Eigen::Index> rows;
  std::vector<std::int32_t> compact;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] != simlm::kIgnoreIndex) {
      rows.push_back(static_cast<Eigen::Index>(i));
      compact.push_back(target[i]);
    }
  }
  if (rows.empty()) throw Error(ErrorKind::NoTargets, "no selected positions");
  Mat<S> hs(static_cast<Eigen::Index>(rows.size()), out.hidden.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) hs.row(static_cast<Eigen::Index>(r)) = out.hidden.row(rows[r]);
  const Mat<S> logits = mlm_logits<S>(hs, params);
  Mat<S> dlogits;
  const S loss = simlm::mlm_loss<S>(logits, compact, grad ? &dlogits : nullptr);
  if (grad) {
    grad->tok_emb.noalias() += dlogits.transpose() * hs;
    grad->mlm_b += dlogits.colwise().sum();
    const Mat<S> dhs = dlogits * params.tok_emb;
    Mat<S> dhidden = Mat<S>::Zero(out.hidden.rows(), out.hidden.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) dhidden.row(rows[r]) += dhs.row(static_cast<Eigen::Index>(r));
    run_backward<S>(dhidden, params, config, cache, *grad);
  }
  return loss;
}

template <typename S>
S classifier_loss_and_grad(const std::vector<TokenId>& input, int label, const ModelParams<S>& params,
                           const ModelConfig& config, ModelParams<S>* grad, std::uint64_t dropout_seed) {
  if (label < 0 || label >= ModelConfig::kClasses) throw Error(ErrorKind::MissingLabels, "label out of range");
  Cache<S> cache;
  Rng rng(dropout_seed);
  const auto out = run_forward<S>(input, params, config, grad ? &cache : nullptr, &rng);
  const Mat<S> z = (out.pooled * params.cls_w1 + params.cls_b1).array().tanh().matrix();
  const Mat<S> logits = z * params.cls_w2 + params.cls_b2;
  const S mx = logits.maxCoeff();
  const S lse = mx + std::log((logits.array() - mx).exp().sum());
  const S loss = lse - logits(0, label);
  if (grad) {
    Mat<S> dlogits = (logits.array() - lse).exp().matrix();
    dlogits(0, label) -= S(1);
    grad->cls_w2.noalias() += z.transpose() * dlogits;
    grad->cls_b2 += dlogits;
    const Mat<S> dz = dlogits * params.cls_w2.transpose();
    const Mat<S> du = (dz.array() * (S(1) - z.array().square())).matrix();
    grad->cls_w1.noalias() += out.pooled.transpose() * du;
    grad->cls_b1 += du;
    const Mat<S> dpooled = (du * params.cls_w1.transpose()) / static_cast<S>(cache.valid_count);
    Mat<S> dhidden = Mat<S>::Zero(out.hidden.rows(), out.hidden.cols());
    for (Eigen::Index i = 0; i < dhidden.rows(); ++i) {
      if (cache.valid[static_cast<std::size_t>(i)]) dhidden.row(i) = dpooled;
    }
    run_backward<S>(dhidden, params, config, cache, *grad);
  }
  return loss;
}

GradCheckResult grad_check(const ModelConfig& config_in, const ModelParams<double>& params, LossKind kind,
                           const GradCheckFixture& fixture, double eps, std::size_t samples_per_tensor,
                           std::uint64_t seed) {
  ModelConfig config = config_in;
  config.dropout = 0.0;
  auto loss_at = [&](const ModelParams<double>& p, ModelParams<double>* g) {
    return kind == LossKind::Mlm ? mlm_loss_and_grad<double>(fixture.input, fixture.target, p, config, g)
                                 : classifier_loss_and_grad<double>(fixture.input, fixture.label, p, config, g);
  };
  ModelParams<double> analytic = zero_params<double>(config);
  loss_at(params, &analytic);

  ModelParams<double> work = params;
  std::vector<std::pair<std::string, Mat<double>*>> tensors;
  work.visit([&](const std::string& name, Mat<double>& m) { tensors.emplace_back(name, &m); });
  std::vector<const Mat<double>*> grads;
  analytic.visit([&](const std::string&, const Mat<double>& m) { grads.push_back(&m); });

  GradCheckResult result;
  Rng rng(seed);
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    auto& [name, m] = tensors[t];
    const auto total = static_cast<std::size_t>(m->size());
    const std::size_t count = std::min(samples_per_tensor, total);
    for (std::size_t s = 0; s < count; ++s) {
      const auto idx = static_cast<Eigen::Index>(count == total ? s : rng.uniform(total));
      double& w = m->data()[idx];
      const double saved = w;
      w = saved + eps;
      const double up = loss_at(work, nullptr);
      w = saved - eps;
      const double down = loss_at(work, nullptr);
      w = saved;
      const double numeric = (up - down) / (2 * eps);
      const double a = grads[t]->data()[idx];
      const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-6);
      ++result.checked;
      if (rel >= result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_tensor = name;
      }
    }
  }
  return result;
}

double macro_f1(const std::vector<int>& truth, const std::vector<int>& predicted) {
  if (truth.size() != predicted.size()) throw Error(ErrorKind::LengthMismatch, "macro_f1 inputs differ in length");
  double sum = 0.0;
  for (int c = 0; c < ModelConfig::kClasses; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      tp += truth[i] == c && predicted[i] == c;
      fp += truth[i] != c && predicted[i] == c;
      fn += truth[i] == c && predicted[i] != c;
    }
    sum += tp + fp + fn > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
  }
  return sum / ModelConfig::kClasses;
}

#define PACKSENSE_INSTANTIATE(S)                                                                                    \
  template ModelParams<S> zero_params<S>(const ModelConfig&);                                                       \
  template ModelParams<S> init_params<S>(const ModelConfig&, std::uint64_t);                                        \
  template ForwardOutput<S> forward<S>(const std::vector<TokenId>&, const ModelParams<S>&, const ModelConfig&);     \
  template Mat<S> mlm_logits<S>(const Mat<S>&, const ModelParams<S>&);                                              \
  template Mat<S> classifier_logits<S>(const Mat<S>&, const ModelParams<S>&);                                       \
  template S mlm_loss_and_grad<S>(const std::vector<TokenId>&, const std::vector<std::int32_t>&,                    \
                                  const ModelParams<S>&, const ModelConfig&, ModelParams<S>*, std::uint64_t);       \
  template S classifier_loss_and_grad<S>(const std::vector<TokenId>&, int, const ModelParams<S>&, const ModelConfig&, \
                                         ModelParams<S>*, std::uint64_t);

PACKSENSE_INSTANTIATE(float)
PACKSENSE_INSTANTIATE(double)
#undef PACKSENSE_INSTANTIATE

}  // namespace packsense::encoder
