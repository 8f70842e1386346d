// Copyright 2026 The EGRM Authors. All Rights Reserved.
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

// Teacher-forced forward pass with caches, and its reverse pass.

#include <cmath>

#include "egrm/model.h"
#include "model_internal.h"

namespace egrm {

using internal::CellCache;
using internal::CellGrad;
using internal::CellView;
using internal::cell_backward;
using internal::cell_forward;
using internal::cell_grad;
using internal::cell_view;

namespace {

struct StepCache {
  TokenId prev = kBosId;
  TokenId gold = kEosId;
  Vector k_prev;     // query for attention
  Vector weights;    // alpha
  MatrixRM att_hidden;  // tanh(keys + W_q k_prev), additive only
  std::vector<CellCache> cells;
  Vector features;
  Vector dscores;    // dL/ds for this step, unscaled
};

struct PairStats {
  double loss = 0.0;
  double abs_log_z = 0.0;
  std::size_t tokens = 0;
};

class PairGradient {
 public:
  PairGradient(const Parameters& params, Parameters& grads, double beta)
      : p_(params), g_(grads), cfg_(params.config()), lay_(params.layout()),
        beta_(beta) {}

  PairStats run(const ParallelPair& pair) {
    forward_encoder(pair.source);
    PairStats stats = forward_decoder(pair.target);
    backward_decoder();
    backward_encoder(pair.source);
    return stats;
  }

 private:
  void forward_encoder(std::span<const TokenId> source) {
    if (source.empty()) throw Error("loss_and_grads: empty source");
    const auto M = static_cast<Eigen::Index>(source.size());
    const Eigen::Index H = cfg_.hidden_dim;
    MatrixRM inputs(M, cfg_.embed_dim);
    for (Eigen::Index t = 0; t < M; ++t) {
      if (source[t] >= cfg_.vocab_size) throw Error("source id out of range");
      inputs.row(t) = p_.tensor(lay_.embedding).row(source[t]);
    }
    enc_cache_.assign(cfg_.encoder_layers, std::vector<CellCache>(M));
    for (std::uint32_t l = 0; l < cfg_.encoder_layers; ++l) {
      const CellView cv = cell_view(p_, lay_.encoder[l]);
      MatrixRM outputs(M, H);
      Vector h = Vector::Zero(H), c = Vector::Zero(H), hn, cn;
      for (Eigen::Index t = 0; t < M; ++t) {
        const Vector x = inputs.row(t).transpose();
        cell_forward(cfg_.cell, cv, x, h, c, &hn, &cn, &enc_cache_[l][t]);
        h = hn;
        c = cn;
        outputs.row(t) = h.transpose();
        if (l > 0 && cfg_.residual) outputs.row(t) += inputs.row(t);
      }
      inputs = std::move(outputs);
    }
    q_ = std::move(inputs);
    if (additive()) keys_ = q_ * p_.tensor(lay_.att_key).transpose();
  }

  PairStats forward_decoder(std::span<const TokenId> target) {
    if (target.empty()) throw Error("loss_and_grads: empty target");
    const Eigen::Index E = cfg_.embed_dim, H = cfg_.hidden_dim;
    const std::size_t L = cfg_.decoder_layers;
    const bool lstm = cfg_.cell == CellType::kLstm;
    const Vector last = q_.row(q_.rows() - 1).transpose();
    std::vector<Vector> hidden(L, last);
    std::vector<Vector> cell(L, Vector::Zero(H));
    Vector top = last;

    PairStats stats;
    steps_.assign(target.size() + 1, StepCache{});
    TokenId prev = kBosId;
    for (std::size_t i = 0; i < steps_.size(); ++i) {
      StepCache& sc = steps_[i];
      sc.prev = prev;
      sc.gold = i < target.size() ? target[i] : kEosId;
      if (sc.gold >= cfg_.vocab_size) throw Error("target id out of range");
      sc.k_prev = top;

      Vector energies;
      if (additive()) {
        const Vector query = p_.tensor(lay_.att_query) * top;
        sc.att_hidden =
            (keys_.rowwise() + query.transpose()).array().tanh().matrix();
        energies = sc.att_hidden * p_.tensor(lay_.att_v).row(0).transpose();
      } else {
        energies = q_ * top;
      }
      sc.weights = (energies.array() - energies.maxCoeff()).exp().matrix();
      sc.weights /= sc.weights.sum();
      const Vector context = q_.transpose() * sc.weights;
      const Vector emb = p_.tensor(lay_.embedding).row(prev).transpose();

      Vector x(E + H);
      x << emb, context;
      sc.cells.resize(L);
      for (std::size_t l = 0; l < L; ++l) {
        Vector hn, cn;
        cell_forward(cfg_.cell, cell_view(p_, lay_.decoder[l]), x, hidden[l],
                     cell[l], &hn, &cn, &sc.cells[l]);
        hidden[l] = hn;
        if (lstm) cell[l] = cn;
        Vector y = hn;
        if (l > 0 && cfg_.residual) y += x;
        x = std::move(y);
      }
      top = x;
      sc.features.resize(2 * H + E);
      sc.features << top, context, emb;

      const Vector scores = p_.tensor(lay_.out_w) * sc.features +
                            p_.tensor(lay_.out_b).col(0);
      const double log_z = log_sum_exp(scores);
      stats.loss += -(scores[sc.gold] - log_z) + beta_ * log_z * log_z;
      stats.abs_log_z += std::abs(log_z);
      ++stats.tokens;
      // d/ds [-log p_gold + beta (log Z)^2] = (1 + 2 beta log Z) p - onehot
      sc.dscores = ((scores.array() - log_z).exp() *
                    (1.0 + 2.0 * beta_ * log_z)).matrix();
      sc.dscores[sc.gold] -= 1.0;
      prev = sc.gold;
    }
    return stats;
  }

  void backward_decoder() {
    const Eigen::Index E = cfg_.embed_dim, H = cfg_.hidden_dim;
    const std::size_t L = cfg_.decoder_layers;
    const auto M = q_.rows();
    dq_ = MatrixRM::Zero(M, H);
    std::vector<Vector> dh_carry(L, Vector::Zero(H));
    std::vector<Vector> dc_carry(L, Vector::Zero(H));
    Vector dtop_carry = Vector::Zero(H);

    auto gw = g_.tensor(lay_.out_w);
    auto gb = g_.tensor(lay_.out_b);
    auto gemb = g_.tensor(lay_.embedding);
    const auto w_out = p_.tensor(lay_.out_w);

    for (std::size_t ii = steps_.size(); ii-- > 0;) {
      const StepCache& sc = steps_[ii];
      gw.noalias() += sc.dscores * sc.features.transpose();
      gb.col(0) += sc.dscores;
      const Vector dfeat = w_out.transpose() * sc.dscores;

      Vector dy = dfeat.head(H) + dtop_carry;
      Vector dctx = dfeat.segment(H, H);
      Vector demb = dfeat.tail(E);

      for (std::size_t l = L; l-- > 0;) {
        const CellView cv = cell_view(p_, lay_.decoder[l]);
        CellGrad cg = cell_grad(g_, lay_.decoder[l]);
        const Vector dh = dy + dh_carry[l];
        Vector dx, dh_prev, dc_prev;
        cell_backward(cfg_.cell, cv, cg, sc.cells[l], dh, dc_carry[l], &dx,
                      &dh_prev, &dc_prev);
        dh_carry[l] = std::move(dh_prev);
        if (cfg_.cell == CellType::kLstm) dc_carry[l] = std::move(dc_prev);
        if (l > 0) {
          if (cfg_.residual) dx += dy;
          dy = std::move(dx);
        } else {
          demb += dx.head(E);
          dctx += dx.tail(H);
        }
      }
      gemb.row(sc.prev) += demb.transpose();

      // Attention: c = q^T alpha, alpha = softmax(e).
      const Vector dalpha = q_ * dctx;
      dq_.noalias() += sc.weights * dctx.transpose();
      const Vector de =
          (sc.weights.array() * (dalpha.array() - sc.weights.dot(dalpha)))
              .matrix();
      Vector dk_prev;
      if (additive()) {
        const auto v = p_.tensor(lay_.att_v).row(0);
        const MatrixRM dpre =
            ((de * v).array() * (1.0 - sc.att_hidden.array().square()))
                .matrix();
        g_.tensor(lay_.att_v).row(0) += (sc.att_hidden.transpose() * de).transpose();
        const Vector dquery = dpre.colwise().sum().transpose();
        g_.tensor(lay_.att_query).noalias() += dquery * sc.k_prev.transpose();
        dk_prev = p_.tensor(lay_.att_query).transpose() * dquery;
        g_.tensor(lay_.att_key).noalias() += dpre.transpose() * q_;
        dq_.noalias() += dpre * p_.tensor(lay_.att_key);
      } else {
        dk_prev = q_.transpose() * de;
        dq_.noalias() += de * sc.k_prev.transpose();
      }
      dtop_carry = std::move(dk_prev);
    }

    // The initial decoder state (top and every layer) is q_M.
    Vector dlast = dtop_carry;
    for (std::size_t l = 0; l < L; ++l) dlast += dh_carry[l];
    dq_.row(M - 1) += dlast.transpose();
  }

  void backward_encoder(std::span<const TokenId> source) {
    const Eigen::Index H = cfg_.hidden_dim;
    const auto M = q_.rows();
    MatrixRM dy = std::move(dq_);
    for (std::size_t l = cfg_.encoder_layers; l-- > 0;) {
      const CellView cv = cell_view(p_, lay_.encoder[l]);
      CellGrad cg = cell_grad(g_, lay_.encoder[l]);
      const Eigen::Index in_dim = l == 0 ? cfg_.embed_dim : H;
      MatrixRM dx_all(M, in_dim);
      Vector dh_c = Vector::Zero(H), dc_c = Vector::Zero(H);
      for (Eigen::Index t = M; t-- > 0;) {
        const Vector dh = dy.row(t).transpose() + dh_c;
        Vector dx, dh_prev, dc_prev;
        cell_backward(cfg_.cell, cv, cg, enc_cache_[l][t], dh, dc_c, &dx,
                      &dh_prev, &dc_prev);
        dh_c = std::move(dh_prev);
        if (cfg_.cell == CellType::kLstm) dc_c = std::move(dc_prev);
        if (l > 0 && cfg_.residual) dx += dy.row(t).transpose();
        dx_all.row(t) = dx.transpose();
      }
      dy = std::move(dx_all);
    }
    auto gemb = g_.tensor(lay_.embedding);
    for (Eigen::Index t = 0; t < M; ++t) gemb.row(source[t]) += dy.row(t);
  }

  bool additive() const { return cfg_.attention == AttentionKind::kAdditive; }

  const Parameters& p_;
  Parameters& g_;
  const ModelConfig& cfg_;
  const ParamLayout& lay_;
  double beta_;

  std::vector<std::vector<CellCache>> enc_cache_;
  MatrixRM q_, keys_, dq_;
  std::vector<StepCache> steps_;
};

}  // namespace

LossAndGrads loss_and_grads(const Parameters& params,
                            std::span<const ParallelPair> batch, double beta) {
  if (batch.empty()) throw Error("loss_and_grads: empty batch");
  LossAndGrads out{0.0, 0, 0.0, Parameters(params.config())};
  PairGradient pg(params, out.grads, beta);
  double loss = 0.0, abs_log_z = 0.0;
  for (const auto& pair : batch) {
    const PairStats s = pg.run(pair);
    loss += s.loss;
    abs_log_z += s.abs_log_z;
    out.tokens += s.tokens;
  }
  const double inv = 1.0 / static_cast<double>(out.tokens);
  out.loss = loss * inv;
  out.mean_abs_log_z = abs_log_z * inv;
  for (double& g : out.grads.values()) g *= inv;
  return out;
}

}  // namespace egrm
