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

// Recurrent cell kernels shared by the inference and training paths.

#ifndef EGRM_SRC_MODEL_INTERNAL_H_
#define EGRM_SRC_MODEL_INTERNAL_H_

#include "egrm/model.h"

namespace egrm::internal {

struct CellView {
  ConstMatMap w;
  ConstMatMap u;
  ConstMatMap b;  // (gates * H) x 1
};

struct CellGrad {
  MatMap w;
  MatMap u;
  MatMap b;
};

inline CellView cell_view(const Parameters& p, const ParamLayout::Cell& c) {
  return {p.tensor(c.w), p.tensor(c.u), p.tensor(c.b)};
}

inline CellGrad cell_grad(Parameters& g, const ParamLayout::Cell& c) {
  return {g.tensor(c.w), g.tensor(c.u), g.tensor(c.b)};
}

// Everything the backward pass needs from one cell application.
struct CellCache {
  Vector x;
  Vector h_prev;
  Vector c_prev;
  Vector gates;  // post-activation: GRU [z r n], LSTM [i f g o]
  Vector uh_n;   // GRU: candidate part of U h_prev
  Vector c;      // LSTM cell after the step
};

inline Vector sigmoid(const Vector& v) {
  return (1.0 / (1.0 + (-v.array()).exp())).matrix();
}

// One step. For GRU `c_prev`/`c` are ignored. `cache` may be null.
inline void cell_forward(CellType type, const CellView& cv, const Vector& x,
                         const Vector& h_prev, const Vector& c_prev, Vector* h,
                         Vector* c, CellCache* cache) {
  const Eigen::Index H = h_prev.size();
  if (type == CellType::kGru) {
    const Vector a = cv.w * x + cv.b.col(0);
    const Vector uh = cv.u * h_prev;
    const Vector z = sigmoid(a.head(H) + uh.head(H));
    const Vector r = sigmoid(a.segment(H, H) + uh.segment(H, H));
    const Vector n =
        (a.tail(H).array() + r.array() * uh.tail(H).array()).tanh().matrix();
    *h = ((1.0 - z.array()) * n.array() + z.array() * h_prev.array()).matrix();
    if (cache) {
      cache->x = x;
      cache->h_prev = h_prev;
      cache->gates.resize(3 * H);
      cache->gates << z, r, n;
      cache->uh_n = uh.tail(H);
    }
  } else {
    const Vector pre = cv.w * x + cv.u * h_prev + cv.b.col(0);
    const Vector i = sigmoid(pre.segment(0, H));
    const Vector f = sigmoid(pre.segment(H, H));
    const Vector g = pre.segment(2 * H, H).array().tanh().matrix();
    const Vector o = sigmoid(pre.segment(3 * H, H));
    *c = (f.array() * c_prev.array() + i.array() * g.array()).matrix();
    *h = (o.array() * c->array().tanh()).matrix();
    if (cache) {
      cache->x = x;
      cache->h_prev = h_prev;
      cache->c_prev = c_prev;
      cache->gates.resize(4 * H);
      cache->gates << i, f, g, o;
      cache->c = *c;
    }
  }
}

// Accumulates parameter gradients into `grad` and writes input/state
// gradients. `dc` and `dc_prev` are unused for GRU.
inline void cell_backward(CellType type, const CellView& cv, CellGrad& grad,
                          const CellCache& cache, const Vector& dh,
                          const Vector& dc, Vector* dx, Vector* dh_prev,
                          Vector* dc_prev) {
  const Eigen::Index H = dh.size();
  if (type == CellType::kGru) {
    const auto z = cache.gates.head(H).array();
    const auto r = cache.gates.segment(H, H).array();
    const auto n = cache.gates.tail(H).array();
    const Vector dz = (dh.array() * (cache.h_prev.array() - n)).matrix();
    const Vector dn_pre =
        (dh.array() * (1.0 - z) * (1.0 - n.square())).matrix();
    const Vector dr = (dn_pre.array() * cache.uh_n.array()).matrix();
    Vector da(3 * H), duh(3 * H);
    const Vector dz_pre = (dz.array() * z * (1.0 - z)).matrix();
    const Vector dr_pre = (dr.array() * r * (1.0 - r)).matrix();
    da << dz_pre, dr_pre, dn_pre;
    duh << dz_pre, dr_pre, (dn_pre.array() * r).matrix();
    grad.w.noalias() += da * cache.x.transpose();
    grad.b.col(0) += da;
    grad.u.noalias() += duh * cache.h_prev.transpose();
    *dx = cv.w.transpose() * da;
    *dh_prev = (dh.array() * z).matrix();
    dh_prev->noalias() += cv.u.transpose() * duh;
  } else {
    const auto i = cache.gates.segment(0, H).array();
    const auto f = cache.gates.segment(H, H).array();
    const auto g = cache.gates.segment(2 * H, H).array();
    const auto o = cache.gates.segment(3 * H, H).array();
    const Eigen::ArrayXd tc = cache.c.array().tanh();
    const Eigen::ArrayXd dct =
        dc.array() + dh.array() * o * (1.0 - tc.square());
    Vector dpre(4 * H);
    dpre << (dct * g * i * (1.0 - i)).matrix(),
        (dct * cache.c_prev.array() * f * (1.0 - f)).matrix(),
        (dct * i * (1.0 - g.square())).matrix(),
        (dh.array() * tc * o * (1.0 - o)).matrix();
    grad.w.noalias() += dpre * cache.x.transpose();
    grad.u.noalias() += dpre * cache.h_prev.transpose();
    grad.b.col(0) += dpre;
    *dx = cv.w.transpose() * dpre;
    *dh_prev = cv.u.transpose() * dpre;
    *dc_prev = (dct * f).matrix();
  }
}

inline std::size_t gate_count(CellType type) {
  return type == CellType::kGru ? 3 : 4;
}

}  // namespace egrm::internal

#endif  // EGRM_SRC_MODEL_INTERNAL_H_
