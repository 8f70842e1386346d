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

#include <algorithm>
#include <cmath>

#include "egrm/model.h"

namespace egrm {

TrainHyper TrainHyper::desk() {
  TrainHyper h;
  h.epochs = 4;
  h.batch_size = 32;
  h.learning_rate = 2e-3;
  h.lr_decay = 0.8;
  return h;
}

void TrainHyper::validate() const {
  if (!(learning_rate > 0.0)) throw Error("train: learning_rate must be > 0");
  if (!(beta >= 0.0)) throw Error("train: beta must be >= 0");
  if (batch_size == 0) throw Error("train: batch_size must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0))
    throw Error("train: lr_decay must lie in (0, 1]");
  if (!(heldout_fraction >= 0.0 && heldout_fraction < 1.0))
    throw Error("train: heldout_fraction must lie in [0, 1)");
}

namespace {

class Adam {
 public:
  Adam(std::size_t n, const TrainHyper& h)
      : h_(h), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grads,
            double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(h_.adam_beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(h_.adam_beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = h_.adam_beta1 * m_[i] + (1.0 - h_.adam_beta1) * grads[i];
      v_[i] = h_.adam_beta2 * v_[i] + (1.0 - h_.adam_beta2) * grads[i] * grads[i];
      const double m_hat = m_[i] / c1;
      const double v_hat = v_[i] / c2;
      params[i] -= lr * m_hat / (std::sqrt(v_hat) + h_.adam_eps);
    }
  }

 private:
  const TrainHyper& h_;
  std::vector<double> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace

TrainResult train(std::span<const ParallelPair> corpus,
                  const ModelConfig& config, const TrainHyper& hyper,
                  const EpochCallback& on_epoch) {
  hyper.validate();
  config.validate();
  if (corpus.empty()) throw Error("train: corpus is empty");

  TrainResult result{init_params(config, hyper.seed), {}, {}};
  if (hyper.epochs == 0) return result;

  Rng rng(hyper.seed ^ 0xA5A5A5A5DEADBEEFULL);
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle_in_place(order, rng);

  std::size_t n_heldout = static_cast<std::size_t>(
      std::floor(hyper.heldout_fraction * static_cast<double>(corpus.size())));
  if (hyper.heldout_fraction > 0.0 && corpus.size() >= 2)
    n_heldout = std::max<std::size_t>(n_heldout, 1);
  const std::size_t n_train = corpus.size() - n_heldout;

  std::vector<ParallelPair> train_set, heldout;
  train_set.reserve(n_train);
  for (std::size_t i = 0; i < n_train; ++i) train_set.push_back(corpus[order[i]]);
  for (std::size_t i = n_train; i < order.size(); ++i)
    heldout.push_back(corpus[order[i]]);

  Parameters& params = result.params;
  Adam adam(params.size(), hyper);
  double lr = hyper.learning_rate;
  for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
    shuffle_in_place(train_set, rng);
    double loss_sum = 0.0;
    std::size_t token_sum = 0;
    for (std::size_t start = 0; start < train_set.size();
         start += hyper.batch_size) {
      const std::size_t end =
          std::min(train_set.size(), start + hyper.batch_size);
      const std::span<const ParallelPair> slice(train_set.data() + start,
                                                end - start);
      LossAndGrads lg = loss_and_grads(params, slice, hyper.beta);
      loss_sum += lg.loss * static_cast<double>(lg.tokens);
      token_sum += lg.tokens;
      adam.step(params.values(), lg.grads.values(), lr);
    }
    if (!params.all_finite())
      throw Error("train: parameters became non-finite in epoch " +
                  std::to_string(epoch));
    EpochMetrics m;
    m.epoch = epoch;
    m.loss = loss_sum / static_cast<double>(token_sum);
    m.mean_abs_log_z =
        mean_abs_log_partition(params, heldout.empty() ? train_set : heldout);
    result.metrics.push_back(m);
    if (on_epoch) on_epoch(m);
    lr *= hyper.lr_decay;
  }
  result.heldout = std::move(heldout);
  return result;
}

}  // namespace egrm
