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

#include "egrm/model.h"

#include <cmath>

#include "model_internal.h"

namespace egrm {

using internal::cell_forward;
using internal::cell_view;
using internal::gate_count;

std::string to_string(CellType cell) {
  return cell == CellType::kGru ? "gru" : "lstm";
}

std::string to_string(AttentionKind kind) {
  return kind == AttentionKind::kAdditive ? "additive" : "dot";
}

CellType parse_cell_type(const std::string& name) {
  if (name == "gru" || name == "GRU") return CellType::kGru;
  if (name == "lstm" || name == "LSTM") return CellType::kLstm;
  throw Error("unknown cell type '" + name + "' (expected gru or lstm)");
}

AttentionKind parse_attention_kind(const std::string& name) {
  if (name == "additive") return AttentionKind::kAdditive;
  if (name == "dot") return AttentionKind::kDot;
  throw Error("unknown attention kind '" + name + "' (expected additive or dot)");
}

void ModelConfig::validate() const {
  if (encoder_layers < 1 || decoder_layers < 1)
    throw Error("model config: layer counts must be at least 1");
  if (embed_dim < 1 || hidden_dim < 1)
    throw Error("model config: dimensions must be at least 1");
  if (vocab_size < kNumReserved)
    throw Error("model config: vocab_size must cover the reserved ids");
  if ((encoder_layers > 1 || decoder_layers > 1) && !residual)
    throw Error("model config: stacks deeper than one layer need residual");
  if (static_cast<std::uint8_t>(cell) > 1 ||
      static_cast<std::uint8_t>(attention) > 1)
    throw Error("model config: bad enum value");
}

ModelConfig ModelConfig::desk(std::uint32_t vocab_size) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  return c;
}

ModelConfig ModelConfig::offline(std::uint32_t vocab_size) {
  ModelConfig c;
  c.cell = CellType::kLstm;
  c.encoder_layers = 4;
  c.decoder_layers = 4;
  c.residual = true;
  c.embed_dim = 128;
  c.hidden_dim = 512;
  c.vocab_size = vocab_size;
  return c;
}

ParamLayout::ParamLayout(const ModelConfig& config) {
  config.validate();
  const std::size_t V = config.vocab_size, E = config.embed_dim,
                    H = config.hidden_dim, G = gate_count(config.cell);
  auto add = [&](std::string name, std::size_t rows, std::size_t cols,
                 bool bias) {
    tensors.push_back({std::move(name), rows, cols, total, bias});
    total += rows * cols;
    return tensors.size() - 1;
  };
  embedding = add("embedding", V, E, false);
  for (std::uint32_t l = 0; l < config.encoder_layers; ++l) {
    const std::string p = "encoder." + std::to_string(l) + ".";
    Cell c;
    c.w = add(p + "w", G * H, l == 0 ? E : H, false);
    c.u = add(p + "u", G * H, H, false);
    c.b = add(p + "b", G * H, 1, true);
    encoder.push_back(c);
  }
  for (std::uint32_t l = 0; l < config.decoder_layers; ++l) {
    const std::string p = "decoder." + std::to_string(l) + ".";
    Cell c;
    c.w = add(p + "w", G * H, l == 0 ? E + H : H, false);
    c.u = add(p + "u", G * H, H, false);
    c.b = add(p + "b", G * H, 1, true);
    decoder.push_back(c);
  }
  if (config.attention == AttentionKind::kAdditive) {
    att_query = add("attention.query", H, H, false);
    att_key = add("attention.key", H, H, false);
    att_v = add("attention.v", 1, H, false);
  }
  out_w = add("output.w", V, 2 * H + E, false);
  out_b = add("output.b", V, 1, true);
}

Parameters::Parameters(const ModelConfig& config)
    : config_(config),
      layout_(std::make_shared<const ParamLayout>(config)),
      values_(layout_->total, 0.0) {}

MatMap Parameters::tensor(std::size_t index) {
  const auto& t = layout_->tensors[index];
  return MatMap(values_.data() + t.offset, static_cast<Eigen::Index>(t.rows),
                static_cast<Eigen::Index>(t.cols));
}

ConstMatMap Parameters::tensor(std::size_t index) const {
  const auto& t = layout_->tensors[index];
  return ConstMatMap(values_.data() + t.offset,
                     static_cast<Eigen::Index>(t.rows),
                     static_cast<Eigen::Index>(t.cols));
}

void Parameters::set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

bool Parameters::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

void xavier_uniform(MatMap m, Rng& rng) {
  const double bound =
      std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = (2.0 * uniform01(rng) - 1.0) * bound;
}

Parameters init_params(const ModelConfig& config, std::uint64_t seed) {
  Parameters params(config);
  Rng rng(seed);
  const auto& layout = params.layout();
  for (std::size_t i = 0; i < layout.tensors.size(); ++i) {
    if (layout.tensors[i].is_bias) continue;
    xavier_uniform(params.tensor(i), rng);
  }
  return params;
}

// ---------------------------------------------------------------------------
// Inference

namespace {

Vector embedding_row(const Parameters& params, TokenId id) {
  return params.tensor(params.layout().embedding).row(id).transpose();
}

void check_ids(const Parameters& params, std::span<const TokenId> ids) {
  for (TokenId id : ids)
    if (id >= params.config().vocab_size)
      throw Error("token id " + std::to_string(id) + " outside vocabulary of " +
                  std::to_string(params.config().vocab_size));
}

}  // namespace

EncoderStates encode(const Parameters& params,
                     std::span<const TokenId> source) {
  if (source.empty()) throw Error("encode: empty source sequence");
  check_ids(params, source);
  const auto& cfg = params.config();
  const auto& layout = params.layout();
  const auto M = static_cast<Eigen::Index>(source.size());
  const Eigen::Index H = cfg.hidden_dim;

  MatrixRM inputs(M, cfg.embed_dim);
  for (Eigen::Index t = 0; t < M; ++t)
    inputs.row(t) = params.tensor(layout.embedding).row(source[t]);

  for (std::uint32_t l = 0; l < cfg.encoder_layers; ++l) {
    const auto cv = cell_view(params, layout.encoder[l]);
    MatrixRM outputs(M, H);
    Vector h = Vector::Zero(H), c = Vector::Zero(H), h_next, c_next;
    for (Eigen::Index t = 0; t < M; ++t) {
      const Vector x = inputs.row(t).transpose();
      cell_forward(cfg.cell, cv, x, h, c, &h_next, &c_next, nullptr);
      h = h_next;
      c = c_next;
      outputs.row(t) = h.transpose();
      if (l > 0 && cfg.residual) outputs.row(t) += inputs.row(t);
    }
    inputs = std::move(outputs);
  }

  EncoderStates enc;
  enc.states = std::move(inputs);
  if (cfg.attention == AttentionKind::kAdditive)
    enc.keys = enc.states * params.tensor(layout.att_key).transpose();
  return enc;
}

DecoderState initial_state(const Parameters& params, const EncoderStates& enc) {
  const auto& cfg = params.config();
  DecoderState s;
  const Vector last = enc.states.row(enc.states.rows() - 1).transpose();
  s.hidden.assign(cfg.decoder_layers, last);
  if (cfg.cell == CellType::kLstm)
    s.cell.assign(cfg.decoder_layers, Vector::Zero(cfg.hidden_dim));
  s.top = last;
  return s;
}

AttentionResult attend(const Parameters& params, const DecoderState& state,
                       const EncoderStates& enc) {
  const auto& layout = params.layout();
  Vector energies;
  if (params.config().attention == AttentionKind::kAdditive) {
    const Vector query = params.tensor(layout.att_query) * state.top;
    const MatrixRM hidden =
        (enc.keys.rowwise() + query.transpose()).array().tanh().matrix();
    energies = hidden * params.tensor(layout.att_v).row(0).transpose();
  } else {
    energies = enc.states * state.top;
  }
  AttentionResult out;
  const double peak = energies.maxCoeff();
  out.weights = (energies.array() - peak).exp().matrix();
  out.weights /= out.weights.sum();
  out.context = enc.states.transpose() * out.weights;
  return out;
}

StepOutput advance(const Parameters& params, TokenId prev_token,
                   const DecoderState& state, const EncoderStates& enc) {
  const auto& cfg = params.config();
  const auto& layout = params.layout();
  if (prev_token >= cfg.vocab_size)
    throw Error("decode step: token id outside vocabulary");
  const Eigen::Index E = cfg.embed_dim, H = cfg.hidden_dim;

  const AttentionResult att = attend(params, state, enc);
  const Vector emb = embedding_row(params, prev_token);

  StepOutput out;
  out.state.hidden.resize(cfg.decoder_layers);
  if (cfg.cell == CellType::kLstm) out.state.cell.resize(cfg.decoder_layers);

  Vector x(E + H);
  x << emb, att.context;
  static const Vector kEmpty;
  for (std::uint32_t l = 0; l < cfg.decoder_layers; ++l) {
    const auto cv = cell_view(params, layout.decoder[l]);
    const bool lstm = cfg.cell == CellType::kLstm;
    cell_forward(cfg.cell, cv, x, state.hidden[l],
                 lstm ? state.cell[l] : kEmpty, &out.state.hidden[l],
                 lstm ? &out.state.cell[l] : nullptr, nullptr);
    Vector y = out.state.hidden[l];
    if (l > 0 && cfg.residual) y += x;
    x = std::move(y);
  }
  out.state.top = std::move(x);
  out.features.resize(2 * H + E);
  out.features << out.state.top, att.context, emb;
  return out;
}

Vector score_all(const Parameters& params, const Vector& features) {
  const auto& layout = params.layout();
  return params.tensor(layout.out_w) * features +
         params.tensor(layout.out_b).col(0);
}

double score_token(const Parameters& params, const Vector& features,
                   TokenId token) {
  const auto& layout = params.layout();
  return params.tensor(layout.out_w).row(token).dot(features) +
         params.tensor(layout.out_b)(token, 0);
}

DecodeStep decode_step(const Parameters& params, TokenId prev_token,
                       const DecoderState& state, const EncoderStates& enc) {
  StepOutput step = advance(params, prev_token, state, enc);
  Vector scores = score_all(params, step.features);
  return {std::move(step.state), std::move(scores)};
}

double log_sum_exp(const Vector& scores) {
  const double peak = scores.maxCoeff();
  return peak + std::log((scores.array() - peak).exp().sum());
}

std::vector<double> restricted_log_probs(const Vector& scores,
                                         std::span<const TokenId> allowed,
                                         ScoreMode mode) {
  std::vector<double> out;
  out.reserve(allowed.size());
  if (mode == ScoreMode::kExactSoftmax) {
    const double log_z = log_sum_exp(scores);
    for (TokenId id : allowed) out.push_back(scores[id] - log_z);
  } else {
    for (TokenId id : allowed) out.push_back(self_norm_log_prob(scores[id]));
  }
  return out;
}

double sequence_logprob(const Parameters& params,
                        std::span<const TokenId> source,
                        std::span<const TokenId> target) {
  if (target.empty()) throw Error("sequence_logprob: empty target");
  check_ids(params, target);
  const EncoderStates enc = encode(params, source);
  DecoderState state = initial_state(params, enc);
  TokenId prev = kBosId;
  double total = 0.0;
  for (std::size_t i = 0; i <= target.size(); ++i) {
    const TokenId gold = i < target.size() ? target[i] : kEosId;
    StepOutput step = advance(params, prev, state, enc);
    const Vector scores = score_all(params, step.features);
    total += scores[gold] - log_sum_exp(scores);
    state = std::move(step.state);
    prev = gold;
  }
  return total;
}

double batch_loss(const Parameters& params,
                  std::span<const ParallelPair> batch, double beta) {
  double sum = 0.0;
  std::size_t tokens = 0;
  for (const auto& pair : batch) {
    const EncoderStates enc = encode(params, pair.source);
    DecoderState state = initial_state(params, enc);
    TokenId prev = kBosId;
    for (std::size_t i = 0; i <= pair.target.size(); ++i) {
      const TokenId gold = i < pair.target.size() ? pair.target[i] : kEosId;
      StepOutput step = advance(params, prev, state, enc);
      const Vector scores = score_all(params, step.features);
      const double log_z = log_sum_exp(scores);
      sum += -(scores[gold] - log_z) + beta * log_z * log_z;
      ++tokens;
      state = std::move(step.state);
      prev = gold;
    }
  }
  return tokens ? sum / static_cast<double>(tokens) : 0.0;
}

double mean_abs_log_partition(const Parameters& params,
                              std::span<const ParallelPair> pairs) {
  double sum = 0.0;
  std::size_t steps = 0;
  for (const auto& pair : pairs) {
    const EncoderStates enc = encode(params, pair.source);
    DecoderState state = initial_state(params, enc);
    TokenId prev = kBosId;
    for (std::size_t i = 0; i <= pair.target.size(); ++i) {
      StepOutput step = advance(params, prev, state, enc);
      sum += std::abs(log_sum_exp(score_all(params, step.features)));
      ++steps;
      prev = i < pair.target.size() ? pair.target[i] : kEosId;
      state = std::move(step.state);
    }
  }
  return steps ? sum / static_cast<double>(steps) : 0.0;
}

}  // namespace egrm
