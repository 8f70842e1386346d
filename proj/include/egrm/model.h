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

// Attention encoder-decoder over token ids.
//
// Encoder: embedding -> stack of GRU/LSTM layers; layers above the first add
// their input to their output. Decoder step i consumes the previous token and
// the attention context computed from the previous top-layer output:
//
//   e_j   = att(k_{i-1}, q_j),  alpha = softmax(e),  c_i = sum_j alpha_j q_j
//   k_i   = stack([emb(y_{i-1}); c_i], k_{i-1})
//   s_i   = W_out [k_i; c_i; emb(y_{i-1})] + b_out
//
// The decoder starts from the top encoder output at the last source position
// (every layer's hidden state; LSTM cells start at zero).

#ifndef EGRM_MODEL_H_
#define EGRM_MODEL_H_

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "egrm/common.h"
#include "egrm/corpus.h"

namespace egrm {

using Vector = Eigen::VectorXd;
using MatrixRM =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<MatrixRM>;
using ConstMatMap = Eigen::Map<const MatrixRM>;
using VecMap = Eigen::Map<Vector>;
using ConstVecMap = Eigen::Map<const Vector>;

enum class CellType : std::uint8_t { kGru = 0, kLstm = 1 };
enum class AttentionKind : std::uint8_t { kAdditive = 0, kDot = 1 };

std::string to_string(CellType cell);
std::string to_string(AttentionKind kind);
CellType parse_cell_type(const std::string& name);
AttentionKind parse_attention_kind(const std::string& name);

struct ModelConfig {
  CellType cell = CellType::kGru;
  std::uint32_t encoder_layers = 1;
  std::uint32_t decoder_layers = 1;
  bool residual = true;
  std::uint32_t embed_dim = 32;
  std::uint32_t hidden_dim = 64;
  AttentionKind attention = AttentionKind::kAdditive;
  std::uint32_t vocab_size = 0;

  // Throws Error on an inconsistent configuration.
  void validate() const;

  // Small online model: 1+1 GRU layers.
  static ModelConfig desk(std::uint32_t vocab_size);
  // Large offline model: 4+4 LSTM layers, hidden 512.
  static ModelConfig offline(std::uint32_t vocab_size);

  bool operator==(const ModelConfig&) const = default;
};

struct TensorSpec {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
  bool is_bias = false;
  std::size_t size() const { return rows * cols; }
};

// Position of every tensor inside the flat parameter vector, in declaration
// order: embedding, encoder layers (W, U, b), decoder layers (W, U, b),
// attention (additive only: W_query, W_key, v), output (W, b).
struct ParamLayout {
  struct Cell {
    std::size_t w = 0, u = 0, b = 0;
  };

  explicit ParamLayout(const ModelConfig& config);

  std::vector<TensorSpec> tensors;
  std::size_t total = 0;
  std::size_t embedding = 0;
  std::vector<Cell> encoder;
  std::vector<Cell> decoder;
  std::size_t att_query = 0, att_key = 0, att_v = 0;
  std::size_t out_w = 0, out_b = 0;
};

// All learnable tensors, stored flat. Also used for gradients and optimizer
// moments, which share the layout.
class Parameters {
 public:
  explicit Parameters(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  const ParamLayout& layout() const { return *layout_; }
  std::size_t size() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  MatMap tensor(std::size_t index);
  ConstMatMap tensor(std::size_t index) const;

  void set_zero();
  bool all_finite() const;

  bool operator==(const Parameters& other) const {
    return config_ == other.config_ && values_ == other.values_;
  }

 private:
  ModelConfig config_;
  std::shared_ptr<const ParamLayout> layout_;
  std::vector<double> values_;
};

// Uniform in +-sqrt(6 / (rows + cols)).
void xavier_uniform(MatMap m, Rng& rng);

// Xavier-uniform weights, zero biases; deterministic in `seed`.
Parameters init_params(const ModelConfig& config, std::uint64_t seed);

struct EncoderStates {
  MatrixRM states;  // M x H, row j is q_j
  MatrixRM keys;    // M x H additive-attention projections; empty for dot
  std::size_t length() const { return static_cast<std::size_t>(states.rows()); }
};

struct DecoderState {
  std::vector<Vector> hidden;  // per layer, raw cell output
  std::vector<Vector> cell;    // per layer, LSTM only
  Vector top;                  // top-layer output after residual (k_i)
};

struct AttentionResult {
  Vector context;
  Vector weights;
};

// Decoder state after consuming a token, together with the feature vector
// [k_i; c_i; emb(prev)] that the output projection scores.
struct StepOutput {
  DecoderState state;
  Vector features;
};

EncoderStates encode(const Parameters& params, std::span<const TokenId> source);
DecoderState initial_state(const Parameters& params, const EncoderStates& enc);
AttentionResult attend(const Parameters& params, const DecoderState& state,
                       const EncoderStates& enc);
StepOutput advance(const Parameters& params, TokenId prev_token,
                   const DecoderState& state, const EncoderStates& enc);

// Raw energies s_i(w).
Vector score_all(const Parameters& params, const Vector& features);
double score_token(const Parameters& params, const Vector& features,
                   TokenId token);

struct DecodeStep {
  DecoderState state;
  Vector scores;
};
DecodeStep decode_step(const Parameters& params, TokenId prev_token,
                       const DecoderState& state, const EncoderStates& enc);

double log_sum_exp(const Vector& scores);

enum class ScoreMode { kExactSoftmax, kSelfNorm };

// Self-normalized log score: the raw energy, clamped so a token never adds
// a positive amount to a hypothesis.
inline double self_norm_log_prob(double score) {
  return score > 0.0 ? 0.0 : score;
}

// Log-probabilities of `allowed`, aligned with it. Exact mode normalizes over
// the whole vocabulary; self-norm mode treats log Z as zero.
std::vector<double> restricted_log_probs(const Vector& scores,
                                         std::span<const TokenId> allowed,
                                         ScoreMode mode);

// Teacher-forced log P(target + EOS | source) under the full softmax.
double sequence_logprob(const Parameters& params,
                        std::span<const TokenId> source,
                        std::span<const TokenId> target);

struct LossAndGrads {
  double loss = 0.0;          // mean per predicted token
  std::size_t tokens = 0;     // predicted positions, EOS included
  double mean_abs_log_z = 0.0;
  Parameters grads;
};

// Mean over predicted tokens of  -log p(k_i) + beta * (log Z_i)^2  and its
// gradient with respect to every parameter.
LossAndGrads loss_and_grads(const Parameters& params,
                            std::span<const ParallelPair> batch, double beta);

// Same objective evaluated through the inference path only.
double batch_loss(const Parameters& params,
                  std::span<const ParallelPair> batch, double beta);

// Mean |log Z| over every teacher-forced decoder step.
double mean_abs_log_partition(const Parameters& params,
                              std::span<const ParallelPair> pairs);

struct TrainHyper {
  double learning_rate = 5e-4;
  // Multiplies the learning rate after every epoch.
  double lr_decay = 1.0;
  std::size_t batch_size = 128;
  double beta = 0.1;
  std::size_t epochs = 10;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  // Share of the corpus held out for the log Z metric.
  double heldout_fraction = 0.05;

  void validate() const;

  // Desk-scale defaults of the command-line tool: 4 epochs, batches of 32,
  // learning rate 2e-3 decaying by 0.8 per epoch.
  static TrainHyper desk();
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;
  double mean_abs_log_z = 0.0;
};

struct TrainResult {
  Parameters params;
  std::vector<EpochMetrics> metrics;
  std::vector<ParallelPair> heldout;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

TrainResult train(std::span<const ParallelPair> corpus,
                  const ModelConfig& config, const TrainHyper& hyper,
                  const EpochCallback& on_epoch = {});

// Binary format: "EGRM", u32 version, config header, then every tensor in
// declaration order as little-endian f64.
void save_params(const Parameters& params, const std::string& path);
Parameters load_params(const std::string& path);

std::vector<std::uint8_t> serialize_params(const Parameters& params);
Parameters deserialize_params(std::span<const std::uint8_t> bytes);

// Short content hash of config + values.
std::string params_tag(const Parameters& params);

}  // namespace egrm

#endif  // EGRM_MODEL_H_
