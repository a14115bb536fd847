/*
 * Copyright 2026 The PhishLens Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef PHISHLENS_MODEL_H_
#define PHISHLENS_MODEL_H_

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "phishlens/corpus.h"
#include "phishlens/random.h"
#include "phishlens/tokenizer.h"

namespace phishlens {

using Matrix = Eigen::MatrixXd;

// Additive score for masked attention keys. exp() of it underflows to 0.
inline constexpr double kMaskedScore = -1e9;
inline constexpr double kLayerNormEpsilon = 1e-12;
inline constexpr double kInitStddev = 0.02;

struct ModelConfig {
  std::size_t vocab_size = 30522;
  std::size_t max_positions = 512;
  std::size_t hidden_dim = 768;
  std::size_t num_heads = 12;
  std::size_t num_layers = 6;
  std::size_t ffn_dim = 3072;
  std::size_t num_classes = 2;
  double dropout_rate = 0.1;

  // Six layers, twelve heads, width 768, the size of the distilled BERT
  // family.
  static ModelConfig FullScale();
  // vocab 120, 32 positions, width 16, 2 heads, 1 layer, ffn 32.
  static ModelConfig Toy();

  std::size_t head_dim() const { return hidden_dim / num_heads; }
  // Throws kConfig on an inconsistent shape.
  void Validate() const;

  nlohmann::json ToJson() const;
  static ModelConfig FromJson(const nlohmann::json& j);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Closed-form number of scalar parameters for `config`.
std::size_t ParameterCount(const ModelConfig& config);

// Weight decay applies to kWeight tensors only.
enum class TensorRole { kWeight, kBias, kNorm };

struct LayerTensors {
  Matrix query_weight, query_bias;
  Matrix key_weight, key_bias;
  Matrix value_weight, value_bias;
  Matrix output_weight, output_bias;
  Matrix attention_norm_scale, attention_norm_shift;
  Matrix ffn_in_weight, ffn_in_bias;
  Matrix ffn_out_weight, ffn_out_bias;
  Matrix ffn_norm_scale, ffn_norm_shift;
};

// Every trainable tensor of the encoder and classifier. Weights are stored
// input-major (y = x W + b); biases and norm parameters are 1 x n.
struct ModelTensors {
  Matrix token_embeddings;
  Matrix position_embeddings;
  std::vector<LayerTensors> layers;
  Matrix pre_head_weight, pre_head_bias;
  Matrix head_weight, head_bias;

  using Visitor = std::function<void(std::string_view name, TensorRole role,
                                     Matrix& tensor)>;
  using ConstVisitor = std::function<void(
      std::string_view name, TensorRole role, const Matrix& tensor)>;

  // Visits tensors in canonical (checkpoint) order.
  void ForEach(const Visitor& visit);
  void ForEach(const ConstVisitor& visit) const;

  // Same shapes, all zeros.
  static ModelTensors ZerosLike(const ModelTensors& other);
  // Shapes implied by `config`, all zeros.
  static ModelTensors Zeros(const ModelConfig& config);

  std::size_t NumScalars() const;
};

struct ModelParameters {
  ModelConfig config;
  ModelTensors tensors;
  // Bumped on every in-place update so stale activation caches are detected.
  std::uint64_t generation = 0;
};

// Gradients of a scalar with respect to every parameter tensor.
struct GradientSet {
  ModelTensors tensors;
};

// Throws kShapeMismatch unless both sets hold the same tensors and shapes.
void CheckSameShapes(const ModelTensors& actual, const ModelTensors& expected);

// Truncated normal(0, 0.02) weights, zero biases, unit norm scales.
ModelParameters InitParameters(const ModelConfig& config, std::uint64_t seed);

struct ActivationCache;

struct ForwardOutput {
  Matrix logits;         // batch x num_classes
  Matrix probabilities;  // batch x num_classes
  std::shared_ptr<const ActivationCache> cache;

  std::size_t batch_size() const {
    return static_cast<std::size_t>(logits.rows());
  }
};

// Token plus position embeddings for one sequence (max_len x hidden).
Matrix Embed(const ModelParameters& params, const TokenSequence& sequence);

// Dropout is applied only when `train_mode` is set and then draws from
// `dropout_rng`, which must be non-null if the dropout rate is positive.
ForwardOutput Forward(const ModelParameters& params,
                      std::span<const TokenSequence> batch, bool train_mode,
                      Rng* dropout_rng = nullptr);

// Forward pass that starts from explicit input embeddings instead of token
// ids. Used for attribution along embedding paths.
ForwardOutput ForwardEmbedded(const ModelParameters& params,
                              std::span<const Matrix> embeddings,
                              std::span<const std::vector<int>> masks,
                              bool train_mode, Rng* dropout_rng = nullptr);

// Mean negative log-likelihood of `labels` under output.probabilities.
double CrossEntropyLoss(const ForwardOutput& output,
                        std::span<const ClassId> labels);

// Reverse-mode gradients of CrossEntropyLoss. `batch` must be the batch the
// forward pass ran on with these exact parameters.
GradientSet Backward(const ModelParameters& params,
                     std::span<const TokenSequence> batch,
                     std::span<const ClassId> labels,
                     const ForwardOutput& output);

struct BackwardResult {
  GradientSet gradients;
  // d(objective)/d(input embeddings), one max_len x hidden matrix per item.
  std::vector<Matrix> embedding_gradients;
};

// Backpropagates an arbitrary upstream gradient on the logits. With
// `embedding_gradients_only` the embedding-table gradients are left empty,
// which saves a vocab-sized buffer per call.
BackwardResult BackwardFromLogits(const ModelParameters& params,
                                  const ForwardOutput& output,
                                  const Matrix& logit_gradients,
                                  bool embedding_gradients_only = false);

// Row-softmax attention weights of one head, for inspection in tests.
const Matrix& AttentionProbabilities(const ForwardOutput& output,
                                     std::size_t item, std::size_t layer,
                                     std::size_t head);

// Bias-free softmax of one row of logits; exposed for tests.
Eigen::RowVectorXd Softmax(const Eigen::RowVectorXd& logits);

// Checkpoint layout: "PHL1", u64 little-endian header length, JSON header
// {config, tensors: {name: {shape, dtype, offset}}}, then little-endian f64
// tensor data in table order. Offsets count from the start of the data.
void SaveCheckpoint(const ModelParameters& params, const std::string& path);

// Throws kCheckpointCorrupt on bad magic or truncation and kShapeMismatch
// when the tensor table disagrees with the stored or `expected` config.
ModelParameters LoadCheckpoint(const std::string& path,
                               const ModelConfig* expected = nullptr);

}  // namespace phishlens

#endif  // PHISHLENS_MODEL_H_
