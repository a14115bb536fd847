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

#ifndef PHISHLENS_TRAINING_H_
#define PHISHLENS_TRAINING_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "phishlens/corpus.h"
#include "phishlens/model.h"
#include "phishlens/random.h"
#include "phishlens/tokenizer.h"

namespace phishlens {

// Defaults are the fine-tuning settings that worked best for phishing
// detection: batch 32/64, AdamW at 2e-5, six epochs. Betas, epsilon and
// weight decay are the optimizer's usual defaults.
struct TrainConfig {
  double learning_rate = 2e-5;
  std::size_t train_batch_size = 32;
  std::size_t eval_batch_size = 64;
  std::size_t epochs = 6;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t shuffle_seed = 0;
  std::uint64_t dropout_seed = 1;
  std::size_t max_len = 512;
  // Global gradient-norm clip; 0 disables clipping.
  double max_grad_norm = 0.0;

  void Validate() const;
  nlohmann::json ToJson() const;
  // Missing fields keep their defaults.
  static TrainConfig FromJson(const nlohmann::json& j);
};

// The values tried for each hyperparameter while tuning the defaults above.
struct HyperparameterGrid {
  std::vector<std::size_t> train_batch_sizes{8, 16, 32};
  std::vector<std::size_t> eval_batch_sizes{8, 16, 32, 64};
  std::vector<double> learning_rates{1e-5, 2e-5, 3e-5};
  std::vector<std::size_t> epochs{3, 4, 5, 6, 7};
};

struct OptimizerState {
  std::uint64_t step = 0;
  ModelTensors first_moment;
  ModelTensors second_moment;

  static OptimizerState For(const ModelParameters& params);
};

// One AdamW update with bias correction and decoupled weight decay. Decay
// touches weight tensors only, never biases or norm parameters.
void AdamWStep(ModelParameters& params, const GradientSet& grads,
               OptimizerState& state, const TrainConfig& config);

struct EpochStats {
  std::size_t epoch_index = 0;
  double mean_train_loss = 0.0;
  double train_accuracy = 0.0;
  // Absent when the test partition is empty.
  std::optional<double> mean_eval_loss;
  std::optional<double> eval_accuracy;

  nlohmann::json ToJson() const;
};

struct BatchEvent {
  std::size_t epoch_index = 0;
  std::size_t step = 0;
  std::span<const std::size_t> record_indices;
  double loss = 0.0;
};

struct TrainCallbacks {
  std::function<void(const BatchEvent&)> on_batch;
  std::function<void(const EpochStats&)> on_epoch;
};

struct TrainResult {
  ModelParameters params;
  std::vector<EpochStats> stats;
};

// Shuffled index batches covering [0, n) once; the last batch may be short.
std::vector<std::vector<std::size_t>> EpochBatches(std::size_t n,
                                                   std::size_t batch_size,
                                                   Rng& rng);

struct EvalResult {
  double mean_loss = 0.0;
  std::vector<ClassId> predictions;
};

// No shuffling and no dropout; records are scored in order.
EvalResult Evaluate(const ModelParameters& params,
                    const LabeledCorpus& partition, const Vocabulary& vocab,
                    std::size_t max_len, std::size_t batch_size);

// Fine-tunes every parameter: per epoch, reshuffle, then forward, loss,
// backward and AdamW on each batch, then evaluate on the test partition.
TrainResult Train(ModelParameters params, const SplitCorpus& corpus,
                  const Vocabulary& vocab, const TrainConfig& config,
                  const TrainCallbacks& callbacks = {});

}  // namespace phishlens

#endif  // PHISHLENS_TRAINING_H_
