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

#include "phishlens/training.h"

#include <cmath>
#include <string>

#include "phishlens/error.h"

namespace phishlens {
namespace {

void Require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::kConfig, "invalid train config: " + what);
}

std::vector<TokenSequence> EncodeAll(const LabeledCorpus& corpus,
                                     const Vocabulary& vocab,
                                     std::size_t max_len) {
  std::vector<TokenSequence> out;
  out.reserve(corpus.size());
  for (const EmailRecord& r : corpus.records()) {
    out.push_back(Encode(r.body, vocab, max_len));
  }
  return out;
}

ClassId ArgMax(const Matrix& rows, Eigen::Index r) {
  Eigen::Index best = 0;
  rows.row(r).maxCoeff(&best);
  return static_cast<ClassId>(best);
}

void ClipGradients(GradientSet& grads, double max_norm) {
  double sq = 0.0;
  grads.tensors.ForEach([&](std::string_view, TensorRole, const Matrix& g) {
    sq += g.squaredNorm();
  });
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double scale = max_norm / norm;
  grads.tensors.ForEach([&](std::string_view, TensorRole, Matrix& g) { g *= scale; });
}

}  // namespace

void TrainConfig::Validate() const {
  Require(learning_rate > 0.0, "learning_rate must be positive");
  Require(beta1 >= 0.0 && beta1 < 1.0, "beta1 must lie in [0, 1)");
  Require(beta2 >= 0.0 && beta2 < 1.0, "beta2 must lie in [0, 1)");
  Require(epsilon > 0.0, "epsilon must be positive");
  Require(weight_decay >= 0.0, "weight_decay must be non-negative");
  Require(train_batch_size > 0 && eval_batch_size > 0, "batch sizes must be positive");
  Require(max_len >= 2, "max_len must be at least 2");
  Require(max_grad_norm >= 0.0, "max_grad_norm must be non-negative");
}

nlohmann::json TrainConfig::ToJson() const {
  return {{"learning_rate", learning_rate},
          {"train_batch_size", train_batch_size},
          {"eval_batch_size", eval_batch_size},
          {"epochs", epochs},
          {"weight_decay", weight_decay},
          {"beta1", beta1},
          {"beta2", beta2},
          {"epsilon", epsilon},
          {"shuffle_seed", shuffle_seed},
          {"dropout_seed", dropout_seed},
          {"max_len", max_len},
          {"max_grad_norm", max_grad_norm}};
}

TrainConfig TrainConfig::FromJson(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.train_batch_size = j.value("train_batch_size", c.train_batch_size);
    c.eval_batch_size = j.value("eval_batch_size", c.eval_batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.shuffle_seed = j.value("shuffle_seed", c.shuffle_seed);
    c.dropout_seed = j.value("dropout_seed", c.dropout_seed);
    c.max_len = j.value("max_len", c.max_len);
    c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("train config: ") + e.what());
  }
  return c;
}

OptimizerState OptimizerState::For(const ModelParameters& params) {
  return {0, ModelTensors::ZerosLike(params.tensors),
          ModelTensors::ZerosLike(params.tensors)};
}

void AdamWStep(ModelParameters& params, const GradientSet& grads,
               OptimizerState& state, const TrainConfig& config) {
  CheckSameShapes(grads.tensors, params.tensors);
  CheckSameShapes(state.first_moment, params.tensors);
  CheckSameShapes(state.second_moment, params.tensors);

  const std::uint64_t t = state.step + 1;
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t));
  const double lr = config.learning_rate;

  std::vector<const Matrix*> g_list;
  std::vector<Matrix*> m_list;
  std::vector<Matrix*> v_list;
  grads.tensors.ForEach([&](std::string_view, TensorRole, const Matrix& g) {
    g_list.push_back(&g);
  });
  state.first_moment.ForEach([&](std::string_view, TensorRole, Matrix& m) {
    m_list.push_back(&m);
  });
  state.second_moment.ForEach([&](std::string_view, TensorRole, Matrix& v) {
    v_list.push_back(&v);
  });

  std::size_t i = 0;
  params.tensors.ForEach([&](std::string_view, TensorRole role, Matrix& theta) {
    const Matrix& g = *g_list[i];
    Matrix& m = *m_list[i];
    Matrix& v = *v_list[i];
    ++i;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    const double decay = role == TensorRole::kWeight ? lr * config.weight_decay : 0.0;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      const double m_hat = m.data()[k] / correction1;
      const double v_hat = v.data()[k] / correction2;
      const double old = theta.data()[k];
      theta.data()[k] = old - lr * m_hat / (std::sqrt(v_hat) + config.epsilon) -
                        decay * old;
    }
  });
  state.step = t;
  ++params.generation;
}

nlohmann::json EpochStats::ToJson() const {
  nlohmann::json j = {{"epoch", epoch_index},
                      {"train_loss", mean_train_loss},
                      {"train_acc", train_accuracy}};
  j["eval_loss"] = mean_eval_loss ? nlohmann::json(*mean_eval_loss) : nlohmann::json();
  j["eval_acc"] = eval_accuracy ? nlohmann::json(*eval_accuracy) : nlohmann::json();
  return j;
}

std::vector<std::vector<std::size_t>> EpochBatches(std::size_t n,
                                                   std::size_t batch_size,
                                                   Rng& rng) {
  if (batch_size == 0) {
    throw Error(ErrorKind::kInvalidArgument, "batch size must be positive");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.Shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

EvalResult Evaluate(const ModelParameters& params,
                    const LabeledCorpus& partition, const Vocabulary& vocab,
                    std::size_t max_len, std::size_t batch_size) {
  if (partition.empty()) {
    throw Error(ErrorKind::kEmptyCorpus, "cannot evaluate an empty partition");
  }
  if (batch_size == 0) {
    throw Error(ErrorKind::kInvalidArgument, "batch size must be positive");
  }
  const std::vector<TokenSequence> encoded = EncodeAll(partition, vocab, max_len);
  EvalResult result;
  result.predictions.reserve(encoded.size());
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < encoded.size(); start += batch_size) {
    const std::size_t end = std::min(encoded.size(), start + batch_size);
    const std::span<const TokenSequence> batch(encoded.data() + start, end - start);
    std::vector<ClassId> labels;
    for (std::size_t i = start; i < end; ++i) {
      labels.push_back(partition.records()[i].label);
    }
    const ForwardOutput out = Forward(params, batch, /*train_mode=*/false);
    loss_sum += CrossEntropyLoss(out, labels) * static_cast<double>(labels.size());
    for (Eigen::Index r = 0; r < out.logits.rows(); ++r) {
      result.predictions.push_back(ArgMax(out.probabilities, r));
    }
  }
  result.mean_loss = loss_sum / static_cast<double>(encoded.size());
  return result;
}

TrainResult Train(ModelParameters params, const SplitCorpus& corpus,
                  const Vocabulary& vocab, const TrainConfig& config,
                  const TrainCallbacks& callbacks) {
  config.Validate();
  if (corpus.train.empty()) {
    throw Error(ErrorKind::kEmptyCorpus, "training partition is empty");
  }
  TrainResult result{std::move(params), {}};
  if (config.epochs == 0) return result;

  const std::vector<TokenSequence> encoded =
      EncodeAll(corpus.train, vocab, config.max_len);
  const auto& records = corpus.train.records();
  OptimizerState state = OptimizerState::For(result.params);
  Rng shuffle_rng(config.shuffle_seed);
  Rng dropout_rng(config.dropout_seed);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (const std::vector<std::size_t>& indices :
         EpochBatches(encoded.size(), config.train_batch_size, shuffle_rng)) {
      std::vector<TokenSequence> batch;
      std::vector<ClassId> labels;
      batch.reserve(indices.size());
      for (std::size_t i : indices) {
        batch.push_back(encoded[i]);
        labels.push_back(records[i].label);
      }
      const ForwardOutput out =
          Forward(result.params, batch, /*train_mode=*/true, &dropout_rng);
      const double loss = CrossEntropyLoss(out, labels);
      GradientSet grads = Backward(result.params, batch, labels, out);
      if (config.max_grad_norm > 0.0) ClipGradients(grads, config.max_grad_norm);
      AdamWStep(result.params, grads, state, config);

      loss_sum += loss * static_cast<double>(labels.size());
      for (std::size_t b = 0; b < labels.size(); ++b) {
        if (ArgMax(out.probabilities, static_cast<Eigen::Index>(b)) == labels[b]) ++correct;
      }
      if (callbacks.on_batch) {
        callbacks.on_batch({epoch, state.step, indices, loss});
      }
    }
    EpochStats stats;
    stats.epoch_index = epoch;
    stats.mean_train_loss = loss_sum / static_cast<double>(encoded.size());
    stats.train_accuracy =
        static_cast<double>(correct) / static_cast<double>(encoded.size());
    if (!corpus.test.empty()) {
      const EvalResult eval = Evaluate(result.params, corpus.test, vocab,
                                       config.max_len, config.eval_batch_size);
      std::size_t hits = 0;
      for (std::size_t i = 0; i < eval.predictions.size(); ++i) {
        if (eval.predictions[i] == corpus.test.records()[i].label) ++hits;
      }
      stats.mean_eval_loss = eval.mean_loss;
      stats.eval_accuracy =
          static_cast<double>(hits) / static_cast<double>(eval.predictions.size());
    }
    result.stats.push_back(stats);
    if (callbacks.on_epoch) callbacks.on_epoch(stats);
  }
  return result;
}

}  // namespace phishlens
