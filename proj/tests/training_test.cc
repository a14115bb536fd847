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

#include <gtest/gtest.h>

#include <set>

#include "phishlens/error.h"
#include "test_util.h"

namespace phishlens {
namespace {

// One-scalar model: every tensor 1x1 except the one under test.
ModelParameters ScalarParams(double value) {
  ModelParameters p;
  p.tensors.token_embeddings = Matrix::Constant(1, 1, value);
  p.tensors.position_embeddings = Matrix::Constant(1, 1, value);
  p.tensors.pre_head_weight = Matrix::Constant(1, 1, value);
  p.tensors.pre_head_bias = Matrix::Constant(1, 1, value);
  p.tensors.head_weight = Matrix::Constant(1, 1, value);
  p.tensors.head_bias = Matrix::Constant(1, 1, value);
  return p;
}

GradientSet ScalarGrads(double g) {
  GradientSet s;
  s.tensors = ScalarParams(g).tensors;
  return s;
}

TEST(AdamW, HandComputedFirstStep) {
  // m = 0.05, v = 2.5e-4, bias-corrected 0.5 and 0.25, so the step is lr * 1
  // plus decoupled decay lr * wd * theta.
  ModelParameters p = ScalarParams(1.0);
  OptimizerState state = OptimizerState::For(p);
  TrainConfig c;
  AdamWStep(p, ScalarGrads(0.5), state, c);
  EXPECT_NEAR(p.tensors.head_weight(0, 0), 0.9999798, 1e-12);
  EXPECT_NEAR(state.first_moment.head_weight(0, 0), 0.05, 1e-15);
  EXPECT_NEAR(state.second_moment.head_weight(0, 0), 2.5e-4, 1e-15);
  EXPECT_EQ(state.step, 1u);
  // Biases are not decayed.
  EXPECT_NEAR(p.tensors.head_bias(0, 0), 1.0 - 2e-5 * 0.5 / (0.5 + 1e-8), 1e-15);
}

TEST(AdamW, ZeroGradientNoDecayLeavesParameters) {
  ModelParameters p = ScalarParams(0.7);
  OptimizerState state = OptimizerState::For(p);
  TrainConfig c;
  c.weight_decay = 0.0;
  AdamWStep(p, ScalarGrads(0.0), state, c);
  EXPECT_EQ(p.tensors.head_weight(0, 0), 0.7);
  EXPECT_EQ(state.step, 1u);
}

TEST(AdamW, RandomizedDecoupledDecay) {
  const Vocabulary vocab = testing::ToyVocabulary();
  ModelParameters p = InitParameters(testing::ToyConfig(vocab), 8);
  const ModelParameters before = p;
  OptimizerState state = OptimizerState::For(p);
  TrainConfig c;
  c.learning_rate = 1e-3;
  c.weight_decay = 0.05;
  GradientSet zero{ModelTensors::ZerosLike(p.tensors)};
  AdamWStep(p, zero, state, c);
  std::vector<const Matrix*> old;
  before.tensors.ForEach([&](std::string_view, TensorRole, const Matrix& m) { old.push_back(&m); });
  std::size_t i = 0;
  p.tensors.ForEach([&](std::string_view name, TensorRole role, const Matrix& m) {
    const Matrix& o = *old[i++];
    const Matrix expected = role == TensorRole::kWeight ? Matrix(o * (1.0 - 1e-3 * 0.05)) : o;
    EXPECT_LT((m - expected).cwiseAbs().maxCoeff(), 1e-15) << name;
  });
  EXPECT_GT(p.generation, before.generation);
}

TEST(AdamW, ShapeMismatchRejected) {
  ModelParameters p = ScalarParams(1.0);
  OptimizerState state = OptimizerState::For(p);
  GradientSet g = ScalarGrads(1.0);
  g.tensors.head_weight = Matrix::Zero(2, 1);
  EXPECT_THROW(AdamWStep(p, g, state, TrainConfig{}), Error);
}

TEST(TrainConfig, DefaultsAndJson) {
  const TrainConfig c;
  EXPECT_EQ(c.learning_rate, 2e-5);
  EXPECT_EQ(c.train_batch_size, 32u);
  EXPECT_EQ(c.eval_batch_size, 64u);
  EXPECT_EQ(c.epochs, 6u);
  EXPECT_EQ(c.max_len, 512u);
  const TrainConfig r = TrainConfig::FromJson(c.ToJson());
  EXPECT_EQ(r.learning_rate, c.learning_rate);
  EXPECT_EQ(r.weight_decay, c.weight_decay);
  TrainConfig bad;
  bad.learning_rate = -1.0;
  EXPECT_THROW(bad.Validate(), Error);
  EXPECT_THROW(TrainConfig::FromJson({{"epochs", "six"}}), Error);
}

TEST(EpochBatches, CoversEveryIndexOnce) {
  Rng rng(4);
  const auto batches = EpochBatches(10, 4, rng);
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches.back().size(), 2u);
  std::set<std::size_t> seen;
  for (const auto& b : batches) seen.insert(b.begin(), b.end());
  EXPECT_EQ(seen.size(), 10u);
}

class TrainTest : public ::testing::Test {
 protected:
  Vocabulary vocab = testing::ToyVocabulary();
  ModelConfig config = testing::ToyConfig(vocab, 1, 0.1);
  SplitCorpus split = Split(testing::KeywordCorpus(24, 3), 0.75, 1);
  TrainConfig train = [] {
    TrainConfig c;
    c.epochs = 2;
    c.learning_rate = 1e-3;
    c.train_batch_size = 8;
    c.eval_batch_size = 8;
    c.max_len = 16;
    return c;
  }();
};

TEST_F(TrainTest, ZeroEpochsReturnsParametersUnchanged) {
  const ModelParameters p = InitParameters(config, 2);
  train.epochs = 0;
  const TrainResult r = Train(p, split, vocab, train);
  EXPECT_TRUE(r.stats.empty());
  EXPECT_EQ(r.params.tensors.head_weight, p.tensors.head_weight);
}

TEST_F(TrainTest, EmptyTrainPartitionRejected) {
  SplitCorpus empty;
  empty.test = split.test;
  EXPECT_THROW(Train(InitParameters(config, 2), empty, vocab, train), Error);
}

TEST_F(TrainTest, DeterministicWithCallbacks) {
  std::size_t batches = 0, epochs = 0;
  TrainCallbacks cb;
  cb.on_batch = [&](const BatchEvent& e) {
    ++batches;
    EXPECT_TRUE(std::isfinite(e.loss));
  };
  cb.on_epoch = [&](const EpochStats& s) {
    EXPECT_EQ(s.epoch_index, epochs++);
    EXPECT_TRUE(s.eval_accuracy.has_value());
  };
  const TrainResult a = Train(InitParameters(config, 2), split, vocab, train, cb);
  const TrainResult b = Train(InitParameters(config, 2), split, vocab, train);
  EXPECT_EQ(epochs, 2u);
  EXPECT_EQ(batches, 2u * 3u);
  EXPECT_EQ(a.params.tensors.head_weight, b.params.tensors.head_weight);
  EXPECT_EQ(a.stats[1].mean_train_loss, b.stats[1].mean_train_loss);
}

TEST_F(TrainTest, EmptyTestPartitionOmitsEvalStats) {
  SplitCorpus all = Split(testing::KeywordCorpus(8, 3), 1.0, 1);
  train.epochs = 1;
  const TrainResult r = Train(InitParameters(config, 2), all, vocab, train);
  EXPECT_FALSE(r.stats[0].eval_accuracy.has_value());
  EXPECT_TRUE(r.stats[0].ToJson()["eval_acc"].is_null());
}

TEST_F(TrainTest, EvaluateSaturatedModel) {
  ModelParameters p = InitParameters(config, 2);
  p.tensors.head_bias(0, kPhishingEmail) = 30.0;
  p.tensors.head_bias(0, kSafeEmail) = -30.0;
  const LabeledCorpus one({{"verify your password", kPhishingEmail}});
  const EvalResult r = Evaluate(p, one, vocab, 16, 4);
  EXPECT_LT(r.mean_loss, 1e-6);
  ASSERT_EQ(r.predictions.size(), 1u);
  EXPECT_EQ(r.predictions[0], kPhishingEmail);
  const EvalResult again = Evaluate(p, one, vocab, 16, 4);
  EXPECT_EQ(again.mean_loss, r.mean_loss);
}

TEST_F(TrainTest, EvaluateEmptyPartitionRejected) {
  EXPECT_THROW(Evaluate(InitParameters(config, 2), LabeledCorpus{}, vocab, 16, 4), Error);
}

}  // namespace
}  // namespace phishlens
