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

#include "phishlens/model.h"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "phishlens/error.h"
#include "phishlens/training.h"
#include "test_util.h"

namespace phishlens {
namespace {

class ModelTest : public ::testing::Test {
 protected:
  Vocabulary vocab = testing::ToyVocabulary();
  ModelConfig config = testing::ToyConfig(vocab);
  ModelParameters params = InitParameters(config, 99);
  std::vector<TokenSequence> batch = testing::EncodeAll(
      {"verify your bank password", "the meeting notes are attached"}, vocab, 12);
};

double TensorMaxAbsDiff(const ModelTensors& a, const ModelTensors& b) {
  std::vector<const Matrix*> rhs;
  b.ForEach([&](std::string_view, TensorRole, const Matrix& m) { rhs.push_back(&m); });
  double worst = 0.0;
  std::size_t i = 0;
  a.ForEach([&](std::string_view, TensorRole, const Matrix& m) {
    worst = std::max(worst, (m - *rhs[i++]).cwiseAbs().maxCoeff());
  });
  return worst;
}

TEST(ParameterCount, ToyMatchesHandSum) {
  // token 120*16, position 32*16, one layer (4 projections of 16*16+16, two
  // norms of 2*16, ffn 16*32+32 and 32*16+16), pre-head 16*16+16, head 16*2+2.
  const std::size_t layer = 4 * (256 + 16) + 2 * 32 + (512 + 32) + (512 + 16);
  EXPECT_EQ(ParameterCount(ModelConfig::Toy()), 1920 + 512 + layer + 272 + 34);
  EXPECT_EQ(ParameterCount(ModelConfig::Toy()), 4962u);
}

TEST(ParameterCount, FullScaleIsAboutSixtySixMillion) {
  const std::size_t n = ParameterCount(ModelConfig::FullScale());
  EXPECT_GE(n, 60000000u);
  EXPECT_LE(n, 70000000u);
  EXPECT_EQ(n, 66953474u);
}

TEST(ParameterCount, MatchesAllocatedTensors) {
  const ModelConfig c = ModelConfig::Toy();
  EXPECT_EQ(InitParameters(c, 1).tensors.NumScalars(), ParameterCount(c));
}

TEST(ModelConfig, RejectsIndivisibleHeads) {
  ModelConfig c = ModelConfig::Toy();
  c.num_heads = 3;
  EXPECT_THROW(c.Validate(), Error);
}

TEST(ModelConfig, JsonRoundTrip) {
  const ModelConfig c = ModelConfig::Toy();
  EXPECT_EQ(ModelConfig::FromJson(c.ToJson()), c);
  EXPECT_EQ(ModelConfig::FromJson({{"preset", "full"}}), ModelConfig::FullScale());
}

TEST_F(ModelTest, InitIsDeterministic) {
  const ModelParameters again = InitParameters(config, 99);
  EXPECT_EQ(TensorMaxAbsDiff(params.tensors, again.tensors), 0.0);
  const ModelParameters other = InitParameters(config, 100);
  EXPECT_GT(TensorMaxAbsDiff(params.tensors, other.tensors), 0.0);
}

TEST_F(ModelTest, InitWithinTwoDeviations) {
  params.tensors.ForEach([](std::string_view, TensorRole role, const Matrix& m) {
    if (role == TensorRole::kWeight) EXPECT_LE(m.cwiseAbs().maxCoeff(), 2 * kInitStddev);
  });
}

TEST_F(ModelTest, ForwardShapesAndNormalization) {
  const ForwardOutput out = Forward(params, batch, false);
  EXPECT_EQ(out.logits.rows(), 2);
  EXPECT_EQ(out.logits.cols(), 2);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(out.probabilities.row(i).sum(), 1.0, 1e-6);
}

TEST_F(ModelTest, EvalModeIsPure) {
  config.dropout_rate = 0.3;
  params.config = config;
  const ForwardOutput a = Forward(params, std::span(batch.data(), 1), false);
  const ForwardOutput b = Forward(params, std::span(batch.data(), 1), false);
  EXPECT_EQ(a.logits, b.logits);
}

TEST_F(ModelTest, DropoutChangesTrainModeOutput) {
  config.dropout_rate = 0.3;
  params.config = config;
  Rng r1(1), r2(2);
  const ForwardOutput a = Forward(params, batch, true, &r1);
  const ForwardOutput b = Forward(params, batch, true, &r2);
  EXPECT_NE(a.logits, b.logits);
}

TEST_F(ModelTest, MaskedKeysGetZeroAttention) {
  const ForwardOutput out = Forward(params, batch, false);
  const Matrix& p = AttentionProbabilities(out, 0, 0, 1);
  const std::size_t real = batch[0].num_real();
  for (Eigen::Index q = 0; q < p.rows(); ++q) {
    EXPECT_NEAR(p.row(q).sum(), 1.0, 1e-12);
    for (Eigen::Index k = static_cast<Eigen::Index>(real); k < p.cols(); ++k) {
      EXPECT_EQ(p(q, k), 0.0);
    }
  }
}

TEST_F(ModelTest, PaddingDoesNotChangeLogits) {
  const auto short_seq = testing::EncodeAll({"verify your bank password"}, vocab, 8);
  const auto long_seq = testing::EncodeAll({"verify your bank password"}, vocab, 24);
  EXPECT_NEAR((Forward(params, short_seq, false).logits -
               Forward(params, long_seq, false).logits).cwiseAbs().maxCoeff(),
              0.0, 1e-12);
}

TEST(Softmax, StableForLargeLogits) {
  Eigen::RowVectorXd z(2);
  z << 1000.0, 1000.0;
  EXPECT_NEAR(Softmax(z)(0), 0.5, 1e-15);
}

TEST(CrossEntropy, UniformIsLnTwo) {
  ForwardOutput out;
  out.logits = Matrix::Zero(1, 2);
  out.probabilities = Matrix::Constant(1, 2, 0.5);
  const std::vector<ClassId> labels{0};
  EXPECT_NEAR(CrossEntropyLoss(out, labels), 0.693147, 1e-6);
}

TEST(CrossEntropy, SaturatedCorrectAndBatchMean) {
  ForwardOutput out;
  out.logits.resize(2, 2);
  out.logits << 20, -20, 1, 2;
  out.probabilities.resize(2, 2);
  out.probabilities.row(0) = Softmax(out.logits.row(0));
  out.probabilities.row(1) = Softmax(out.logits.row(1));
  const std::vector<ClassId> first{0};
  ForwardOutput one;
  one.logits = out.logits.topRows(1);
  one.probabilities = out.probabilities.topRows(1);
  EXPECT_LT(CrossEntropyLoss(one, first), 1e-8);
  // -log p for logits (1, 2) and label 0 is log(1 + e).
  const double second = std::log(1.0 + std::exp(1.0));
  const double first_loss = std::log(1.0 + std::exp(-40.0));
  const std::vector<ClassId> labels{0, 0};
  EXPECT_NEAR(CrossEntropyLoss(out, labels), 0.5 * (first_loss + second), 1e-12);
}

TEST_F(ModelTest, PadTokenEmbeddingGetsNoGradient) {
  const std::vector<ClassId> labels{1, 0};
  const ForwardOutput out = Forward(params, batch, false);
  const GradientSet g = Backward(params, batch, labels, out);
  EXPECT_EQ(g.tensors.token_embeddings.row(vocab.pad_id()).cwiseAbs().maxCoeff(), 0.0);
  const std::size_t longest = std::max(batch[0].num_real(), batch[1].num_real());
  for (std::size_t p = longest; p < 12; ++p) {
    EXPECT_EQ(g.tensors.position_embeddings.row(p).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST_F(ModelTest, DuplicatedBatchGivesSameGradient) {
  const std::vector<ClassId> labels{1, 0};
  const GradientSet g = Backward(params, batch, labels, Forward(params, batch, false));
  std::vector<TokenSequence> doubled{batch[0], batch[0], batch[1], batch[1]};
  const std::vector<ClassId> doubled_labels{1, 1, 0, 0};
  const GradientSet g2 =
      Backward(params, doubled, doubled_labels, Forward(params, doubled, false));
  EXPECT_LT(TensorMaxAbsDiff(g.tensors, g2.tensors), 1e-14);
}

TEST_F(ModelTest, GradientMatchesFiniteDifferencesOnSampledEntries) {
  config.num_layers = 2;
  config.dropout_rate = 0.2;
  params = testing::SpreadParameters(config, 5);
  const std::vector<ClassId> labels{1, 0};
  auto loss_at = [&](ModelParameters& p) {
    Rng rng(77);
    return CrossEntropyLoss(Forward(p, batch, true, &rng), labels);
  };
  Rng rng(77);
  const ForwardOutput out = Forward(params, batch, true, &rng);
  const GradientSet g = Backward(params, batch, labels, out);
  std::vector<const Matrix*> grads;
  g.tensors.ForEach([&](std::string_view, TensorRole, const Matrix& m) { grads.push_back(&m); });
  Rng pick(3);
  std::size_t t = 0;
  params.tensors.ForEach([&](std::string_view name, TensorRole, Matrix& m) {
    const Matrix& gm = *grads[t++];
    double num_sq = 0, diff_sq = 0, ana_sq = 0;
    for (int s = 0; s < 6; ++s) {
      const Eigen::Index i = static_cast<Eigen::Index>(pick.Index(m.size()));
      const double saved = m.data()[i];
      m.data()[i] = saved + 1e-3;
      const double up = loss_at(params);
      m.data()[i] = saved - 1e-3;
      const double down = loss_at(params);
      m.data()[i] = saved;
      const double numeric = (up - down) / 2e-3;
      num_sq += numeric * numeric;
      ana_sq += gm.data()[i] * gm.data()[i];
      diff_sq += (numeric - gm.data()[i]) * (numeric - gm.data()[i]);
    }
    // Absolute floor for gradients that vanish identically (key bias).
    const double scale = std::max({std::sqrt(num_sq), std::sqrt(ana_sq), 1e-8});
    EXPECT_LT(std::sqrt(diff_sq) / scale, 1e-4) << name;
  });
}

TEST_F(ModelTest, KeyBiasGradientVanishes) {
  // Adding the same q.b to every score of a row leaves the softmax unchanged.
  params = testing::SpreadParameters(config, 6);
  const std::vector<ClassId> labels{1, 0};
  const GradientSet g = Backward(params, batch, labels, Forward(params, batch, false));
  EXPECT_LT(g.tensors.layers[0].key_bias.cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_GT(g.tensors.layers[0].query_bias.cwiseAbs().maxCoeff(), 1e-9);
}

TEST_F(ModelTest, BackwardRejectsStaleCache) {
  const std::vector<ClassId> labels{1, 0};
  const ForwardOutput out = Forward(params, batch, false);
  OptimizerState state = OptimizerState::For(params);
  AdamWStep(params, Backward(params, batch, labels, out), state, TrainConfig{});
  try {
    Backward(params, batch, labels, out);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kStaleCache);
  }
}

TEST_F(ModelTest, BackwardRejectsDifferentBatch) {
  const std::vector<ClassId> labels{1, 0};
  const ForwardOutput out = Forward(params, batch, false);
  const auto other = testing::EncodeAll({"a", "b"}, vocab, 12);
  EXPECT_THROW(Backward(params, other, labels, out), Error);
}

TEST_F(ModelTest, ForwardEmbeddedMatchesForward) {
  std::vector<Matrix> embedded;
  std::vector<std::vector<int>> masks;
  for (const auto& s : batch) {
    embedded.push_back(Embed(params, s));
    masks.push_back(s.attention_mask);
  }
  const ForwardOutput a = Forward(params, batch, false);
  const ForwardOutput b = ForwardEmbedded(params, embedded, masks, false);
  EXPECT_LT((a.logits - b.logits).cwiseAbs().maxCoeff(), 1e-14);
}

TEST_F(ModelTest, ForwardRejectsOutOfRangeIds) {
  TokenSequence bad = batch[0];
  bad.input_ids[1] = static_cast<TokenId>(vocab.size());
  EXPECT_THROW(Forward(params, std::span(&bad, 1), false), Error);
}

class CheckpointTest : public ModelTest {
 protected:
  testing::TempDir dir;
};

TEST_F(CheckpointTest, RoundTripIsBitIdentical) {
  SaveCheckpoint(params, dir / "m.phl");
  const ModelParameters loaded = LoadCheckpoint(dir / "m.phl", &config);
  EXPECT_EQ(loaded.config, config);
  EXPECT_EQ(TensorMaxAbsDiff(params.tensors, loaded.tensors), 0.0);
}

TEST_F(CheckpointTest, ShortTensorIsCorrupt) {
  SaveCheckpoint(params, dir / "m.phl");
  const std::string bytes = testing::ReadFile(dir / "m.phl");
  testing::WriteFile(dir / "short.phl", bytes.substr(0, bytes.size() - 8));
  try {
    LoadCheckpoint(dir / "short.phl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kCheckpointCorrupt);
  }
}

TEST_F(CheckpointTest, BadMagicIsCorrupt) {
  testing::WriteFile(dir / "junk.phl", "not a checkpoint at all");
  try {
    LoadCheckpoint(dir / "junk.phl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kCheckpointCorrupt);
  }
}

TEST_F(CheckpointTest, DifferentHiddenDimIsShapeMismatch) {
  SaveCheckpoint(params, dir / "m.phl");
  ModelConfig wider = config;
  wider.hidden_dim = 32;
  try {
    LoadCheckpoint(dir / "m.phl", &wider);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShapeMismatch);
  }
}

TEST_F(CheckpointTest, MissingFileIsIoError) {
  try {
    LoadCheckpoint(dir / "absent.phl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
  }
}

}  // namespace
}  // namespace phishlens
