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

#include "phishlens/metrics.h"

#include <gtest/gtest.h>

#include "phishlens/error.h"

namespace phishlens {
namespace {

const ConfusionMatrix kBalanced({{{3281, 98}, {5, 3410}}});
const ConfusionMatrix kImbalanced({{{3235, 116}, {24, 2216}}});

std::string Rounded(const Ratio& r) { return FormatFixed(RoundHalfUp(r.value, 2), 2); }

TEST(Confusion, BuildsTableFromPredictions) {
  const std::vector<ClassId> labels{0, 0, 1, 1, 1};
  const std::vector<ClassId> preds{0, 1, 1, 1, 0};
  const ConfusionMatrix cm = Confusion(preds, labels);
  EXPECT_EQ(cm.at(0, 0), 1u);
  EXPECT_EQ(cm.at(0, 1), 1u);
  EXPECT_EQ(cm.at(1, 0), 1u);
  EXPECT_EQ(cm.at(1, 1), 2u);
  EXPECT_EQ(cm.total(), 5u);
}

TEST(Confusion, PerfectPredictionsHaveZeroOffDiagonal) {
  const std::vector<ClassId> labels{0, 1, 0, 1, 1, 0, 0, 1, 1, 0};
  const ConfusionMatrix cm = Confusion(labels, labels);
  EXPECT_EQ(cm.at(0, 1), 0u);
  EXPECT_EQ(cm.at(1, 0), 0u);
  EXPECT_EQ(Accuracy(cm), 1.0);
}

TEST(Confusion, LengthMismatchRejected) {
  const std::vector<ClassId> a{0, 1}, b{0};
  EXPECT_THROW(Confusion(a, b), Error);
}

TEST(Metrics, BalancedWorkedExamples) {
  EXPECT_NEAR(Precision(kBalanced, kPhishingEmail).value, 3410.0 / 3508.0, 1e-15);
  EXPECT_NEAR(Recall(kBalanced, kPhishingEmail).value, 3410.0 / 3415.0, 1e-15);
  EXPECT_EQ(Rounded(Precision(kBalanced, kPhishingEmail)), "0.97");
  EXPECT_EQ(Rounded(Recall(kBalanced, kPhishingEmail)), "1.00");
  EXPECT_EQ(Rounded(F1(kBalanced, kPhishingEmail)), "0.99");
  EXPECT_EQ(FormatFixed(RoundHalfUp(100 * Accuracy(kBalanced), 2), 2), "98.48");
}

TEST(Metrics, ImbalancedWorkedExamples) {
  EXPECT_EQ(Rounded(Precision(kImbalanced, kSafeEmail)), "0.99");
  EXPECT_EQ(Rounded(Recall(kImbalanced, kSafeEmail)), "0.97");
  EXPECT_NEAR(F1(kImbalanced, kPhishingEmail).value, 0.96938, 5e-6);
  EXPECT_EQ(Rounded(F1(kImbalanced, kPhishingEmail)), "0.97");
  EXPECT_EQ(FormatFixed(RoundHalfUp(100 * Accuracy(kImbalanced), 2), 2), "97.50");
}

TEST(Metrics, DegenerateRatios) {
  const ConfusionMatrix none({{{5, 0}, {0, 0}}});
  const Ratio p = Precision(none, kPhishingEmail);
  EXPECT_TRUE(p.degenerate);
  EXPECT_EQ(p.value, 0.0);
  EXPECT_TRUE(Recall(none, kPhishingEmail).degenerate);
  EXPECT_EQ(F1(none, kPhishingEmail).value, 0.0);
}

TEST(Metrics, RoundHalfUpAwayFromZero) {
  EXPECT_EQ(RoundHalfUp(0.125, 2), 0.13);
  EXPECT_EQ(RoundHalfUp(-0.125, 2), -0.13);
  EXPECT_EQ(RoundHalfUp(2.675, 2), 2.68);
  EXPECT_EQ(FormatFixed(1.0, 2), "1.00");
}

TEST(Metrics, ReportSupportIsRowSum) {
  const ClassReport r = MakeClassReport(kImbalanced);
  EXPECT_EQ(r.per_class[kSafeEmail].support, 3351u);
  EXPECT_EQ(r.per_class[kPhishingEmail].support, 2240u);
}

TEST(Metrics, JsonAndText) {
  const auto j = MetricsJson(kBalanced);
  EXPECT_EQ(j["accuracy"]["percent"], "98.48");
  EXPECT_EQ(j["per_class"]["Safe Email"]["support"], 3379);
  EXPECT_EQ(j["confusion"][0][1], 98);
  const std::string text = MetricsText(kImbalanced);
  EXPECT_NE(text.find("Accuracy: 97.50"), std::string::npos);
  EXPECT_NE(text.find("3235"), std::string::npos);
}

}  // namespace
}  // namespace phishlens
