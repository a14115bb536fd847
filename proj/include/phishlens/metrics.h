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

#ifndef PHISHLENS_METRICS_H_
#define PHISHLENS_METRICS_H_

#include <array>
#include <cstddef>
#include <span>
#include <string>

#include "json.hpp"
#include "phishlens/corpus.h"

namespace phishlens {

struct BinaryCounts {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

// 2x2 table indexed [actual][predicted].
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::array<std::array<std::size_t, 2>, 2> table)
      : table_(table) {}

  std::size_t at(ClassId actual, ClassId predicted) const {
    return table_[static_cast<std::size_t>(actual)][static_cast<std::size_t>(predicted)];
  }
  const std::array<std::array<std::size_t, 2>, 2>& table() const { return table_; }
  std::size_t total() const;
  // Support of a class: its row sum.
  std::size_t support(ClassId actual) const;
  BinaryCounts CountsFor(ClassId positive) const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::array<std::array<std::size_t, 2>, 2> table_{};
};

ConfusionMatrix Confusion(std::span<const ClassId> predictions,
                          std::span<const ClassId> labels);

// A ratio whose denominator may be zero; then value is 0 and degenerate set.
struct Ratio {
  double value = 0.0;
  bool degenerate = false;
};

Ratio Precision(const ConfusionMatrix& cm, ClassId positive);
Ratio Recall(const ConfusionMatrix& cm, ClassId positive);
Ratio F1(const ConfusionMatrix& cm, ClassId positive);
double Accuracy(const ConfusionMatrix& cm);

// Round half away from zero at `decimals` places.
double RoundHalfUp(double value, int decimals);
std::string FormatFixed(double value, int decimals);

struct ClassMetrics {
  Ratio precision;
  Ratio recall;
  Ratio f1;
  std::size_t support = 0;
};

struct ClassReport {
  std::array<ClassMetrics, 2> per_class;
  double accuracy = 0.0;
};

ClassReport MakeClassReport(const ConfusionMatrix& cm);

// {confusion, per_class: {name: {precision, recall, f1, support}}, accuracy}
// with 4-decimal raw values and 2-decimal rounded companions.
nlohmann::json MetricsJson(const ConfusionMatrix& cm);

// Aligned text: confusion table, per-class table and accuracy percent.
std::string MetricsText(const ConfusionMatrix& cm);

}  // namespace phishlens

#endif  // PHISHLENS_METRICS_H_
