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

#include <cmath>
#include <cstdio>
#include <sstream>

#include "phishlens/error.h"

namespace phishlens {
namespace {

Ratio Divide(std::size_t num, std::size_t den) {
  if (den == 0) return {0.0, true};
  return {static_cast<double>(num) / static_cast<double>(den), false};
}

ClassId Other(ClassId c) { return c == kSafeEmail ? kPhishingEmail : kSafeEmail; }

void CheckClass(ClassId c) {
  if (c != kSafeEmail && c != kPhishingEmail) {
    throw Error(ErrorKind::kInvalidArgument,
                "class id " + std::to_string(c) + " outside {0, 1}");
  }
}

nlohmann::json RatioJson(const Ratio& r) {
  nlohmann::json j = {{"value", RoundHalfUp(r.value, 4)},
                      {"rounded", RoundHalfUp(r.value, 2)}};
  if (r.degenerate) j["degenerate"] = true;
  return j;
}

}  // namespace

std::size_t ConfusionMatrix::total() const {
  return table_[0][0] + table_[0][1] + table_[1][0] + table_[1][1];
}

std::size_t ConfusionMatrix::support(ClassId actual) const {
  CheckClass(actual);
  return at(actual, kSafeEmail) + at(actual, kPhishingEmail);
}

BinaryCounts ConfusionMatrix::CountsFor(ClassId positive) const {
  CheckClass(positive);
  const ClassId negative = Other(positive);
  return {at(positive, positive), at(negative, negative), at(negative, positive),
          at(positive, negative)};
}

ConfusionMatrix Confusion(std::span<const ClassId> predictions,
                          std::span<const ClassId> labels) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorKind::kInvalidArgument,
                "predictions and labels differ in length");
  }
  if (labels.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "confusion of zero records");
  }
  std::array<std::array<std::size_t, 2>, 2> table{};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    CheckClass(labels[i]);
    CheckClass(predictions[i]);
    ++table[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predictions[i])];
  }
  return ConfusionMatrix(table);
}

Ratio Precision(const ConfusionMatrix& cm, ClassId positive) {
  const BinaryCounts c = cm.CountsFor(positive);
  return Divide(c.tp, c.tp + c.fp);
}

Ratio Recall(const ConfusionMatrix& cm, ClassId positive) {
  const BinaryCounts c = cm.CountsFor(positive);
  return Divide(c.tp, c.tp + c.fn);
}

Ratio F1(const ConfusionMatrix& cm, ClassId positive) {
  const Ratio p = Precision(cm, positive);
  const Ratio r = Recall(cm, positive);
  const double sum = p.value + r.value;
  if (sum == 0.0) return {0.0, true};
  return {2.0 * p.value * r.value / sum, p.degenerate || r.degenerate};
}

double Accuracy(const ConfusionMatrix& cm) {
  const BinaryCounts c = cm.CountsFor(kPhishingEmail);
  return Divide(c.tn + c.tp, c.tn + c.tp + c.fn + c.fp).value;
}

double RoundHalfUp(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  // Nudge by a few ulps so ties stored just below .5 still round up.
  const double scaled = std::abs(value) * scale;
  const double rounded = std::floor(scaled + 0.5 + scaled * 1e-12) / scale;
  return std::copysign(rounded, value);
}

std::string FormatFixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, RoundHalfUp(value, decimals));
  return buf;
}

ClassReport MakeClassReport(const ConfusionMatrix& cm) {
  ClassReport report;
  for (ClassId c : {kSafeEmail, kPhishingEmail}) {
    report.per_class[static_cast<std::size_t>(c)] = {
        Precision(cm, c), Recall(cm, c), F1(cm, c), cm.support(c)};
  }
  report.accuracy = Accuracy(cm);
  return report;
}

nlohmann::json MetricsJson(const ConfusionMatrix& cm) {
  const ClassReport report = MakeClassReport(cm);
  nlohmann::json per_class = nlohmann::json::object();
  for (ClassId c : {kSafeEmail, kPhishingEmail}) {
    const ClassMetrics& m = report.per_class[static_cast<std::size_t>(c)];
    per_class[ClassName(c)] = {{"precision", RatioJson(m.precision)},
                               {"recall", RatioJson(m.recall)},
                               {"f1", RatioJson(m.f1)},
                               {"support", m.support}};
  }
  return {{"confusion", cm.table()},
          {"per_class", per_class},
          {"accuracy",
           {{"value", RoundHalfUp(report.accuracy, 4)},
            {"percent", FormatFixed(100.0 * report.accuracy, 2)}}}};
}

std::string MetricsText(const ConfusionMatrix& cm) {
  const ClassReport report = MakeClassReport(cm);
  std::ostringstream out;
  char line[160];
  out << "Confusion matrix (rows = actual, columns = predicted)\n";
  std::snprintf(line, sizeof(line), "%-16s %12s %16s\n", "Class Name", "Safe Email",
                "Phishing Email");
  out << line;
  for (ClassId a : {kSafeEmail, kPhishingEmail}) {
    std::snprintf(line, sizeof(line), "%-16s %12zu %16zu\n", ClassName(a).c_str(),
                  cm.at(a, kSafeEmail), cm.at(a, kPhishingEmail));
    out << line;
  }
  out << "\n";
  std::snprintf(line, sizeof(line), "%-16s %10s %8s %10s %9s\n", "Class", "Precision",
                "Recall", "F1-score", "Support");
  out << line;
  for (ClassId c : {kSafeEmail, kPhishingEmail}) {
    const ClassMetrics& m = report.per_class[static_cast<std::size_t>(c)];
    std::snprintf(line, sizeof(line), "%-16s %10s %8s %10s %9zu\n", ClassName(c).c_str(),
                  FormatFixed(m.precision.value, 2).c_str(),
                  FormatFixed(m.recall.value, 2).c_str(),
                  FormatFixed(m.f1.value, 2).c_str(), m.support);
    out << line;
  }
  out << "\nAccuracy: " << FormatFixed(100.0 * report.accuracy, 2) << "\n";
  return out.str();
}

}  // namespace phishlens
