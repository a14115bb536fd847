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

#ifndef PHISHLENS_REPORT_H_
#define PHISHLENS_REPORT_H_

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "phishlens/integrated_gradients.h"
#include "phishlens/lime.h"

namespace phishlens {

inline constexpr int kHighlightLevels = 8;

// 0 for a zero weight, else ceil(8 |weight| / max_abs) clamped to [1, 8].
int HighlightLevel(double weight, double max_abs);

std::string HtmlEscape(std::string_view text);

// 100 |w_i| / sum |w|; all zeros when every weight is zero.
std::vector<double> PercentOfTotal(std::span<const double> weights);

// IG tokens folded back into words: "##" pieces join the preceding piece,
// their raw scores are summed, special tokens are dropped and repeated
// words are summed.
std::vector<std::pair<std::string, double>> MergeSubwords(
    const AttributionRecord& record);

struct ComparisonRow {
  std::string word;
  double lime_percent = 0.0;
  double ig_percent = 0.0;
};

// Rows joined on word: LIME features in rank order, then words only IG
// reports in text order. A word missing from one method scores 0 there.
std::vector<ComparisonRow> CompareAttributions(const LimeExplanation& lime,
                                               const AttributionRecord& ig);

std::string ComparisonCsv(const std::vector<ComparisonRow>& rows);

struct ExplanationReport {
  std::string text;
  std::vector<std::string> class_names;
  LimeExplanation lime;
  AttributionRecord ig;
};

nlohmann::json ExplanationJson(const ExplanationReport& report);

// Self-contained HTML: highlighted text for both methods (green positive,
// red negative, opacity by magnitude) and positive/negative weight tables.
std::string RenderExplanationHtml(const ExplanationReport& report);

}  // namespace phishlens

#endif  // PHISHLENS_REPORT_H_
