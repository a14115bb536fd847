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

#include "phishlens/report.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace phishlens {
namespace {

std::string Fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string Span(std::string_view text, double weight, double max_abs) {
  const int level = HighlightLevel(weight, max_abs);
  if (level == 0) return HtmlEscape(text);
  std::string out = "<span class=\"";
  out += weight > 0 ? "pos l" : "neg l";
  out += std::to_string(level);
  out += "\" title=\"" + Fixed(weight, 6) + "\">";
  out += HtmlEscape(text);
  out += "</span>";
  return out;
}

double MaxAbs(std::span<const double> values) {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

void WeightTable(std::ostringstream& out, std::string_view caption,
                 const std::vector<std::pair<std::string, double>>& items) {
  std::vector<std::pair<std::string, double>> pos, neg;
  for (const auto& item : items) {
    if (item.second > 0) pos.push_back(item);
    if (item.second < 0) neg.push_back(item);
  }
  auto by_magnitude = [](const auto& a, const auto& b) {
    return std::abs(a.second) > std::abs(b.second);
  };
  std::stable_sort(pos.begin(), pos.end(), by_magnitude);
  std::stable_sort(neg.begin(), neg.end(), by_magnitude);
  out << "<table>\n<caption>" << HtmlEscape(caption) << "</caption>\n"
      << "<tr><th colspan=\"2\">Positive</th><th colspan=\"2\">Negative</th></tr>\n"
      << "<tr><th>Word</th><th>Value</th><th>Word</th><th>Value</th></tr>\n";
  const std::size_t rows = std::max(pos.size(), neg.size());
  for (std::size_t i = 0; i < rows; ++i) {
    out << "<tr>";
    for (const auto* side : {&pos, &neg}) {
      if (i < side->size()) {
        out << "<td>" << HtmlEscape((*side)[i].first) << "</td><td>"
            << Fixed((*side)[i].second, 6) << "</td>";
      } else {
        out << "<td></td><td></td>";
      }
    }
    out << "</tr>\n";
  }
  out << "</table>\n";
}

constexpr std::string_view kStyle = R"(body{font-family:sans-serif;margin:2em;max-width:60em}
.text{line-height:1.9;white-space:pre-wrap;border:1px solid #ccc;padding:1em}
table{border-collapse:collapse;margin:1em 0}td,th{border:1px solid #ccc;padding:.2em .6em}
.pos{background:rgba(0,160,0,var(--a))}.neg{background:rgba(210,0,0,var(--a))}
.l1{--a:.12}.l2{--a:.23}.l3{--a:.34}.l4{--a:.45}.l5{--a:.56}.l6{--a:.67}.l7{--a:.78}.l8{--a:.9}
)";

}  // namespace

int HighlightLevel(double weight, double max_abs) {
  if (weight == 0.0 || !(max_abs > 0.0)) return 0;
  const int level = static_cast<int>(std::ceil(kHighlightLevels * std::abs(weight) / max_abs));
  return std::clamp(level, 1, kHighlightLevels);
}

std::string HtmlEscape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::vector<double> PercentOfTotal(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += std::abs(w);
  std::vector<double> out(weights.size(), 0.0);
  if (total == 0.0) return out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out[i] = 100.0 * std::abs(weights[i]) / total;
  }
  return out;
}

std::vector<std::pair<std::string, double>> MergeSubwords(
    const AttributionRecord& record) {
  std::vector<std::pair<std::string, double>> pieces;
  for (std::size_t i = 0; i < record.tokens.size(); ++i) {
    const std::string& tok = record.tokens[i];
    if (tok == kClsToken || tok == kSepToken || tok == kPadToken) continue;
    if (tok.rfind("##", 0) == 0 && !pieces.empty()) {
      pieces.back().first += tok.substr(2);
      pieces.back().second += record.raw_scores[i];
    } else {
      pieces.emplace_back(tok, record.raw_scores[i]);
    }
  }
  std::vector<std::pair<std::string, double>> words;
  std::map<std::string, std::size_t> slot;
  for (auto& [word, score] : pieces) {
    const auto [it, fresh] = slot.emplace(word, words.size());
    if (fresh) {
      words.emplace_back(word, score);
    } else {
      words[it->second].second += score;
    }
  }
  return words;
}

std::vector<ComparisonRow> CompareAttributions(const LimeExplanation& lime,
                                               const AttributionRecord& ig) {
  std::vector<double> lime_weights;
  for (const auto& item : lime.weighted_words) lime_weights.push_back(item.second);
  const std::vector<double> lime_pct = PercentOfTotal(lime_weights);

  const auto merged = MergeSubwords(ig);
  std::vector<double> ig_weights;
  for (const auto& item : merged) ig_weights.push_back(item.second);
  const std::vector<double> ig_pct = PercentOfTotal(ig_weights);

  std::vector<ComparisonRow> rows;
  std::map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < lime.weighted_words.size(); ++i) {
    slot.emplace(lime.weighted_words[i].first, rows.size());
    rows.push_back({lime.weighted_words[i].first, lime_pct[i], 0.0});
  }
  for (std::size_t i = 0; i < merged.size(); ++i) {
    const auto [it, fresh] = slot.emplace(merged[i].first, rows.size());
    if (fresh) rows.push_back({merged[i].first, 0.0, 0.0});
    rows[it->second].ig_percent = ig_pct[i];
  }
  return rows;
}

std::string ComparisonCsv(const std::vector<ComparisonRow>& rows) {
  std::string out = "word,lime_percent,ig_percent\n";
  for (const ComparisonRow& row : rows) {
    std::string word = row.word;
    if (word.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : word) {
        if (c == '"') quoted += '"';
        quoted += c;
      }
      word = quoted + "\"";
    }
    out += word + "," + Fixed(row.lime_percent, 6) + "," + Fixed(row.ig_percent, 6) + "\n";
  }
  return out;
}

nlohmann::json ExplanationJson(const ExplanationReport& report) {
  return {{"text", report.text},
          {"class_names", report.class_names},
          {"lime", report.lime.ToJson()},
          {"integrated_gradients", report.ig.ToJson()}};
}

std::string RenderExplanationHtml(const ExplanationReport& report) {
  std::ostringstream out;
  auto class_name = [&](ClassId c) {
    return static_cast<std::size_t>(c) < report.class_names.size()
               ? report.class_names[static_cast<std::size_t>(c)]
               : std::to_string(c);
  };
  out << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">"
      << "<title>Prediction explanation</title>\n<style>" << kStyle
      << "</style></head>\n<body>\n";
  out << "<h1>Prediction: " << HtmlEscape(class_name(report.ig.predicted_class))
      << " (p = " << Fixed(report.ig.predicted_probability, 4) << ")</h1>\n";

  // LIME view: every occurrence of a weighted word is highlighted.
  std::map<std::string, double> lime_weight;
  std::vector<double> lime_values;
  for (const auto& [word, w] : report.lime.weighted_words) {
    lime_weight[word] = w;
    lime_values.push_back(w);
  }
  const double lime_max = MaxAbs(lime_values);
  const WordIndex index = WordIndex::Build(report.text);
  out << "<h2>LIME: " << HtmlEscape(report.lime.class_name)
      << " (p = " << Fixed(report.lime.predicted_probability, 4)
      << ", local R2 = " << Fixed(report.lime.local_fit_r2, 4) << ")</h2>\n"
      << "<div class=\"text\" id=\"lime\">";
  for (const WordIndex::Segment& seg : index.segments()) {
    double w = 0.0;
    if (seg.feature) {
      const auto it = lime_weight.find(index.words()[*seg.feature]);
      if (it != lime_weight.end()) w = it->second;
    }
    out << Span(seg.text, w, lime_max);
  }
  out << "</div>\n";
  WeightTable(out, "LIME word weights", report.lime.weighted_words);

  // Integrated gradients view: one span per token, sub-words kept apart.
  const double ig_max = MaxAbs(report.ig.normalized_scores);
  out << "<h2>Integrated gradients: " << HtmlEscape(class_name(report.ig.predicted_class))
      << " (completeness gap " << Fixed(report.ig.completeness_gap, 6) << ")</h2>\n"
      << "<div class=\"text\" id=\"ig\">";
  std::vector<std::pair<std::string, double>> token_scores;
  for (std::size_t i = 0; i < report.ig.tokens.size(); ++i) {
    if (i > 0) out << ' ';
    out << Span(report.ig.tokens[i], report.ig.normalized_scores[i], ig_max);
    token_scores.emplace_back(report.ig.tokens[i], report.ig.normalized_scores[i]);
  }
  out << "</div>\n";
  WeightTable(out, "Token attributions", token_scores);
  out << "</body></html>\n";
  return out.str();
}

}  // namespace phishlens
