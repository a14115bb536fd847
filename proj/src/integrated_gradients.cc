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

#include "phishlens/integrated_gradients.h"

#include <cmath>

#include "phishlens/error.h"

namespace phishlens {

void IGConfig::Validate() const {
  if (steps < 1) throw Error(ErrorKind::kConfig, "integrated gradients needs steps >= 1");
}

TokenSequence MakeBaseline(const TokenSequence& sequence, const Vocabulary& vocab) {
  TokenSequence baseline = sequence;
  for (std::size_t i = 0; i < baseline.input_ids.size(); ++i) {
    if (baseline.attention_mask[i] == 0) continue;
    const TokenId id = baseline.input_ids[i];
    if (id == vocab.cls_id() || id == vocab.sep_id()) continue;
    baseline.input_ids[i] = vocab.pad_id();
    if (i < baseline.tokens.size()) baseline.tokens[i] = std::string(kPadToken);
  }
  return baseline;
}

double LogitScorer::Value(const Matrix& embeddings) const {
  const ForwardOutput out = ForwardEmbedded(params_, std::span(&embeddings, 1),
                                            std::span(&mask_, 1), false);
  return out.logits(0, target_);
}

Matrix LogitScorer::Gradient(const Matrix& embeddings) const {
  const ForwardOutput out = ForwardEmbedded(params_, std::span(&embeddings, 1),
                                            std::span(&mask_, 1), false);
  Matrix upstream = Matrix::Zero(1, out.logits.cols());
  upstream(0, target_) = 1.0;
  return BackwardFromLogits(params_, out, upstream, /*embedding_gradients_only=*/true)
      .embedding_gradients.front();
}

Matrix IntegratedGradients(const EmbeddingScorer& scorer, const Matrix& input,
                           const Matrix& baseline, std::size_t steps) {
  if (input.rows() != baseline.rows() || input.cols() != baseline.cols()) {
    throw Error(ErrorKind::kInvalidArgument, "input and baseline differ in shape");
  }
  if (steps < 1) throw Error(ErrorKind::kInvalidArgument, "steps must be at least 1");
  const Matrix delta = input - baseline;
  Matrix grad_sum = Matrix::Zero(input.rows(), input.cols());
  const double n = static_cast<double>(steps);
  for (std::size_t i = 1; i <= steps; ++i) {
    const double alpha = (static_cast<double>(i) - 0.5) / n;
    grad_sum += scorer.Gradient(baseline + alpha * delta);
  }
  return delta.cwiseProduct(grad_sum / n);
}

Matrix IntegratedGradients(const ModelParameters& params,
                           const TokenSequence& input,
                           const TokenSequence& baseline, ClassId target,
                           std::size_t steps) {
  if (input.input_ids.size() != baseline.input_ids.size() ||
      input.attention_mask != baseline.attention_mask) {
    throw Error(ErrorKind::kInvalidArgument,
                "input and baseline must share length and attention mask");
  }
  const LogitScorer scorer(params, input.attention_mask, target);
  return IntegratedGradients(scorer, Embed(params, input), Embed(params, baseline), steps);
}

nlohmann::json AttributionRecord::ToJson() const {
  return {{"tokens", tokens},
          {"raw", raw_scores},
          {"normalized", normalized_scores},
          {"predicted_class", predicted_class},
          {"predicted_probability", predicted_probability},
          {"completeness_gap", completeness_gap}};
}

AttributionRecord WordAttributions(std::string_view text,
                                   const ModelParameters& params,
                                   const Vocabulary& vocab, std::size_t max_len,
                                   const IGConfig& config) {
  config.Validate();
  const TokenSequence input = Encode(text, vocab, max_len);
  const TokenSequence baseline = MakeBaseline(input, vocab);

  const ForwardOutput prediction = Forward(params, std::span(&input, 1), false);
  Eigen::Index best = 0;
  prediction.probabilities.row(0).maxCoeff(&best);

  AttributionRecord record;
  record.predicted_class = static_cast<ClassId>(best);
  record.predicted_probability = prediction.probabilities(0, best);
  record.tokens = input.tokens;

  const LogitScorer scorer(params, input.attention_mask, record.predicted_class);
  const Matrix input_emb = Embed(params, input);
  const Matrix baseline_emb = Embed(params, baseline);
  const Matrix attributions =
      IntegratedGradients(scorer, input_emb, baseline_emb, config.steps);

  record.raw_scores.resize(input.num_real());
  double sq = 0.0;
  for (std::size_t i = 0; i < input.num_real(); ++i) {
    record.raw_scores[i] = attributions.row(static_cast<Eigen::Index>(i)).sum();
    sq += record.raw_scores[i] * record.raw_scores[i];
  }
  const double norm = std::sqrt(sq);
  record.normalized_scores.assign(record.raw_scores.size(), 0.0);
  if (norm > 0.0) {
    for (std::size_t i = 0; i < record.raw_scores.size(); ++i) {
      record.normalized_scores[i] =
          config.normalize ? record.raw_scores[i] / norm : record.raw_scores[i];
    }
  }
  const double endpoint_gap = scorer.Value(input_emb) - scorer.Value(baseline_emb);
  record.completeness_gap = std::abs(attributions.sum() - endpoint_gap);
  return record;
}

}  // namespace phishlens
