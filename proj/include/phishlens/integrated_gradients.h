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

#ifndef PHISHLENS_INTEGRATED_GRADIENTS_H_
#define PHISHLENS_INTEGRATED_GRADIENTS_H_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "phishlens/corpus.h"
#include "phishlens/model.h"
#include "phishlens/tokenizer.h"

namespace phishlens {

enum class BaselinePolicy {
  // [CLS] and [SEP] stay, every other real token becomes [PAD].
  kPadBaseline,
};

struct IGConfig {
  std::size_t steps = 64;
  BaselinePolicy baseline = BaselinePolicy::kPadBaseline;
  bool normalize = true;

  void Validate() const;
};

TokenSequence MakeBaseline(const TokenSequence& sequence, const Vocabulary& vocab);

// A differentiable scalar function of an input embedding matrix.
class EmbeddingScorer {
 public:
  virtual ~EmbeddingScorer() = default;
  virtual double Value(const Matrix& embeddings) const = 0;
  virtual Matrix Gradient(const Matrix& embeddings) const = 0;
};

// Pre-softmax logit of `target` for one sequence under `mask`.
class LogitScorer : public EmbeddingScorer {
 public:
  LogitScorer(const ModelParameters& params, std::vector<int> mask, ClassId target)
      : params_(params), mask_(std::move(mask)), target_(target) {}

  double Value(const Matrix& embeddings) const override;
  Matrix Gradient(const Matrix& embeddings) const override;

 private:
  const ModelParameters& params_;
  std::vector<int> mask_;
  ClassId target_;
};

// (input - baseline) times the midpoint Riemann average of the gradient
// along the straight path, sampled at (i - 0.5) / steps for i = 1..steps.
Matrix IntegratedGradients(const EmbeddingScorer& scorer, const Matrix& input,
                           const Matrix& baseline, std::size_t steps);

// Attribution of the target logit to each input embedding coordinate.
Matrix IntegratedGradients(const ModelParameters& params,
                           const TokenSequence& input,
                           const TokenSequence& baseline, ClassId target,
                           std::size_t steps);

struct AttributionRecord {
  std::vector<std::string> tokens;
  std::vector<double> raw_scores;
  std::vector<double> normalized_scores;
  ClassId predicted_class = kSafeEmail;
  double predicted_probability = 0.0;
  double completeness_gap = 0.0;

  nlohmann::json ToJson() const;
};

// Encodes `text`, predicts its class and attributes that class's logit to
// the non-pad tokens (summing over embedding dimensions).
AttributionRecord WordAttributions(std::string_view text,
                                   const ModelParameters& params,
                                   const Vocabulary& vocab, std::size_t max_len,
                                   const IGConfig& config);

}  // namespace phishlens

#endif  // PHISHLENS_INTEGRATED_GRADIENTS_H_
