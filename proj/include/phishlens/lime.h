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

#ifndef PHISHLENS_LIME_H_
#define PHISHLENS_LIME_H_

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "phishlens/corpus.h"

namespace phishlens {

enum class PerturbationSampling {
  kRandom,
  // Every one of the 2^F masks once. Only sensible for small F.
  kExhaustive,
};

inline constexpr std::size_t kMaxExhaustiveFeatures = 20;

struct LimeConfig {
  std::size_t num_features = 15;
  std::size_t num_samples = 1000;
  // On the x100 cosine-distance scale.
  double kernel_width = 25.0;
  double ridge_alpha = 1.0;
  std::uint64_t seed = 0;
  std::vector<std::string> class_names{"Safe Email", "Phishing Email"};
  PerturbationSampling sampling = PerturbationSampling::kRandom;

  void Validate() const;
};

// Distinct lowercased words of a text (the interpretable features) and the
// byte offsets at which each occurs. Features are numbered in order of
// first occurrence.
class WordIndex {
 public:
  static WordIndex Build(std::string_view text);

  std::size_t num_features() const { return words_.size(); }
  bool empty() const { return words_.empty(); }
  const std::vector<std::string>& words() const { return words_; }
  const std::vector<std::size_t>& positions(std::size_t feature) const {
    return positions_[feature];
  }
  std::optional<std::size_t> FeatureOf(std::string_view word) const;

  // The original text minus every occurrence of each inactive feature.
  // Separators are kept.
  std::string Render(std::span<const std::uint8_t> active) const;

  struct Segment {
    std::string text;
    // Feature id for word segments; nullopt for separators.
    std::optional<std::size_t> feature;
  };
  const std::vector<Segment>& segments() const { return segments_; }

 private:
  std::vector<std::string> words_;
  std::vector<std::vector<std::size_t>> positions_;
  std::vector<Segment> segments_;
};

struct Perturbation {
  std::vector<std::uint8_t> mask;
  std::string text;
  double distance = 0.0;
};

// Cosine distance between `mask` and the all-ones vector, times 100.
// An all-zero mask is at distance 100.
double MaskDistance(std::span<const std::uint8_t> mask);

// First sample is the unmodified text. Each other sample removes a uniform
// random number of features (1..F), chosen uniformly without replacement.
std::vector<Perturbation> SamplePerturbations(const WordIndex& index,
                                              std::size_t n, std::uint64_t seed);

// All 2^F masks, the all-ones mask first.
std::vector<Perturbation> EnumeratePerturbations(const WordIndex& index);

// exp(-d^2 / width^2).
double KernelWeight(double distance, double width);

struct LocalFit {
  std::vector<std::size_t> selected;  // column indices into the mask matrix
  std::vector<double> coefficients;   // aligned with `selected`
  double intercept = 0.0;
  double r2 = 0.0;
};

// Weighted ridge with an unpenalized intercept, solved in closed form on
// weight-centered data. Keeps the k columns with the largest |coefficient|
// of the all-column fit and refits on them. Throws kNumericalRank when the
// system is singular, which needs alpha = 0.
LocalFit FitLocalModel(const Eigen::MatrixXd& masks,
                       const Eigen::VectorXd& targets,
                       const Eigen::VectorXd& sample_weights, double alpha,
                       std::size_t k);

struct LimeExplanation {
  ClassId target_class = kPhishingEmail;
  std::string class_name;
  // Descending by |weight|.
  std::vector<std::pair<std::string, double>> weighted_words;
  double intercept = 0.0;
  double local_fit_r2 = 0.0;
  double predicted_probability = 0.0;

  nlohmann::json ToJson() const;
};

// Maps a text to one probability per class.
using TextClassifier = std::function<std::vector<double>(std::string_view)>;

// When `target` is not given, the argmax class of the original text is
// explained.
LimeExplanation ExplainWithLime(std::string_view text,
                                const TextClassifier& classifier,
                                const LimeConfig& config,
                                std::optional<ClassId> target = std::nullopt);

}  // namespace phishlens

#endif  // PHISHLENS_LIME_H_
