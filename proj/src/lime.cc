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

#include "phishlens/lime.h"

#include <unicode/locid.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "phishlens/error.h"
#include "phishlens/random.h"

namespace phishlens {
namespace {

std::string LowerUtf8(const std::string& word) {
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(word);
  u.toLower(icu::Locale::getRoot());
  std::string out;
  u.toUTF8String(out);
  return out;
}

struct RidgeSolution {
  Eigen::VectorXd beta;
  double intercept = 0.0;
};

RidgeSolution WeightedRidge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& w, double alpha) {
  const double sw = w.sum();
  if (!(sw > 0.0)) {
    throw Error(ErrorKind::kNumericalRank, "sample weights sum to zero");
  }
  const Eigen::VectorXd x_mean = x.transpose() * w / sw;
  const double y_mean = w.dot(y) / sw;
  const Eigen::MatrixXd xc = x.rowwise() - x_mean.transpose();
  const Eigen::VectorXd yc = y.array() - y_mean;

  RidgeSolution s;
  if (x.cols() == 0) {
    s.intercept = y_mean;
    return s;
  }
  const Eigen::MatrixXd xw = xc.array().colwise() * w.array();
  Eigen::MatrixXd gram = xw.transpose() * xc;
  gram.diagonal().array() += alpha;
  const Eigen::VectorXd rhs = xw.transpose() * yc;

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gram);
  if (qr.rank() < gram.cols()) {
    if (alpha == 0.0) {
      throw Error(ErrorKind::kNumericalRank,
                  "local linear system is rank deficient; use ridge_alpha > 0");
    }
  }
  s.beta = qr.solve(rhs);
  s.intercept = y_mean - x_mean.dot(s.beta);
  return s;
}

double WeightedR2(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& w, const RidgeSolution& s) {
  const double sw = w.sum();
  const double y_mean = w.dot(y) / sw;
  Eigen::VectorXd pred = Eigen::VectorXd::Constant(y.size(), s.intercept);
  if (x.cols() > 0) pred += x * s.beta;
  const double ss_res = w.dot((y - pred).array().square().matrix());
  const double ss_tot = w.dot((y.array() - y_mean).square().matrix());
  const double tiny = 1e-30 * sw;
  if (ss_tot <= tiny) return ss_res <= tiny ? 1.0 : 0.0;
  // Ridge never does worse than the intercept alone, so R2 >= 0 up to
  // rounding.
  return std::max(0.0, 1.0 - ss_res / ss_tot);
}

Eigen::MatrixXd Columns(const Eigen::MatrixXd& x,
                        const std::vector<std::size_t>& cols) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    out.col(static_cast<Eigen::Index>(j)) = x.col(static_cast<Eigen::Index>(cols[j]));
  }
  return out;
}

}  // namespace

void LimeConfig::Validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorKind::kConfig, "invalid LIME config: " + what);
  };
  if (num_features < 1) fail("num_features must be at least 1");
  if (num_samples < 1) fail("num_samples must be at least 1");
  if (!(kernel_width > 0.0)) fail("kernel_width must be positive");
  if (!(ridge_alpha >= 0.0)) fail("ridge_alpha must be non-negative");
  if (class_names.empty()) fail("class_names must not be empty");
}

WordIndex WordIndex::Build(std::string_view text) {
  WordIndex index;
  const auto* s = reinterpret_cast<const uint8_t*>(text.data());
  const auto n = static_cast<int32_t>(text.size());
  std::string word;
  std::string separator;
  std::size_t word_start = 0;
  auto flush_word = [&] {
    if (word.empty()) return;
    const std::string key = LowerUtf8(word);
    auto existing = index.FeatureOf(key);
    std::size_t feature;
    if (existing) {
      feature = *existing;
    } else {
      feature = index.words_.size();
      index.words_.push_back(key);
      index.positions_.emplace_back();
    }
    index.positions_[feature].push_back(word_start);
    index.segments_.push_back({word, feature});
    word.clear();
  };
  auto flush_separator = [&] {
    if (separator.empty()) return;
    index.segments_.push_back({separator, std::nullopt});
    separator.clear();
  };
  int32_t i = 0;
  while (i < n) {
    const int32_t start = i;
    UChar32 c;
    U8_NEXT(s, i, n, c);
    const std::string_view bytes = text.substr(static_cast<std::size_t>(start),
                                               static_cast<std::size_t>(i - start));
    if (c >= 0 && u_isalnum(c)) {
      if (word.empty()) {
        flush_separator();
        word_start = static_cast<std::size_t>(start);
      }
      word.append(bytes);
    } else {
      flush_word();
      separator.append(bytes);
    }
  }
  flush_word();
  flush_separator();
  return index;
}

std::optional<std::size_t> WordIndex::FeatureOf(std::string_view word) const {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i] == word) return i;
  }
  return std::nullopt;
}

std::string WordIndex::Render(std::span<const std::uint8_t> active) const {
  if (active.size() != words_.size()) {
    throw Error(ErrorKind::kInvalidArgument, "mask length differs from feature count");
  }
  std::string out;
  for (const Segment& seg : segments_) {
    if (!seg.feature || active[*seg.feature] != 0) out += seg.text;
  }
  return out;
}

double MaskDistance(std::span<const std::uint8_t> mask) {
  if (mask.empty()) return 0.0;
  const auto active = static_cast<double>(std::count_if(
      mask.begin(), mask.end(), [](std::uint8_t v) { return v != 0; }));
  if (active == 0.0) return 100.0;
  if (active == static_cast<double>(mask.size())) return 0.0;
  const double cosine = active / (std::sqrt(active) * std::sqrt(static_cast<double>(mask.size())));
  return (1.0 - cosine) * 100.0;
}

std::vector<Perturbation> SamplePerturbations(const WordIndex& index,
                                              std::size_t n, std::uint64_t seed) {
  if (index.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "text has no words to perturb");
  }
  const std::size_t features = index.num_features();
  Rng rng(seed);
  std::vector<Perturbation> out;
  out.reserve(n);
  std::vector<std::size_t> pool(features);
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<std::uint8_t> mask(features, 1);
    if (s > 0) {
      const std::size_t remove = 1 + rng.Index(features);
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      for (std::size_t k = 0; k < remove; ++k) {
        std::swap(pool[k], pool[k + rng.Index(features - k)]);
        mask[pool[k]] = 0;
      }
    }
    Perturbation p;
    p.text = index.Render(mask);
    p.distance = MaskDistance(mask);
    p.mask = std::move(mask);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Perturbation> EnumeratePerturbations(const WordIndex& index) {
  if (index.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "text has no words to perturb");
  }
  const std::size_t features = index.num_features();
  if (features > kMaxExhaustiveFeatures) {
    throw Error(ErrorKind::kInvalidArgument,
                "exhaustive sampling supports at most " +
                    std::to_string(kMaxExhaustiveFeatures) + " features");
  }
  const std::uint64_t total = std::uint64_t{1} << features;
  std::vector<Perturbation> out;
  out.reserve(total);
  // Bit j of the code set means feature j is removed; code 0 is the original.
  for (std::uint64_t code = 0; code < total; ++code) {
    std::vector<std::uint8_t> mask(features);
    for (std::size_t j = 0; j < features; ++j) mask[j] = ((code >> j) & 1) ? 0 : 1;
    Perturbation p;
    p.text = index.Render(mask);
    p.distance = MaskDistance(mask);
    p.mask = std::move(mask);
    out.push_back(std::move(p));
  }
  return out;
}

double KernelWeight(double distance, double width) {
  if (!(width > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "kernel width must be positive");
  }
  return std::exp(-(distance * distance) / (width * width));
}

LocalFit FitLocalModel(const Eigen::MatrixXd& masks,
                       const Eigen::VectorXd& targets,
                       const Eigen::VectorXd& sample_weights, double alpha,
                       std::size_t k) {
  if (masks.rows() < 1 || k < 1) {
    throw Error(ErrorKind::kInvalidArgument, "local fit needs n >= 1 and k >= 1");
  }
  if (targets.size() != masks.rows() || sample_weights.size() != masks.rows()) {
    throw Error(ErrorKind::kInvalidArgument, "local fit inputs differ in length");
  }
  const auto features = static_cast<std::size_t>(masks.cols());
  std::vector<std::size_t> all(features);
  std::iota(all.begin(), all.end(), std::size_t{0});

  RidgeSolution full = WeightedRidge(masks, targets, sample_weights, alpha);
  std::vector<std::size_t> selected = all;
  RidgeSolution fit = full;
  if (k < features) {
    std::stable_sort(selected.begin(), selected.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(full.beta(static_cast<Eigen::Index>(a))) >
             std::abs(full.beta(static_cast<Eigen::Index>(b)));
    });
    selected.resize(k);
    std::sort(selected.begin(), selected.end());
    fit = WeightedRidge(Columns(masks, selected), targets, sample_weights, alpha);
  }
  LocalFit out;
  out.selected = selected;
  out.coefficients.assign(fit.beta.data(), fit.beta.data() + fit.beta.size());
  out.intercept = fit.intercept;
  out.r2 = WeightedR2(Columns(masks, selected), targets, sample_weights, fit);
  return out;
}

nlohmann::json LimeExplanation::ToJson() const {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& [word, weight] : weighted_words) {
    features.push_back({{"word", word}, {"weight", weight}});
  }
  return {{"class", target_class},
          {"class_name", class_name},
          {"intercept", intercept},
          {"r2", local_fit_r2},
          {"predicted_probability", predicted_probability},
          {"features", features}};
}

LimeExplanation ExplainWithLime(std::string_view text,
                                const TextClassifier& classifier,
                                const LimeConfig& config,
                                std::optional<ClassId> target) {
  config.Validate();
  const WordIndex index = WordIndex::Build(text);
  const std::vector<Perturbation> samples =
      config.sampling == PerturbationSampling::kExhaustive
          ? EnumeratePerturbations(index)
          : SamplePerturbations(index, config.num_samples, config.seed);

  auto score = [&](std::string_view t) {
    std::vector<double> p = classifier(t);
    double sum = 0.0;
    bool valid = p.size() == config.class_names.size();
    for (double v : p) {
      valid = valid && std::isfinite(v) && v >= 0.0;
      sum += v;
    }
    if (!valid || std::abs(sum - 1.0) > 1e-3) {
      throw Error(ErrorKind::kContract,
                  "classifier did not return a probability vector over the classes");
    }
    return p;
  };

  const std::vector<double> original = score(samples.front().text);
  LimeExplanation out;
  out.target_class = target.value_or(static_cast<ClassId>(
      std::max_element(original.begin(), original.end()) - original.begin()));
  if (out.target_class < 0 ||
      static_cast<std::size_t>(out.target_class) >= original.size()) {
    throw Error(ErrorKind::kInvalidArgument, "target class outside class_names");
  }
  out.class_name = config.class_names[static_cast<std::size_t>(out.target_class)];
  out.predicted_probability = original[static_cast<std::size_t>(out.target_class)];

  const auto n = static_cast<Eigen::Index>(samples.size());
  const auto f = static_cast<Eigen::Index>(index.num_features());
  Eigen::MatrixXd masks(n, f);
  Eigen::VectorXd targets(n);
  Eigen::VectorXd weights(n);
  for (Eigen::Index s = 0; s < n; ++s) {
    const Perturbation& p = samples[static_cast<std::size_t>(s)];
    for (Eigen::Index j = 0; j < f; ++j) masks(s, j) = p.mask[static_cast<std::size_t>(j)];
    targets(s) = s == 0 ? out.predicted_probability
                        : score(p.text)[static_cast<std::size_t>(out.target_class)];
    weights(s) = KernelWeight(p.distance, config.kernel_width);
  }

  const LocalFit fit =
      FitLocalModel(masks, targets, weights, config.ridge_alpha, config.num_features);
  for (std::size_t j = 0; j < fit.selected.size(); ++j) {
    out.weighted_words.emplace_back(index.words()[fit.selected[j]], fit.coefficients[j]);
  }
  std::stable_sort(out.weighted_words.begin(), out.weighted_words.end(),
                   [](const auto& a, const auto& b) {
                     return std::abs(a.second) > std::abs(b.second);
                   });
  out.intercept = fit.intercept;
  out.local_fit_r2 = fit.r2;
  return out;
}

}  // namespace phishlens
