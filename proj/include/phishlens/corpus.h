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

#ifndef PHISHLENS_CORPUS_H_
#define PHISHLENS_CORPUS_H_

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace phishlens {

using ClassId = int;
inline constexpr ClassId kSafeEmail = 0;
inline constexpr ClassId kPhishingEmail = 1;
inline constexpr int kNumClasses = 2;

struct EmailRecord {
  std::string body;
  ClassId label = kSafeEmail;

  friend bool operator==(const EmailRecord&, const EmailRecord&) = default;
};

// Ordered records plus per-class counts that always agree with them.
class LabeledCorpus {
 public:
  LabeledCorpus() = default;
  explicit LabeledCorpus(std::vector<EmailRecord> records);

  const std::vector<EmailRecord>& records() const { return records_; }
  const std::map<ClassId, std::size_t>& class_counts() const {
    return class_counts_;
  }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  std::size_t count(ClassId label) const;

 private:
  std::vector<EmailRecord> records_;
  std::map<ClassId, std::size_t> class_counts_;
};

struct SplitCorpus {
  LabeledCorpus train;
  LabeledCorpus test;
  double train_fraction = 0.7;
  std::uint64_t seed = 0;
};

// Column names and class names of the input table. Class names are matched
// case-insensitively after trimming.
struct CorpusSchema {
  std::string text_column = "Email Text";
  std::string label_column = "Email Type";
  std::string safe_name = "Safe Email";
  std::string phishing_name = "Phishing Email";
};

struct LoadReport {
  LabeledCorpus corpus;
  std::size_t raw_rows = 0;
  std::size_t dropped_rows = 0;
  std::size_t dropped_empty_body = 0;
  std::size_t dropped_unknown_label = 0;
  // Label counts over all rows with a recognized label, before dropping
  // null bodies.
  std::map<ClassId, std::size_t> raw_class_counts;
};

// Splits comma-separated text with double-quote quoting into rows of cells.
// Quoted cells may contain commas, doubled quotes and line breaks.
std::vector<std::vector<std::string>> ParseCsv(std::istream& in);

LoadReport LoadCorpus(std::istream& in, const CorpusSchema& schema = {});
LoadReport LoadCorpus(const std::string& path, const CorpusSchema& schema = {});

// Duplicates randomly chosen minority records (with replacement) until both
// classes have the majority count. Originals keep their order and come first.
LabeledCorpus OversampleMinority(const LabeledCorpus& corpus,
                                 std::uint64_t seed);

// Seeded shuffle, then the first floor(train_fraction * N) records train.
SplitCorpus Split(const LabeledCorpus& corpus, double train_fraction,
                  std::uint64_t seed);

std::size_t TrainSize(std::size_t total, double train_fraction);

std::string ClassName(ClassId label);

nlohmann::json CorpusSummaryJson(const LoadReport& report,
                                 const LabeledCorpus& final_corpus,
                                 std::uint64_t seed);

}  // namespace phishlens

#endif  // PHISHLENS_CORPUS_H_
