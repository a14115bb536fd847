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

#include "phishlens/corpus.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <optional>

#include "phishlens/error.h"
#include "phishlens/random.h"

namespace phishlens {
namespace {

std::string Trim(const std::string& s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) {
    ++begin;
  }
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) {
    --end;
  }
  return s.substr(begin, end - begin);
}

std::string ToLowerAscii(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool IsBlank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isspace(c) != 0;
  });
}

std::optional<std::size_t> FindColumn(const std::vector<std::string>& header,
                                      const std::string& name) {
  const std::string wanted = ToLowerAscii(Trim(name));
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (ToLowerAscii(Trim(header[i])) == wanted) return i;
  }
  return std::nullopt;
}

}  // namespace

LabeledCorpus::LabeledCorpus(std::vector<EmailRecord> records)
    : records_(std::move(records)) {
  for (const EmailRecord& r : records_) {
    if (r.label != kSafeEmail && r.label != kPhishingEmail) {
      throw Error(ErrorKind::kInvalidArgument,
                  "label " + std::to_string(r.label) + " is not 0 or 1");
    }
    ++class_counts_[r.label];
  }
}

std::size_t LabeledCorpus::count(ClassId label) const {
  const auto it = class_counts_.find(label);
  return it == class_counts_.end() ? 0 : it->second;
}

std::vector<std::vector<std::string>> ParseCsv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool in_quotes = false;
  bool row_has_content = false;
  char c;
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          cell.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        cell.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        row_has_content = true;
        break;
      case ',':
        row.push_back(std::move(cell));
        cell.clear();
        row_has_content = true;
        break;
      case '\r':
        if (in.peek() == '\n') break;
        [[fallthrough]];
      case '\n':
        if (row_has_content || !cell.empty()) {
          row.push_back(std::move(cell));
          rows.push_back(std::move(row));
        }
        cell.clear();
        row.clear();
        row_has_content = false;
        break;
      default:
        cell.push_back(c);
        row_has_content = true;
    }
  }
  if (row_has_content || !cell.empty()) {
    row.push_back(std::move(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

LoadReport LoadCorpus(std::istream& in, const CorpusSchema& schema) {
  std::vector<std::vector<std::string>> rows = ParseCsv(in);
  if (rows.empty()) {
    throw Error(ErrorKind::kEmptyCorpus, "input table has no header row");
  }
  std::vector<std::string>& header = rows.front();
  // UTF-8 byte order mark.
  if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) {
    header[0].erase(0, 3);
  }
  const auto text_col = FindColumn(header, schema.text_column);
  const auto label_col = FindColumn(header, schema.label_column);
  if (!text_col || !label_col) {
    throw Error(ErrorKind::kInvalidArgument,
                "header lacks column '" +
                    (text_col ? schema.label_column : schema.text_column) +
                    "'");
  }
  const std::string safe = ToLowerAscii(Trim(schema.safe_name));
  const std::string phishing = ToLowerAscii(Trim(schema.phishing_name));

  LoadReport report;
  std::vector<EmailRecord> records;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::vector<std::string>& row = rows[i];
    ++report.raw_rows;
    std::optional<ClassId> label;
    if (*label_col < row.size()) {
      const std::string name = ToLowerAscii(Trim(row[*label_col]));
      if (name == safe) label = kSafeEmail;
      if (name == phishing) label = kPhishingEmail;
    }
    const bool has_body = *text_col < row.size() && !IsBlank(row[*text_col]);
    if (label) ++report.raw_class_counts[*label];
    if (!has_body) {
      ++report.dropped_empty_body;
      continue;
    }
    if (!label) {
      ++report.dropped_unknown_label;
      continue;
    }
    records.push_back({row[*text_col], *label});
  }
  report.dropped_rows = report.dropped_empty_body + report.dropped_unknown_label;
  if (records.empty()) {
    throw Error(ErrorKind::kEmptyCorpus,
                "no usable rows (" + std::to_string(report.dropped_rows) +
                    " dropped)");
  }
  report.corpus = LabeledCorpus(std::move(records));
  return report;
}

LoadReport LoadCorpus(const std::string& path, const CorpusSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read corpus file " + path);
  return LoadCorpus(in, schema);
}

LabeledCorpus OversampleMinority(const LabeledCorpus& corpus,
                                 std::uint64_t seed) {
  const std::size_t safe = corpus.count(kSafeEmail);
  const std::size_t phishing = corpus.count(kPhishingEmail);
  if (safe == 0 || phishing == 0) {
    throw Error(ErrorKind::kInvalidArgument,
                "cannot balance a corpus missing one class");
  }
  if (safe == phishing) return corpus;
  const ClassId minority = safe < phishing ? kSafeEmail : kPhishingEmail;
  const std::size_t deficit = std::max(safe, phishing) - std::min(safe, phishing);

  std::vector<std::size_t> minority_rows;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus.records()[i].label == minority) minority_rows.push_back(i);
  }
  std::vector<EmailRecord> out = corpus.records();
  out.reserve(out.size() + deficit);
  Rng rng(seed);
  for (std::size_t i = 0; i < deficit; ++i) {
    out.push_back(corpus.records()[minority_rows[rng.Index(minority_rows.size())]]);
  }
  return LabeledCorpus(std::move(out));
}

std::size_t TrainSize(std::size_t total, double train_fraction) {
  // The small slack keeps fractions such as 0.29 * 100 from flooring to 28.
  const double exact = train_fraction * static_cast<double>(total);
  return std::min(total, static_cast<std::size_t>(std::floor(exact + 1e-9)));
}

SplitCorpus Split(const LabeledCorpus& corpus, double train_fraction,
                  std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument,
                "train fraction must lie in (0, 1]");
  }
  if (corpus.empty()) {
    throw Error(ErrorKind::kEmptyCorpus, "cannot split an empty corpus");
  }
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.Shuffle(order);

  const std::size_t n_train = TrainSize(corpus.size(), train_fraction);
  std::vector<EmailRecord> train;
  std::vector<EmailRecord> test;
  train.reserve(n_train);
  test.reserve(corpus.size() - n_train);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? train : test).push_back(corpus.records()[order[i]]);
  }
  return {LabeledCorpus(std::move(train)), LabeledCorpus(std::move(test)),
          train_fraction, seed};
}

std::string ClassName(ClassId label) {
  return label == kPhishingEmail ? "Phishing Email" : "Safe Email";
}

nlohmann::json CorpusSummaryJson(const LoadReport& report,
                                 const LabeledCorpus& final_corpus,
                                 std::uint64_t seed) {
  auto counts = [](const std::map<ClassId, std::size_t>& m) {
    nlohmann::json j = nlohmann::json::object();
    for (ClassId c : {kSafeEmail, kPhishingEmail}) {
      const auto it = m.find(c);
      j[ClassName(c)] = it == m.end() ? 0 : it->second;
    }
    return j;
  };
  return {
      {"counts", counts(final_corpus.class_counts())},
      {"cleaned_counts", counts(report.corpus.class_counts())},
      {"raw_counts", counts(report.raw_class_counts)},
      {"raw_rows", report.raw_rows},
      {"dropped_rows", report.dropped_rows},
      {"seed", seed},
  };
}

}  // namespace phishlens
