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

#ifndef PHISHLENS_CLI_H_
#define PHISHLENS_CLI_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

#include "json.hpp"
#include "phishlens/corpus.h"
#include "phishlens/integrated_gradients.h"
#include "phishlens/lime.h"
#include "phishlens/model.h"
#include "phishlens/training.h"

namespace phishlens {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;

enum class Command { kTrain, kEvaluate, kExplain, kCompare };

enum class BalanceOrder {
  // Oversample the whole corpus, then split. Duplicates may straddle the
  // split, which inflates test scores.
  kBeforeSplit,
  // Split first and oversample only the training partition.
  kAfterSplit,
};

// Everything a run reads from its JSON config file. Absent keys keep
// their defaults.
struct PipelineConfig {
  nlohmann::json model = nlohmann::json::object();
  TrainConfig train;
  CorpusSchema schema;
  double train_fraction = 0.7;
  std::uint64_t split_seed = 42;
  std::uint64_t oversample_seed = 7;
  std::uint64_t init_seed = 1234;
  BalanceOrder balance_order = BalanceOrder::kBeforeSplit;
  LimeConfig lime;
  IGConfig ig;
  std::string corpus_path;
  std::string vocab_path;
  std::string checkpoint_path;

  static PipelineConfig FromJson(const nlohmann::json& j);
  static PipelineConfig Load(const std::string& path);
};

struct RunManifest {
  Command command = Command::kTrain;
  std::string corpus_path;
  std::string vocab_path;
  std::string checkpoint_path;
  std::string config_path;
  std::string predictions_path;
  std::string out_dir = ".";
  bool balance = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> text;
  std::optional<std::size_t> index;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> num_features;
  std::optional<std::size_t> num_samples;

  // Throws kIo naming the first referenced input path that does not exist.
  void Validate() const;
};

// Corpus after cleaning, optional balancing and splitting, as train and
// evaluate both rebuild it.
struct PreparedCorpus {
  LoadReport load;
  LabeledCorpus balanced;
  SplitCorpus split;
};

PreparedCorpus PrepareCorpus(const PipelineConfig& config, bool balance);

int CmdTrain(const RunManifest& manifest, std::ostream& out);
int CmdEvaluate(const RunManifest& manifest, std::ostream& out);
int CmdExplain(const RunManifest& manifest, std::ostream& out);
int CmdCompare(const RunManifest& manifest, std::ostream& out);

// Parses arguments, runs the command and maps failures to exit codes:
// 0 success, 1 internal error, 2 usage or input error.
int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace phishlens

#endif  // PHISHLENS_CLI_H_
