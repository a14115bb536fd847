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

#include "phishlens/cli.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "json.hpp"
#include "phishlens/error.h"
#include "test_util.h"

namespace phishlens {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun RunPhishlens(std::vector<std::string> args) {
  args.insert(args.begin(), "phishlens");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<nlohmann::json> JsonLines(const fs::path& path) {
  std::vector<nlohmann::json> lines;
  std::istringstream in(testing::ReadFile(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(nlohmann::json::parse(line));
  }
  return lines;
}

std::string PredictionsCsv(std::size_t tn, std::size_t fp, std::size_t fn, std::size_t tp) {
  std::string csv = "label,prediction\n";
  auto add = [&](std::size_t n, const char* row) {
    for (std::size_t i = 0; i < n; ++i) csv += row;
  };
  add(tn, "Safe Email,Safe Email\n");
  add(fp, "Safe Email,Phishing Email\n");
  add(fn, "Phishing Email,Safe Email\n");
  add(tp, "1,1\n");
  return csv;
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir();
    const CliRun r = RunPhishlens({"train", "--corpus", Corpus(), "--vocab", Vocab(), "--config",
                          Config(), "--balance", "--out-dir", *dir_ / "train"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() { delete dir_; }

  static std::string Corpus() { return testing::DataPath("fixture_emails.csv"); }
  static std::string Vocab() { return testing::DataPath("toy_vocab.txt"); }
  static std::string Config() { return testing::DataPath("toy_config.json"); }
  static std::string Checkpoint() { return *dir_ / "train/checkpoint.phl"; }

  std::vector<std::string> ModelArgs(const std::string& command, const std::string& out) {
    return {command, "--vocab", Vocab(), "--config", Config(), "--checkpoint", Checkpoint(),
            "--out-dir", out};
  }

  static testing::TempDir* dir_;
  testing::TempDir scratch_;
};

testing::TempDir* CliTest::dir_ = nullptr;

TEST_F(CliTest, TrainWritesCheckpointAndOneStatsLinePerEpoch) {
  EXPECT_TRUE(fs::exists(Checkpoint()));
  const auto lines = JsonLines(*dir_ / "train/stats.jsonl");
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0]["type"], "header");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    EXPECT_EQ(lines[i]["type"], "epoch");
    EXPECT_EQ(lines[i]["epoch"], i - 1);
  }
}

TEST_F(CliTest, BalanceRecordsEqualCounts) {
  const auto header = JsonLines(*dir_ / "train/stats.jsonl")[0];
  EXPECT_EQ(header["counts"]["Safe Email"], 4);
  EXPECT_EQ(header["counts"]["Phishing Email"], 4);
}

TEST_F(CliTest, WithoutBalanceKeepsCleanedCounts) {
  const CliRun r = RunPhishlens({"train", "--corpus", Corpus(), "--vocab", Vocab(), "--config", Config(),
                        "--out-dir", scratch_ / "run"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto header = JsonLines(scratch_ / "run/stats.jsonl")[0];
  EXPECT_EQ(header["counts"]["Safe Email"], 4);
  EXPECT_EQ(header["counts"]["Phishing Email"], 2);
}

TEST_F(CliTest, MissingVocabularyIsUsageError) {
  const CliRun r = RunPhishlens({"train", "--corpus", Corpus(), "--vocab", "/nonexistent/vocab.txt",
                        "--config", Config(), "--out-dir", scratch_ / "x"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/nonexistent/vocab.txt"), std::string::npos);
}

TEST_F(CliTest, UnknownFlagAndMissingSubcommandAreUsageErrors) {
  EXPECT_EQ(RunPhishlens({"train", "--bogus"}).code, 2);
  EXPECT_EQ(RunPhishlens({}).code, 2);
  EXPECT_EQ(RunPhishlens({"frobnicate"}).code, 2);
  EXPECT_EQ(RunPhishlens({"--help"}).code, 0);
}

TEST_F(CliTest, GoldenPredictionsBalanced) {
  testing::WriteFile(scratch_ / "p.csv", PredictionsCsv(3281, 98, 5, 3410));
  const CliRun r = RunPhishlens({"evaluate", "--predictions", scratch_ / "p.csv", "--out-dir",
                        scratch_ / "ev"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Accuracy: 98.48"), std::string::npos);
  const auto j = nlohmann::json::parse(testing::ReadFile(scratch_ / "ev/metrics.json"));
  EXPECT_EQ(j["accuracy"]["percent"], "98.48");
}

TEST_F(CliTest, GoldenPredictionsImbalanced) {
  testing::WriteFile(scratch_ / "p.csv", PredictionsCsv(3235, 116, 24, 2216));
  const CliRun r = RunPhishlens({"evaluate", "--predictions", scratch_ / "p.csv", "--out-dir",
                        scratch_ / "ev"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Accuracy: 97.50"), std::string::npos);
}

TEST_F(CliTest, EvaluateCheckpointWritesMetricsAndCurves) {
  auto args = ModelArgs("evaluate", scratch_ / "ev");
  args.insert(args.end(), {"--corpus", Corpus(), "--balance"});
  const CliRun r = RunPhishlens(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(scratch_ / "ev/metrics.json"));
  EXPECT_TRUE(fs::exists(scratch_ / "ev/metrics.txt"));
  const std::string curve = testing::ReadFile(scratch_ / "ev/accuracy_curve.csv");
  EXPECT_EQ(curve.substr(0, curve.find('\n')), "epoch,train_accuracy,test_accuracy");
  EXPECT_EQ(std::count(curve.begin(), curve.end(), '\n'), 4);
  EXPECT_TRUE(fs::exists(scratch_ / "ev/loss_curve.csv"));
}

TEST_F(CliTest, EmptyTestPartitionIsUsageError) {
  testing::WriteFile(scratch_ / "all_train.json",
                     R"({"model": {"preset": "toy", "num_layers": 2},
                         "train": {"max_len": 32},
                         "corpus": {"train_fraction": 1.0}})");
  const CliRun r = RunPhishlens({"evaluate", "--corpus", Corpus(), "--vocab", Vocab(), "--config",
                        scratch_ / "all_train.json", "--checkpoint", Checkpoint(),
                        "--out-dir", scratch_ / "ev"});
  EXPECT_EQ(r.code, 2);
}

TEST_F(CliTest, CheckpointConfigMismatchIsUsageError) {
  testing::WriteFile(scratch_ / "wide.json",
                     R"({"model": {"preset": "toy", "num_layers": 2, "hidden_dim": 32},
                         "train": {"max_len": 32}})");
  const CliRun r = RunPhishlens({"evaluate", "--corpus", Corpus(), "--vocab", Vocab(), "--config",
                        scratch_ / "wide.json", "--checkpoint", Checkpoint(), "--out-dir",
                        scratch_ / "ev"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("shape"), std::string::npos);
}

TEST_F(CliTest, ExplainWritesHtmlAndJson) {
  auto args = ModelArgs("explain", scratch_ / "ex");
  args.insert(args.end(), {"--text", "urgent: verify your bank password now"});
  const CliRun r = RunPhishlens(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string html = testing::ReadFile(scratch_ / "ex/explanation.html");
  EXPECT_NE(html.find("id=\"lime\""), std::string::npos);
  EXPECT_NE(html.find("id=\"ig\""), std::string::npos);
  const auto j = nlohmann::json::parse(testing::ReadFile(scratch_ / "ex/explanation.json"));
  EXPECT_TRUE(j.contains("lime"));
  EXPECT_TRUE(j.contains("integrated_gradients"));
  for (const auto& f : j["lime"]["features"]) {
    const double w = f["weight"];
    if (w > 0) EXPECT_NE(html.find("class=\"pos"), std::string::npos);
    if (w < 0) EXPECT_NE(html.find("class=\"neg"), std::string::npos);
  }
}

TEST_F(CliTest, IndexModeMatchesInlineText) {
  auto by_index = ModelArgs("explain", scratch_ / "a");
  by_index.insert(by_index.end(), {"--corpus", Corpus(), "--index", "4"});
  ASSERT_EQ(RunPhishlens(by_index).code, 0);
  auto inline_text = ModelArgs("explain", scratch_ / "b");
  inline_text.insert(inline_text.end(),
                     {"--text", "urgent: verify your account now to claim your free prize"});
  ASSERT_EQ(RunPhishlens(inline_text).code, 0);
  EXPECT_EQ(testing::ReadFile(scratch_ / "a/explanation.html"),
            testing::ReadFile(scratch_ / "b/explanation.html"));
  EXPECT_EQ(testing::ReadFile(scratch_ / "a/explanation.json"),
            testing::ReadFile(scratch_ / "b/explanation.json"));
}

TEST_F(CliTest, EmptyTextAndBadIndexAreUsageErrors) {
  auto empty = ModelArgs("explain", scratch_ / "e");
  empty.insert(empty.end(), {"--text", "   "});
  EXPECT_EQ(RunPhishlens(empty).code, 2);
  auto neither = ModelArgs("explain", scratch_ / "e");
  EXPECT_EQ(RunPhishlens(neither).code, 2);
  auto far = ModelArgs("compare", scratch_ / "e");
  far.insert(far.end(), {"--corpus", Corpus(), "--index", "99"});
  EXPECT_EQ(RunPhishlens(far).code, 2);
}

TEST_F(CliTest, ComparePercentsSumToHundred) {
  auto args = ModelArgs("compare", scratch_ / "c");
  args.insert(args.end(), {"--text", "click this link to update your bank password",
                           "--num-samples", "150", "--steps", "16"});
  const CliRun r = RunPhishlens(args);
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream csv(testing::ReadFile(scratch_ / "c/comparison.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "word,lime_percent,ig_percent");
  double lime = 0, ig = 0;
  while (std::getline(csv, line)) {
    const auto a = line.find(','), b = line.rfind(',');
    lime += std::stod(line.substr(a + 1, b - a - 1));
    ig += std::stod(line.substr(b + 1));
  }
  EXPECT_NEAR(lime, 100.0, 0.01);
  EXPECT_NEAR(ig, 100.0, 0.01);
}

TEST_F(CliTest, SeedOverrideIsReproducible) {
  auto a = ModelArgs("explain", scratch_ / "s1");
  a.insert(a.end(), {"--text", "verify your bank password", "--seed", "3"});
  auto b = ModelArgs("explain", scratch_ / "s2");
  b.insert(b.end(), {"--text", "verify your bank password", "--seed", "3"});
  ASSERT_EQ(RunPhishlens(a).code, 0);
  ASSERT_EQ(RunPhishlens(b).code, 0);
  EXPECT_EQ(testing::ReadFile(scratch_ / "s1/explanation.json"),
            testing::ReadFile(scratch_ / "s2/explanation.json"));
}

TEST(RunManifest, ValidateNamesMissingPath) {
  RunManifest m;
  m.command = Command::kEvaluate;
  m.checkpoint_path = "/nonexistent/model.phl";
  try {
    m.Validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
    EXPECT_NE(std::string(e.what()).find("/nonexistent/model.phl"), std::string::npos);
  }
}

TEST(PipelineConfig, ParsesSections) {
  const PipelineConfig c = PipelineConfig::Load(testing::DataPath("toy_config.json"));
  EXPECT_EQ(c.train.epochs, 3u);
  EXPECT_EQ(c.lime.num_samples, 200u);
  EXPECT_EQ(c.ig.steps, 32u);
  EXPECT_EQ(c.split_seed, 42u);
  EXPECT_THROW(PipelineConfig::FromJson({{"corpus", {{"balance_order", "sideways"}}}}), Error);
}

}  // namespace
}  // namespace phishlens
