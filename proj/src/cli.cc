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

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "phishlens/error.h"
#include "phishlens/metrics.h"
#include "phishlens/report.h"
#include "phishlens/tokenizer.h"

namespace phishlens {
namespace {

namespace fs = std::filesystem;

template <typename T>
void ReadField(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

std::string Slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorKind::kIo, "failed writing " + path.string());
}

fs::path OutDir(const RunManifest& m) {
  const fs::path dir(m.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create output directory " + m.out_dir);
  return dir;
}

PipelineConfig ResolveConfig(const RunManifest& m) {
  PipelineConfig cfg = m.config_path.empty() ? PipelineConfig{}
                                             : PipelineConfig::Load(m.config_path);
  if (!m.corpus_path.empty()) cfg.corpus_path = m.corpus_path;
  if (!m.vocab_path.empty()) cfg.vocab_path = m.vocab_path;
  if (!m.checkpoint_path.empty()) cfg.checkpoint_path = m.checkpoint_path;
  if (m.seed) {
    const std::uint64_t s = *m.seed;
    cfg.split_seed = s;
    cfg.oversample_seed = s + 1;
    cfg.init_seed = s + 2;
    cfg.train.shuffle_seed = s + 3;
    cfg.train.dropout_seed = s + 4;
    cfg.lime.seed = s + 5;
  }
  if (m.steps) cfg.ig.steps = *m.steps;
  if (m.num_features) cfg.lime.num_features = *m.num_features;
  if (m.num_samples) cfg.lime.num_samples = *m.num_samples;
  return cfg;
}

void RequirePath(const std::string& path, const char* what) {
  if (path.empty()) {
    throw Error(ErrorKind::kInvalidArgument, std::string("no ") + what + " path given");
  }
  if (!fs::exists(path)) {
    throw Error(ErrorKind::kIo, std::string(what) + " not found: " + path);
  }
}

ModelConfig ResolveModelConfig(const PipelineConfig& cfg, const Vocabulary& vocab) {
  ModelConfig mc = ModelConfig::FromJson(cfg.model);
  if (!cfg.model.contains("vocab_size")) mc.vocab_size = vocab.size();
  if (mc.vocab_size != vocab.size()) {
    throw Error(ErrorKind::kConfig,
                "model vocab_size " + std::to_string(mc.vocab_size) +
                    " differs from vocabulary size " + std::to_string(vocab.size()));
  }
  if (mc.max_positions < cfg.train.max_len) {
    throw Error(ErrorKind::kConfig,
                "max_len " + std::to_string(cfg.train.max_len) +
                    " exceeds model max_positions " + std::to_string(mc.max_positions));
  }
  mc.Validate();
  return mc;
}

std::string FormatCounts(const LabeledCorpus& c) {
  return std::to_string(c.count(kSafeEmail)) + " safe / " +
         std::to_string(c.count(kPhishingEmail)) + " phishing";
}

void WriteCurves(const fs::path& stats_path, const fs::path& dir) {
  std::ifstream in(stats_path);
  if (!in) return;
  std::string acc = "epoch,train_accuracy,test_accuracy\n";
  std::string loss = "epoch,train_loss,test_loss\n";
  auto cell = [](const nlohmann::json& v) {
    return v.is_null() ? std::string() : FormatFixed(v.get<double>(), 6);
  };
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || j.value("type", "") != "epoch") continue;
    const std::string epoch = std::to_string(j.at("epoch").get<std::size_t>() + 1);
    acc += epoch + "," + cell(j.at("train_acc")) + "," + cell(j.at("eval_acc")) + "\n";
    loss += epoch + "," + cell(j.at("train_loss")) + "," + cell(j.at("eval_loss")) + "\n";
  }
  WriteFile(dir / "accuracy_curve.csv", acc);
  WriteFile(dir / "loss_curve.csv", loss);
}

ClassId ParseClass(const std::string& cell) {
  std::string s;
  for (char c : cell) {
    if (!std::isspace(static_cast<unsigned char>(c))) {
      s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (s == "0" || s == "safeemail") return kSafeEmail;
  if (s == "1" || s == "phishingemail") return kPhishingEmail;
  throw Error(ErrorKind::kInvalidArgument, "unrecognized class '" + cell + "'");
}

ConfusionMatrix ConfusionFromPredictionsFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read predictions file " + path);
  const auto rows = ParseCsv(in);
  if (rows.size() < 2) throw Error(ErrorKind::kEmptyCorpus, "predictions file is empty");
  std::optional<std::size_t> label_col, pred_col;
  for (std::size_t i = 0; i < rows[0].size(); ++i) {
    if (rows[0][i] == "label") label_col = i;
    if (rows[0][i] == "prediction") pred_col = i;
  }
  if (!label_col || !pred_col) {
    throw Error(ErrorKind::kInvalidArgument,
                "predictions file needs 'label' and 'prediction' columns");
  }
  std::vector<ClassId> labels, predictions;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() <= std::max(*label_col, *pred_col)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "short row " + std::to_string(r) + " in " + path);
    }
    labels.push_back(ParseClass(rows[r][*label_col]));
    predictions.push_back(ParseClass(rows[r][*pred_col]));
  }
  return Confusion(predictions, labels);
}

int ReportMetrics(const ConfusionMatrix& cm, std::optional<double> loss,
                  const fs::path& dir, std::ostream& out) {
  nlohmann::json metrics = MetricsJson(cm);
  if (loss) metrics["loss"] = *loss;
  WriteFile(dir / "metrics.json", metrics.dump(2) + "\n");
  const std::string text = MetricsText(cm);
  WriteFile(dir / "metrics.txt", text);
  out << text;
  if (loss) out << "Loss: " << FormatFixed(*loss, 4) << "\n";
  return kExitOk;
}

struct LoadedModel {
  Vocabulary vocab;
  ModelParameters params;
  std::size_t max_len;
};

LoadedModel LoadModel(const PipelineConfig& cfg) {
  RequirePath(cfg.vocab_path, "vocabulary");
  RequirePath(cfg.checkpoint_path, "checkpoint");
  Vocabulary vocab = Vocabulary::Load(cfg.vocab_path);
  ModelParameters params = LoadCheckpoint(cfg.checkpoint_path);
  if (params.config.vocab_size != vocab.size()) {
    throw Error(ErrorKind::kShapeMismatch,
                "checkpoint vocab_size " + std::to_string(params.config.vocab_size) +
                    " differs from vocabulary size " + std::to_string(vocab.size()));
  }
  if (!cfg.model.empty()) {
    ModelConfig expected = ResolveModelConfig(cfg, vocab);
    if (!(expected == params.config)) {
      throw Error(ErrorKind::kShapeMismatch,
                  "checkpoint config " + params.config.ToJson().dump() +
                      " differs from configured model " + expected.ToJson().dump());
    }
  }
  const std::size_t max_len = std::min(cfg.train.max_len, params.config.max_positions);
  return {std::move(vocab), std::move(params), max_len};
}

std::string ExplainedText(const RunManifest& m, const PipelineConfig& cfg) {
  if (m.text && m.index) {
    throw Error(ErrorKind::kInvalidArgument, "give either --text or --index, not both");
  }
  std::string text;
  if (m.text) {
    text = *m.text;
  } else if (m.index) {
    RequirePath(cfg.corpus_path, "corpus");
    const LoadReport load = LoadCorpus(cfg.corpus_path, cfg.schema);
    if (*m.index >= load.corpus.size()) {
      throw Error(ErrorKind::kInvalidArgument,
                  "record index " + std::to_string(*m.index) + " outside corpus of " +
                      std::to_string(load.corpus.size()));
    }
    text = load.corpus.records()[*m.index].body;
  } else {
    throw Error(ErrorKind::kInvalidArgument, "explain needs --text or --index");
  }
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorKind::kInvalidArgument, "text to explain is empty");
  }
  return text;
}

ExplanationReport BuildExplanation(const RunManifest& m) {
  const PipelineConfig cfg = ResolveConfig(m);
  const std::string text = ExplainedText(m, cfg);
  const LoadedModel model = LoadModel(cfg);

  const TextClassifier classifier = [&](std::string_view t) {
    const TokenSequence seq = Encode(t, model.vocab, model.max_len);
    const ForwardOutput out = Forward(model.params, std::span(&seq, 1), false);
    return std::vector<double>{out.probabilities(0, 0), out.probabilities(0, 1)};
  };
  ExplanationReport report;
  report.text = text;
  report.class_names = cfg.lime.class_names;
  report.lime = ExplainWithLime(text, classifier, cfg.lime);
  report.ig = WordAttributions(text, model.params, model.vocab, model.max_len, cfg.ig);
  return report;
}

bool IsInputError(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo:
    case ErrorKind::kEmptyCorpus:
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kInvalidVocabulary:
    case ErrorKind::kConfig:
    case ErrorKind::kCheckpointCorrupt:
    case ErrorKind::kShapeMismatch:
      return true;
    case ErrorKind::kNumericalRank:
    case ErrorKind::kContract:
    case ErrorKind::kStaleCache:
      return false;
  }
  return false;
}

}  // namespace

PipelineConfig PipelineConfig::FromJson(const nlohmann::json& j) {
  PipelineConfig c;
  try {
    if (j.contains("model")) c.model = j.at("model");
    if (j.contains("train")) c.train = TrainConfig::FromJson(j.at("train"));
    ReadField(j, "init_seed", c.init_seed);
    if (j.contains("corpus")) {
      const auto& k = j.at("corpus");
      ReadField(k, "text_column", c.schema.text_column);
      ReadField(k, "label_column", c.schema.label_column);
      ReadField(k, "safe_name", c.schema.safe_name);
      ReadField(k, "phishing_name", c.schema.phishing_name);
      ReadField(k, "train_fraction", c.train_fraction);
      ReadField(k, "split_seed", c.split_seed);
      ReadField(k, "oversample_seed", c.oversample_seed);
      if (k.contains("balance_order")) {
        const std::string order = k.at("balance_order").get<std::string>();
        if (order == "before_split") {
          c.balance_order = BalanceOrder::kBeforeSplit;
        } else if (order == "after_split") {
          c.balance_order = BalanceOrder::kAfterSplit;
        } else {
          throw Error(ErrorKind::kConfig, "unknown balance_order '" + order + "'");
        }
      }
    }
    if (j.contains("explain")) {
      const auto& k = j.at("explain");
      ReadField(k, "num_features", c.lime.num_features);
      ReadField(k, "num_samples", c.lime.num_samples);
      ReadField(k, "kernel_width", c.lime.kernel_width);
      ReadField(k, "ridge_alpha", c.lime.ridge_alpha);
      ReadField(k, "lime_seed", c.lime.seed);
      ReadField(k, "ig_steps", c.ig.steps);
      ReadField(k, "normalize", c.ig.normalize);
    }
    if (j.contains("paths")) {
      const auto& k = j.at("paths");
      ReadField(k, "corpus", c.corpus_path);
      ReadField(k, "vocab", c.vocab_path);
      ReadField(k, "checkpoint", c.checkpoint_path);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("config: ") + e.what());
  }
  return c;
}

PipelineConfig PipelineConfig::Load(const std::string& path) {
  const nlohmann::json j = nlohmann::json::parse(Slurp(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorKind::kConfig, "config file " + path + " is not a JSON object");
  }
  return FromJson(j);
}

void RunManifest::Validate() const {
  auto check = [](const std::string& path, const char* what) {
    if (!path.empty() && !fs::exists(path)) {
      throw Error(ErrorKind::kIo, std::string(what) + " not found: " + path);
    }
  };
  check(config_path, "config file");
  check(corpus_path, "corpus");
  check(vocab_path, "vocabulary");
  check(predictions_path, "predictions file");
  if (command != Command::kTrain) check(checkpoint_path, "checkpoint");
}

PreparedCorpus PrepareCorpus(const PipelineConfig& cfg, bool balance) {
  RequirePath(cfg.corpus_path, "corpus");
  PreparedCorpus p;
  p.load = LoadCorpus(cfg.corpus_path, cfg.schema);
  p.balanced = p.load.corpus;
  if (balance && cfg.balance_order == BalanceOrder::kBeforeSplit) {
    p.balanced = OversampleMinority(p.load.corpus, cfg.oversample_seed);
  }
  p.split = Split(p.balanced, cfg.train_fraction, cfg.split_seed);
  if (balance && cfg.balance_order == BalanceOrder::kAfterSplit) {
    p.split.train = OversampleMinority(p.split.train, cfg.oversample_seed);
  }
  return p;
}

int CmdTrain(const RunManifest& m, std::ostream& out) {
  m.Validate();
  const PipelineConfig cfg = ResolveConfig(m);
  RequirePath(cfg.vocab_path, "vocabulary");
  const Vocabulary vocab = Vocabulary::Load(cfg.vocab_path);
  const PreparedCorpus corpus = PrepareCorpus(cfg, m.balance);
  const ModelConfig mc = ResolveModelConfig(cfg, vocab);
  ModelParameters params = InitParameters(mc, cfg.init_seed);

  const fs::path dir = OutDir(m);
  nlohmann::json summary = CorpusSummaryJson(corpus.load, corpus.balanced, cfg.split_seed);
  summary["train_size"] = corpus.split.train.size();
  summary["test_size"] = corpus.split.test.size();
  summary["balance"] = m.balance;
  summary["balance_order"] =
      cfg.balance_order == BalanceOrder::kBeforeSplit ? "before_split" : "after_split";
  WriteFile(dir / "corpus_summary.json", summary.dump(2) + "\n");

  std::ofstream stats(dir / "stats.jsonl", std::ios::trunc);
  if (!stats) throw Error(ErrorKind::kIo, "cannot write stats log");
  nlohmann::json header = summary;
  header["type"] = "header";
  header["parameters"] = ParameterCount(mc);
  header["model"] = mc.ToJson();
  header["train_config"] = cfg.train.ToJson();
  stats << header.dump() << "\n";

  out << "corpus: " << FormatCounts(corpus.balanced) << " (dropped "
      << corpus.load.dropped_rows << " rows); train " << corpus.split.train.size()
      << ", test " << corpus.split.test.size() << "\n";
  out << "model: " << ParameterCount(mc) << " parameters\n";

  TrainCallbacks callbacks;
  callbacks.on_epoch = [&](const EpochStats& s) {
    nlohmann::json line = s.ToJson();
    line["type"] = "epoch";
    stats << line.dump() << "\n" << std::flush;
    out << "epoch " << s.epoch_index + 1 << ": train loss "
        << FormatFixed(s.mean_train_loss, 4) << ", train acc "
        << FormatFixed(100.0 * s.train_accuracy, 2);
    if (s.eval_accuracy) {
      out << ", test loss " << FormatFixed(*s.mean_eval_loss, 4) << ", test acc "
          << FormatFixed(100.0 * *s.eval_accuracy, 2);
    }
    out << "\n";
  };
  TrainResult result = Train(std::move(params), corpus.split, vocab, cfg.train, callbacks);

  const std::string checkpoint =
      m.checkpoint_path.empty() ? (dir / "checkpoint.phl").string() : m.checkpoint_path;
  SaveCheckpoint(result.params, checkpoint);
  out << "checkpoint: " << checkpoint << "\n";
  return kExitOk;
}

int CmdEvaluate(const RunManifest& m, std::ostream& out) {
  m.Validate();
  const fs::path dir = OutDir(m);
  if (!m.predictions_path.empty()) {
    return ReportMetrics(ConfusionFromPredictionsFile(m.predictions_path), std::nullopt,
                         dir, out);
  }
  const PipelineConfig cfg = ResolveConfig(m);
  const LoadedModel model = LoadModel(cfg);
  const PreparedCorpus corpus = PrepareCorpus(cfg, m.balance);
  if (corpus.split.test.empty()) {
    throw Error(ErrorKind::kEmptyCorpus, "test partition is empty");
  }
  const EvalResult eval = Evaluate(model.params, corpus.split.test, model.vocab,
                                   model.max_len, cfg.train.eval_batch_size);
  std::vector<ClassId> labels;
  for (const EmailRecord& r : corpus.split.test.records()) labels.push_back(r.label);
  const int code = ReportMetrics(Confusion(eval.predictions, labels), eval.mean_loss, dir, out);
  WriteCurves(fs::path(cfg.checkpoint_path).parent_path() / "stats.jsonl", dir);
  return code;
}

int CmdExplain(const RunManifest& m, std::ostream& out) {
  m.Validate();
  const ExplanationReport report = BuildExplanation(m);
  const fs::path dir = OutDir(m);
  WriteFile(dir / "explanation.html", RenderExplanationHtml(report));
  WriteFile(dir / "explanation.json", ExplanationJson(report).dump(2) + "\n");
  out << "predicted: " << report.lime.class_name << " (p = "
      << FormatFixed(report.lime.predicted_probability, 4) << ")\n";
  for (const auto& [word, weight] : report.lime.weighted_words) {
    out << "  " << word << " " << weight << "\n";
  }
  out << "wrote " << (dir / "explanation.html").string() << "\n";
  return kExitOk;
}

int CmdCompare(const RunManifest& m, std::ostream& out) {
  m.Validate();
  const ExplanationReport report = BuildExplanation(m);
  const std::vector<ComparisonRow> rows = CompareAttributions(report.lime, report.ig);
  const fs::path dir = OutDir(m);
  WriteFile(dir / "comparison.csv", ComparisonCsv(rows));
  nlohmann::json j = nlohmann::json::array();
  for (const ComparisonRow& r : rows) {
    j.push_back({{"word", r.word}, {"lime_percent", r.lime_percent},
                 {"ig_percent", r.ig_percent}});
  }
  WriteFile(dir / "comparison.json", j.dump(2) + "\n");
  char line[128];
  std::snprintf(line, sizeof(line), "%-20s %10s %10s\n", "word", "LIME %", "IG %");
  out << line;
  for (const ComparisonRow& r : rows) {
    std::snprintf(line, sizeof(line), "%-20s %10.2f %10.2f\n", r.word.c_str(),
                  r.lime_percent, r.ig_percent);
    out << line;
  }
  return kExitOk;
}

int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Phishing email classifier with LIME and integrated-gradients explanations",
               "phishlens"};
  app.require_subcommand(1);
  RunManifest m;
  std::uint64_t seed = 0;
  std::string text;
  std::size_t index = 0, steps = 0, num_features = 0, num_samples = 0;

  struct Sub {
    const char* name;
    const char* help;
    Command command;
  };
  const Sub subs[] = {
      {"train", "Fine-tune the classifier and write a checkpoint", Command::kTrain},
      {"evaluate", "Score the test partition and write metrics", Command::kEvaluate},
      {"explain", "Explain one prediction with LIME and integrated gradients",
       Command::kExplain},
      {"compare", "Tabulate LIME and integrated-gradients score percentages",
       Command::kCompare},
  };
  std::vector<CLI::App*> apps;
  std::vector<std::pair<CLI::App*, std::vector<CLI::Option*>>> optional_opts;
  for (const Sub& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    apps.push_back(sub);
    sub->add_option("--corpus", m.corpus_path, "Labeled email CSV");
    sub->add_option("--vocab", m.vocab_path, "WordPiece vocabulary, one token per line");
    sub->add_option("--checkpoint", m.checkpoint_path, "Model checkpoint path");
    sub->add_option("--config", m.config_path, "JSON run configuration");
    sub->add_flag("--balance", m.balance, "Oversample the minority class");
    sub->add_option("--out-dir", m.out_dir, "Directory for outputs");
    std::vector<CLI::Option*> opts;
    opts.push_back(sub->add_option("--seed", seed, "Seed for every random choice"));
    opts.push_back(sub->add_option("--text", text, "Email text to explain"));
    opts.push_back(sub->add_option("--index", index, "Corpus record to explain"));
    opts.push_back(sub->add_option("--steps", steps, "Integrated-gradients steps"));
    opts.push_back(sub->add_option("--num-features", num_features, "LIME features"));
    opts.push_back(sub->add_option("--num-samples", num_samples, "LIME samples"));
    if (s.command == Command::kEvaluate) {
      sub->add_option("--predictions", m.predictions_path,
                      "CSV of label,prediction to score instead of running a model");
    }
    optional_opts.emplace_back(sub, opts);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "phishlens: " << e.what() << "\n";
    return kExitUsage;
  }

  for (std::size_t i = 0; i < apps.size(); ++i) {
    if (!apps[i]->parsed()) continue;
    m.command = subs[i].command;
    const auto& opts = optional_opts[i].second;
    if (opts[0]->count()) m.seed = seed;
    if (opts[1]->count()) m.text = text;
    if (opts[2]->count()) m.index = index;
    if (opts[3]->count()) m.steps = steps;
    if (opts[4]->count()) m.num_features = num_features;
    if (opts[5]->count()) m.num_samples = num_samples;
  }

  try {
    switch (m.command) {
      case Command::kTrain:
        return CmdTrain(m, out);
      case Command::kEvaluate:
        return CmdEvaluate(m, out);
      case Command::kExplain:
        return CmdExplain(m, out);
      case Command::kCompare:
        return CmdCompare(m, out);
    }
  } catch (const Error& e) {
    err << "phishlens: " << ErrorKindName(e.kind()) << " error: " << e.what() << "\n";
    return IsInputError(e.kind()) ? kExitUsage : kExitInternal;
  } catch (const std::exception& e) {
    err << "phishlens: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace phishlens
