// Copyright 2026 The COMET Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// comet: train, score, stream, eval and synth commands over the core library.
//
// Exit codes: 0 ok, 1 usage, 2 data/format/config, 3 numeric/model.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "comet/config.hpp"
#include "comet/data.hpp"
#include "comet/error.hpp"
#include "comet/eval.hpp"
#include "comet/scoring.hpp"
#include "comet/train.hpp"
#include "comet/tta.hpp"

namespace {

using namespace comet;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitModel = 3;

enum class LogLevel { kQuiet, kInfo, kDebug };

LogLevel log_level() {
  const char* env = std::getenv("COMET_LOG");
  if (env == nullptr) return LogLevel::kInfo;
  const std::string v(env);
  if (v == "quiet" || v == "0" || v == "error") return LogLevel::kQuiet;
  if (v == "debug" || v == "2") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

void log_info(const std::string& msg) {
  if (log_level() != LogLevel::kQuiet) std::cerr << "comet: " << msg << '\n';
}

void log_debug(const std::string& msg) {
  if (log_level() == LogLevel::kDebug) std::cerr << "comet[debug]: " << msg << '\n';
}

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kNumeric:
    case ErrorKind::kDegenerateModel:
    case ErrorKind::kContract:
      return kExitModel;
    default:
      return kExitData;
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Command-line values shared by the subcommands. Unset optionals leave the
// file or checkpoint value in place.
struct Options {
  std::string config_path;
  std::string data_path;
  std::string checkpoint_path;
  std::string out_path;
  std::string scores_path;
  std::string tta;
  std::string preset;
  std::string label_column = "label";
  std::optional<std::size_t> threads;
  std::optional<std::uint64_t> seed;
  std::size_t grid = 0;
};

// file < preset flag < individual flags.
RunConfig resolve_config(const Options& o, RunConfig base) {
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw DataError("cannot open config file: " + o.config_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(o.config_path + ": " + e.what());
    }
    base = config_from_json(j, base);
  }
  if (!o.preset.empty()) apply_preset(base, o.preset);
  if (o.threads) base.threads = *o.threads;
  if (o.seed) base.seed = *o.seed;
  if (o.tta == "on") base.tta.enabled = true;
  if (o.tta == "off") base.tta.enabled = false;
  base.validate();
  return base;
}

TimeSeries read_data(const Options& o) {
  if (o.data_path.empty()) throw DataError("--data is required");
  if (!fs::exists(o.data_path)) throw DataError("data file not found: " + o.data_path);
  return load_csv(o.data_path, o.label_column);
}

int cmd_train(const Options& o) {
  const RunConfig config = resolve_config(o, RunConfig{});
  const TimeSeries data = read_data(o);
  log_info("training on " + std::to_string(data.length()) + " x " + std::to_string(data.variables()) +
           " from " + o.data_path);
  log_debug("config " + to_json(config).dump());
  const Standardizer stats = Standardizer::fit(data.values);
  std::ostream* log = log_level() == LogLevel::kQuiet ? nullptr : &std::cout;
  TrainResult result = train(stats.apply(data.values), config, log);
  result.checkpoint.stats = stats;
  save_checkpoint(result.checkpoint, o.out_path);
  log_info("checkpoint written to " + o.out_path);
  return kExitOk;
}

// Model shape fields come from the checkpoint and cannot be overridden.
void check_compatible(const RunConfig& trained, const RunConfig& run) {
  if (run.scales != trained.scales) throw ConfigError("scales: differs from the checkpoint");
  if (run.embed != trained.embed) throw ConfigError("embed: differs from the checkpoint");
  if (run.core != trained.core) throw ConfigError("core: differs from the checkpoint");
  if (run.codebook != trained.codebook) throw ConfigError("codebook: differs from the checkpoint");
}

void write_scores(const std::string& path, const ScoreSeries& s, const RunConfig& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write score file: " + path);
  out << "# config=" << to_json(config).dump() << '\n';
  out << "t,s_mem,s_quant,score";
  if (!s.labels.empty()) out << ",label";
  out << '\n';
  for (std::size_t t = 0; t < s.size(); ++t) {
    out << t << ',' << fmt(s.memory[t]) << ',' << fmt(s.quant[t]) << ',' << fmt(s.score[t]);
    if (!s.labels.empty()) out << ',' << s.labels[t];
    out << '\n';
  }
  if (!out) throw DataError("failed writing score file: " + path);
}

int cmd_score(const Options& o) {
  if (o.checkpoint_path.empty()) throw DataError("--checkpoint is required");
  const Checkpoint ckpt = load_checkpoint(o.checkpoint_path);
  const RunConfig config = resolve_config(o, ckpt.config);
  check_compatible(ckpt.config, config);
  const TimeSeries data = read_data(o);
  if (data.variables() != ckpt.model.dims.variables)
    throw DataError(o.data_path + ": expected " + std::to_string(ckpt.model.dims.variables) +
                    " variables, found " + std::to_string(data.variables()));
  const Matrix x = ckpt.stats.mean.empty() ? data.values : ckpt.stats.apply(data.values);
  ScoreSeries series;
  if (config.tta.enabled) {
    log_info("scoring " + o.data_path + " with test-time adaptation");
    series = stream_series(ckpt.model, ckpt.bank, ckpt.activations, config, x).series;
  } else {
    log_info("scoring " + o.data_path + " with the frozen model");
    series = score_series(ckpt.model, ckpt.bank, config, x, config.threads);
  }
  series.labels = data.labels;
  write_scores(o.out_path, series, config);
  log_info("scores written to " + o.out_path);
  return kExitOk;
}

struct ScoreFile {
  std::vector<double> score;
  std::vector<int> labels;
  nlohmann::json config;
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

ScoreFile read_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("score file not found: " + path);
  ScoreFile f;
  std::string line;
  std::vector<std::string> header;
  std::size_t row = 0;
  std::ptrdiff_t score_col = -1, label_col = -1;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string key = "# config=";
      if (line.rfind(key, 0) == 0) f.config = nlohmann::json::parse(line.substr(key.size()), nullptr, false);
      continue;
    }
    const auto cells = split(line);
    if (header.empty()) {
      header = cells;
      for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == "score") score_col = static_cast<std::ptrdiff_t>(c);
        if (header[c] == "label") label_col = static_cast<std::ptrdiff_t>(c);
      }
      if (score_col < 0) throw DataError(path + ": no score column");
      continue;
    }
    ++row;
    if (cells.size() != header.size())
      throw DataError(path + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                      " fields, expected " + std::to_string(header.size()));
    try {
      std::size_t used = 0;
      const std::string& s = cells[static_cast<std::size_t>(score_col)];
      f.score.push_back(std::stod(s, &used));
      if (used != s.size()) throw std::invalid_argument(s);
      if (label_col >= 0) f.labels.push_back(std::stoi(cells[static_cast<std::size_t>(label_col)]) != 0);
    } catch (const std::logic_error&) {
      throw DataError(path + ": row " + std::to_string(row) + " is not numeric");
    }
  }
  if (header.empty()) throw DataError(path + ": empty score file");
  return f;
}

int cmd_eval(const Options& o) {
  const ScoreFile scores = read_scores(o.scores_path);
  std::vector<int> labels = scores.labels;
  if (!o.data_path.empty()) {
    const TimeSeries data = read_data(o);
    if (!data.labeled()) throw DataError(o.data_path + ": no '" + o.label_column + "' column");
    labels = data.labels;
  }
  if (labels.empty()) throw DataError("no labels: score file has no label column and --data was not given");
  if (labels.size() != scores.score.size())
    throw DataError("length mismatch: " + std::to_string(scores.score.size()) + " scores, " +
                    std::to_string(labels.size()) + " labels");
  const MetricReport report = evaluate(scores.score, labels, o.grid);
  nlohmann::json j = to_json(report);
  if (!scores.config.is_discarded() && !scores.config.is_null()) j["config"] = scores.config;
  const std::string text = j.dump(2);
  std::cout << text << '\n';
  if (!o.out_path.empty()) {
    std::ofstream out(o.out_path, std::ios::binary);
    if (!out) throw DataError("cannot write report: " + o.out_path);
    out << text << '\n';
  }
  return kExitOk;
}

int cmd_synth(const Options& o) {
  SyntheticSpec spec = default_synthetic_spec(o.seed.value_or(42));
  if (!o.config_path.empty()) {
    if (!fs::exists(o.config_path)) throw DataError("spec file not found: " + o.config_path);
    spec = load_synthetic_spec(o.config_path);
  }
  if (o.seed) spec.seed = *o.seed;
  spec.validate();
  const Dataset d = synthesize(spec);
  fs::create_directories(o.out_path);
  const fs::path dir(o.out_path);
  save_csv((dir / "train.csv").string(), d.train);
  save_csv((dir / "test.csv").string(), d.test);
  std::ofstream((dir / "spec.json").string(), std::ios::binary) << to_json(spec).dump(2) << '\n';
  log_info("wrote train.csv, test.csv and spec.json to " + o.out_path);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-scale vector-quantized anomaly detection for multivariate time series"};
  app.require_subcommand(1);
  Options o;

  auto add_threads = [&](CLI::App* c) {
    c->add_option("--threads", o.threads, "Worker threads for parallel-safe stages")->check(CLI::PositiveNumber);
  };
  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "Random seed"); };

  CLI::App* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  train_cmd->add_option("--config", o.config_path, "JSON run configuration");
  train_cmd->add_option("--data", o.data_path, "Training CSV")->required();
  train_cmd->add_option("--out", o.out_path, "Checkpoint path")->required();
  train_cmd->add_option("--preset", o.preset, "Dataset preset: psm, swat, smap, msl, wadi");
  train_cmd->add_option("--label-column", o.label_column, "Column ignored as labels");
  add_threads(train_cmd);
  add_seed(train_cmd);

  auto add_scoring = [&](CLI::App* c) {
    c->add_option("--checkpoint", o.checkpoint_path, "Checkpoint from train")->required();
    c->add_option("--data", o.data_path, "Test CSV")->required();
    c->add_option("--out", o.out_path, "Score CSV path")->required();
    c->add_option("--config", o.config_path, "JSON overrides for scoring and adaptation");
    c->add_option("--label-column", o.label_column, "Column copied to the score file as labels");
    add_threads(c);
    add_seed(c);
  };
  CLI::App* score_cmd = app.add_subcommand("score", "Score a series (frozen or adaptive)");
  add_scoring(score_cmd);
  score_cmd->add_option("--tta", o.tta, "Test-time adaptation")->check(CLI::IsMember({"on", "off"}));
  CLI::App* stream_cmd = app.add_subcommand("stream", "Score a series with test-time adaptation");
  add_scoring(stream_cmd);

  CLI::App* eval_cmd = app.add_subcommand("eval", "Compute F1 (PA%0, PA%100), AUC-ROC and AUC-PR");
  eval_cmd->add_option("--scores", o.scores_path, "Score CSV from score/stream")->required();
  eval_cmd->add_option("--data", o.data_path, "CSV holding the label column (default: score file labels)");
  eval_cmd->add_option("--label-column", o.label_column, "Label column name");
  eval_cmd->add_option("--out", o.out_path, "Report JSON path");
  eval_cmd->add_option("--grid", o.grid, "Threshold grid size (0 sweeps every unique score)");

  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a labeled sine-mixture corpus");
  synth_cmd->add_option("--spec,--config", o.config_path, "JSON synthetic spec (default corpus when omitted)");
  synth_cmd->add_option("--out", o.out_path, "Output directory")->required();
  add_seed(synth_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(o);
    if (*score_cmd) return cmd_score(o);
    if (*stream_cmd) {
      o.tta = "on";
      return cmd_score(o);
    }
    if (*eval_cmd) return cmd_eval(o);
    if (*synth_cmd) return cmd_synth(o);
  } catch (const Error& e) {
    std::cerr << "comet: error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "comet: error: " << e.what() << '\n';
    return kExitModel;
  }
  return kExitUsage;
}
