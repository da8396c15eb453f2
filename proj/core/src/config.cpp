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

#include "comet/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <utility>

#include "comet/error.hpp"

namespace comet {

namespace {

using nlohmann::json;

const std::map<std::string, std::pair<std::size_t, std::size_t>>& presets() {
  // (M, d) per dataset.
  static const std::map<std::string, std::pair<std::size_t, std::size_t>> table = {
      {"psm", {128, 256}}, {"swat", {256, 256}}, {"smap", {128, 128}},
      {"msl", {256, 128}}, {"wadi", {32, 64}},
  };
  return table;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(field + ": " + message);
}

void reject_unknown(const json& j, const std::string& where, std::set<std::string> known) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) {
      throw ConfigError((where.empty() ? "" : where + ".") + key + ": unknown config key");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError((where.empty() ? "" : where + ".") + key + ": " + e.what());
  }
}

std::string mode_name(SelectionMode m) {
  switch (m) {
    case SelectionMode::kPercentile: return "percentile";
    case SelectionMode::kBudget: return "budget";
    case SelectionMode::kOff: return "off";
  }
  return "percentile";
}

SelectionMode parse_mode(const std::string& s) {
  if (s == "percentile") return SelectionMode::kPercentile;
  if (s == "budget") return SelectionMode::kBudget;
  if (s == "off") return SelectionMode::kOff;
  throw ConfigError("scoring.selection.mode: expected percentile, budget or off (got '" + s + "')");
}

}  // namespace

void RunConfig::validate() const {
  require(!scales.empty(), "scales", "at least one scale is required");
  for (std::size_t k = 0; k < scales.size(); ++k) {
    const auto& s = scales[k];
    const std::string f = "scales[" + std::to_string(k) + "]";
    require(s.patch >= 1 && s.stride >= 1 && s.stride <= s.patch, f,
            "needs 1 <= stride <= patch");
    require(s.patch <= window_length, f, "patch longer than the window");
  }
  require(embed >= 2 && embed % 2 == 0, "embed", "d must be even and >= 2");
  require(core >= 1, "core", "must be >= 1");
  require(codebook >= 1, "codebook", "must be >= 1");
  require(window_length >= 1, "window_length", "must be >= 1");
  require(window_stride >= 1, "window_stride", "must be >= 1");
  require(threads >= 1, "threads", "must be >= 1");
  require(train.epochs >= 1, "train.epochs", "must be >= 1");
  require(train.batch_size >= 1, "train.batch_size", "must be >= 1");
  require(train.learning_rate >= 0.0, "train.learning_rate", "must be >= 0");
  require(train.weight_decay >= 0.0, "train.weight_decay", "must be >= 0");
  require(train.alpha >= 0.0, "train.alpha", "must be >= 0");
  require(train.beta >= 0.0, "train.beta", "must be >= 0");
  require(train.validation_fraction >= 0.0 && train.validation_fraction < 1.0,
          "train.validation_fraction", "must lie in [0, 1)");
  require(scoring.neighbors >= 1, "scoring.neighbors", "must be >= 1");
  require(scoring.density_neighbors >= 1, "scoring.density_neighbors", "must be >= 1");
  require(scoring.lambda >= 0.0 && scoring.lambda <= 1.0, "scoring.lambda", "must lie in [0, 1]");
  require(scoring.ema_momentum >= 0.0 && scoring.ema_momentum < 1.0, "scoring.ema_momentum",
          "must lie in [0, 1)");
  require(scoring.epsilon > 0.0, "scoring.epsilon", "must be > 0");
  require(scoring.selection.percentile >= 0.0 && scoring.selection.percentile <= 100.0,
          "scoring.selection.percentile", "must lie in [0, 100]");
  require(scoring.selection.mode != SelectionMode::kBudget || scoring.selection.budget >= 1,
          "scoring.selection.budget", "must be >= 1 in budget mode");
  require(tta.temperature > 0.0, "tta.temperature", "must be > 0");
  require(tta.weight >= 0.0, "tta.weight", "must be >= 0");
  require(!tta.enabled || tta.steps_per_batch >= 1, "tta.steps_per_batch",
          "must be >= 1 when TTA is enabled");
  require(tta.batch_windows >= 1, "tta.batch_windows", "must be >= 1");
  require(!tta.learning_rate || *tta.learning_rate >= 0.0, "tta.learning_rate", "must be >= 0");
}

void apply_preset(RunConfig& config, const std::string& name) {
  const auto it = presets().find(lower(name));
  if (it == presets().end()) {
    throw ConfigError("preset: unknown dataset preset '" + name +
                      "' (known: psm, swat, smap, msl, wadi)");
  }
  config.preset = it->first;
  config.codebook = it->second.first;
  config.embed = it->second.second;
}

nlohmann::json to_json(const RunConfig& c) {
  json scales = json::array();
  for (const auto& s : c.scales) scales.push_back({{"patch", s.patch}, {"stride", s.stride}});
  json tta = {{"enabled", c.tta.enabled},
              {"weight", c.tta.weight},
              {"temperature", c.tta.temperature},
              {"steps_per_batch", c.tta.steps_per_batch},
              {"batch_windows", c.tta.batch_windows}};
  tta["learning_rate"] = c.tta.learning_rate ? json(*c.tta.learning_rate) : json(nullptr);
  return {
      {"preset", c.preset},
      {"scales", scales},
      {"embed", c.embed},
      {"core", c.core},
      {"codebook", c.codebook},
      {"window_length", c.window_length},
      {"window_stride", c.window_stride},
      {"seed", c.seed},
      {"threads", c.threads},
      {"train",
       {{"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"learning_rate", c.train.learning_rate},
        {"weight_decay", c.train.weight_decay},
        {"alpha", c.train.alpha},
        {"beta", c.train.beta},
        {"validation_fraction", c.train.validation_fraction}}},
      {"scoring",
       {{"neighbors", c.scoring.neighbors},
        {"density_neighbors", c.scoring.density_neighbors},
        {"lambda", c.scoring.lambda},
        {"ema_momentum", c.scoring.ema_momentum},
        {"epsilon", c.scoring.epsilon},
        {"local_scaling", c.scoring.local_scaling},
        {"normalization", c.scoring.normalization},
        {"selection",
         {{"mode", mode_name(c.scoring.selection.mode)},
          {"percentile", c.scoring.selection.percentile},
          {"budget", c.scoring.selection.budget}}}}},
      {"tta", tta},
  };
}

RunConfig config_from_json(const nlohmann::json& j, RunConfig c) {
  reject_unknown(j, "",
                 {"preset", "scales", "embed", "core", "codebook", "window_length",
                  "window_stride", "seed", "threads", "train", "scoring", "tta"});
  // A preset is applied first so explicit embed/codebook keys still win.
  if (j.contains("preset")) {
    std::string preset;
    read(j, "preset", preset, "");
    if (!preset.empty()) apply_preset(c, preset);
  }
  if (j.contains("scales")) {
    if (!j["scales"].is_array()) throw ConfigError("scales: expected an array");
    c.scales.clear();
    for (std::size_t k = 0; k < j["scales"].size(); ++k) {
      const auto& s = j["scales"][k];
      const std::string where = "scales[" + std::to_string(k) + "]";
      reject_unknown(s, where, {"patch", "stride"});
      ScaleSpec spec;
      read(s, "patch", spec.patch, where);
      read(s, "stride", spec.stride, where);
      c.scales.push_back(spec);
    }
  }
  read(j, "embed", c.embed, "");
  read(j, "core", c.core, "");
  read(j, "codebook", c.codebook, "");
  read(j, "window_length", c.window_length, "");
  read(j, "window_stride", c.window_stride, "");
  read(j, "seed", c.seed, "");
  read(j, "threads", c.threads, "");
  if (j.contains("train")) {
    const auto& t = j["train"];
    reject_unknown(t, "train",
                   {"epochs", "batch_size", "learning_rate", "weight_decay", "alpha", "beta",
                    "validation_fraction"});
    read(t, "epochs", c.train.epochs, "train");
    read(t, "batch_size", c.train.batch_size, "train");
    read(t, "learning_rate", c.train.learning_rate, "train");
    read(t, "weight_decay", c.train.weight_decay, "train");
    read(t, "alpha", c.train.alpha, "train");
    read(t, "beta", c.train.beta, "train");
    read(t, "validation_fraction", c.train.validation_fraction, "train");
  }
  if (j.contains("scoring")) {
    const auto& s = j["scoring"];
    reject_unknown(s, "scoring",
                   {"neighbors", "density_neighbors", "lambda", "ema_momentum", "epsilon",
                    "local_scaling", "normalization", "selection"});
    read(s, "neighbors", c.scoring.neighbors, "scoring");
    read(s, "density_neighbors", c.scoring.density_neighbors, "scoring");
    read(s, "lambda", c.scoring.lambda, "scoring");
    read(s, "ema_momentum", c.scoring.ema_momentum, "scoring");
    read(s, "epsilon", c.scoring.epsilon, "scoring");
    read(s, "local_scaling", c.scoring.local_scaling, "scoring");
    read(s, "normalization", c.scoring.normalization, "scoring");
    if (s.contains("selection")) {
      const auto& sel = s["selection"];
      reject_unknown(sel, "scoring.selection", {"mode", "percentile", "budget"});
      if (sel.contains("mode")) {
        std::string mode;
        read(sel, "mode", mode, "scoring.selection");
        c.scoring.selection.mode = parse_mode(mode);
      }
      read(sel, "percentile", c.scoring.selection.percentile, "scoring.selection");
      read(sel, "budget", c.scoring.selection.budget, "scoring.selection");
    }
  }
  if (j.contains("tta")) {
    const auto& t = j["tta"];
    reject_unknown(t, "tta",
                   {"enabled", "weight", "temperature", "steps_per_batch", "learning_rate",
                    "batch_windows"});
    read(t, "enabled", c.tta.enabled, "tta");
    read(t, "weight", c.tta.weight, "tta");
    read(t, "temperature", c.tta.temperature, "tta");
    read(t, "steps_per_batch", c.tta.steps_per_batch, "tta");
    read(t, "batch_windows", c.tta.batch_windows, "tta");
    if (t.contains("learning_rate")) {
      if (t["learning_rate"].is_null()) {
        c.tta.learning_rate.reset();
      } else {
        double lr = 0.0;
        read(t, "learning_rate", lr, "tta");
        c.tta.learning_rate = lr;
      }
    }
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace comet
