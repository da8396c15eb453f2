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

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "comet/patching.hpp"

namespace comet {

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 128;
  double learning_rate = 1e-4;
  double weight_decay = 5e-4;
  double alpha = 1.0;  // codebook loss weight
  double beta = 1.0;   // commitment loss weight
  double validation_fraction = 0.1;
};

enum class SelectionMode { kPercentile, kBudget, kOff };

struct SelectionConfig {
  SelectionMode mode = SelectionMode::kPercentile;
  double percentile = 75.0;  // rho in [0, 100]
  std::size_t budget = 1;    // B, used in budget mode
};

struct ScoringConfig {
  std::size_t neighbors = 10;          // n, score aggregation
  std::size_t density_neighbors = 10;  // n_sigma, local scales
  double lambda = 0.5;                 // weight of the quantization score
  double ema_momentum = 0.75;
  double epsilon = 1e-8;
  bool local_scaling = true;   // false: plain squared distance
  bool normalization = true;   // false: raw streams are combined directly
  SelectionConfig selection;
};

struct TtaConfig {
  bool enabled = false;
  double weight = 1.0;        // contrastive weight
  double temperature = 0.1;
  std::size_t steps_per_batch = 1;
  std::optional<double> learning_rate;  // defaults to the training rate
  std::size_t batch_windows = 4;        // windows per adaptation batch
};

/// Every hyperparameter of a run. Defaults follow the reference
/// configuration; dataset presets override (codebook, embed).
struct RunConfig {
  std::string preset;
  std::vector<ScaleSpec> scales{{2, 1}, {4, 2}, {6, 3}};
  std::size_t embed = 128;       // d
  std::size_t core = 64;         // d_c
  std::size_t codebook = 128;    // M
  std::size_t window_length = 100;
  std::size_t window_stride = 50;
  std::uint64_t seed = 42;
  std::size_t threads = 1;
  TrainConfig train;
  ScoringConfig scoring;
  TtaConfig tta;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Applies a named dataset preset (psm, swat, smap, msl, wadi; case
/// insensitive) to `config`. Throws ConfigError for unknown names.
void apply_preset(RunConfig& config, const std::string& name);

nlohmann::json to_json(const RunConfig& config);
/// Missing keys keep the values already in `base`; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});

RunConfig load_config(const std::string& path);

}  // namespace comet
