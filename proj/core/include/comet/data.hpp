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

#include "comet/ndmath.hpp"

namespace comet {

/// L x D values with optional per-timestep binary labels.
struct TimeSeries {
  Matrix values;
  std::vector<int> labels;  // empty or length L
  std::vector<std::string> names;

  std::size_t length() const noexcept { return values.rows(); }
  std::size_t variables() const noexcept { return values.cols(); }
  bool labeled() const noexcept { return !labels.empty(); }
};

/// Per-variable statistics of the training portion.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;
  double eps = 1e-8;

  static Standardizer fit(const Matrix& train, double eps = 1e-8);
  /// (x - mean) / (stddev + eps), column-wise.
  Matrix apply(const Matrix& values) const;
};

struct Dataset {
  TimeSeries train;
  TimeSeries test;
  Standardizer stats;
};

/// z-scores train and test with statistics fitted on train only.
Dataset standardize(Dataset dataset, double eps = 1e-8);

/// Comma-delimited file with a header row. When `label_column` is given and
/// present, that column becomes the binary labels and is excluded from the
/// values. Throws DataError for ragged rows or non-numeric cells, naming the
/// 1-based data row.
TimeSeries load_csv(const std::string& path,
                    const std::optional<std::string>& label_column = std::nullopt);
void save_csv(const std::string& path, const TimeSeries& series);

/// Window start offsets: 0, stride, 2*stride, ... plus one final window
/// ending exactly at `length` if the grid misses the tail.
std::vector<std::size_t> window_offsets(std::size_t length, std::size_t window,
                                        std::size_t stride);
/// Copies rows [offset, offset + window) of `series`.
Matrix slice_window(const Matrix& series, std::size_t offset, std::size_t window);

enum class AnomalyType { kPoint, kContextual, kCollective };

struct AnomalySpec {
  AnomalyType type = AnomalyType::kPoint;
  std::size_t start = 0;
  std::size_t duration = 1;
  double magnitude = 6.0;  // in units of the clean signal's stddev
  int variable = -1;       // -1 = every variable
};

/// Sine-mixture corpus description.
struct SyntheticSpec {
  std::size_t variables = 2;
  std::size_t train_length = 4000;
  std::size_t test_length = 2000;
  std::size_t components = 3;  // sines per variable
  double noise = 0.05;         // gaussian noise stddev relative to the signal stddev
  double drift = 0.0;          // linear mean drift over the test portion, in stddevs
  std::vector<AnomalySpec> anomalies;
  std::uint64_t seed = 42;

  /// Throws ConfigError naming the offending field (bounds, overlaps).
  void validate() const;
};

nlohmann::json to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);
SyntheticSpec load_synthetic_spec(const std::string& path);

/// Three collective and five point anomalies at 6 sigma on a 2-variable
/// mixture: 4000 clean training steps, 2000 labeled test steps.
SyntheticSpec default_synthetic_spec(std::uint64_t seed = 42);

/// Train is the clean signal; test is the continuation with the anomaly
/// plan injected and exact labels. Deterministic in (spec, seed).
Dataset synthesize(const SyntheticSpec& spec);

}  // namespace comet
