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
#include <span>
#include <vector>

#include "comet/config.hpp"
#include "comet/model.hpp"
#include "comet/objective.hpp"
#include "comet/vq.hpp"

namespace comet {

/// ||z_q - m||^2 / ((sigma_q + sigma_m) / 2 + eps).
double local_scaling_distance(std::span<const double> query, double query_scale,
                              std::span<const double> entry, double entry_scale, double eps);

/// Nearest same-scale bank entries of one quantized query.
struct LocalScaleQuery {
  double query_scale = 0.0;               // sigma_q over the density neighbors
  std::vector<std::size_t> neighbors;     // bank rows, nearest first
  std::vector<double> squared_distances;  // aligned with `neighbors`
};

/// Ranks bank rows by squared distance (ties by row) and keeps
/// max(neighbors, density_neighbors) of them, capped at the bank size.
LocalScaleQuery query_bank(std::span<const double> query, const ScaleBank& bank,
                           std::size_t neighbors, std::size_t density_neighbors);

/// Mean distance from a quantized query to its `cfg.neighbors` nearest
/// entries: local-scaling distance, or plain squared distance when
/// `cfg.local_scaling` is off.
double patch_memory_score(std::span<const double> query, const ScaleBank& bank,
                          const ScoringConfig& cfg);

/// Per-variable timestep scores of one window: D x L matrices averaged over
/// scales, where every patch score is spread uniformly over its span.
struct VariableScores {
  Matrix memory;
  Matrix quantization;
};

/// Memory scores of every patch spread to timesteps and averaged over scales.
Matrix memory_score(const WindowPass& pass, const MemoryBank& bank,
                    std::span<const ScaleSpec> scales, const ScoringConfig& cfg,
                    std::size_t length);
/// Residual norms ||z_e - z_q|| spread to timesteps and averaged over scales.
Matrix quant_score(const WindowPass& pass, std::span<const ScaleSpec> scales, std::size_t length);

struct Selection {
  std::vector<std::vector<std::size_t>> selected;  // per timestep, ascending variable ids
  std::vector<double> aggregated;                  // mean over the selected variables
};

/// Deviation-based variable selection on a D x T score matrix. Variable 0 is
/// always part of every selected set. Mode kOff averages all variables.
Selection select_variables(const Matrix& scores, const SelectionConfig& cfg, double eps);

struct EmaState {
  double mu_min = 0.0;
  double mu_max = 0.0;
  bool initialized = false;
};

/// Folds one window's min/max into `state` (seeded by the first window) and
/// returns (s - mu_min) / (mu_max - mu_min + eps).
std::vector<double> ema_normalize(std::span<const double> scores, EmaState& state,
                                  double momentum, double eps);

/// (1 - lambda) * memory + lambda * quant.
std::vector<double> aggregate(std::span<const double> memory, std::span<const double> quant,
                              double lambda);

/// Raw (pre-normalization) scores of one window after variable selection.
struct WindowScores {
  std::size_t offset = 0;
  std::vector<double> memory;
  std::vector<double> quant;
};

WindowScores score_window(const WindowPass& pass, const MemoryBank& bank,
                          std::span<const ScaleSpec> scales, const ScoringConfig& cfg,
                          std::size_t offset, std::size_t length);
WindowScores score_window(const ModelParams& model, const MemoryBank& bank,
                          const ScoringConfig& cfg, const Matrix& window, std::size_t offset);

/// Per-timestep output. `memory` and `quant` are the raw streams, `score` the
/// final combined score; overlapping windows are averaged.
struct ScoreSeries {
  std::vector<double> memory;
  std::vector<double> quant;
  std::vector<double> score;
  std::vector<int> labels;  // empty when unlabeled

  std::size_t size() const noexcept { return score.size(); }
  friend bool operator==(const ScoreSeries&, const ScoreSeries&) = default;
};

/// Ordered fold of window scores into a series. EMA normalization makes this
/// order dependent; windows must arrive in temporal order.
class ScoreAccumulator {
 public:
  ScoreAccumulator(std::size_t length, const ScoringConfig& cfg);

  void add(const WindowScores& window);
  ScoreSeries finish() const;

  const EmaState& memory_state() const noexcept { return mem_state_; }
  const EmaState& quant_state() const noexcept { return quant_state_; }

 private:
  ScoringConfig cfg_;
  EmaState mem_state_;
  EmaState quant_state_;
  std::vector<double> mem_sum_, quant_sum_, score_sum_;
  std::vector<std::size_t> counts_;
};

/// Scores a whole L x D series with a frozen model: windows are scored
/// independently (in parallel when threads > 1), then folded in order.
ScoreSeries score_series(const ModelParams& model, const MemoryBank& bank,
                         const RunConfig& config, const Matrix& series, std::size_t threads = 1);

}  // namespace comet
