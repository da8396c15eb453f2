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
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace comet {

/// PA%K point adjustment: every maximal run of label-1 points whose fraction
/// of predicted-1 points strictly exceeds K% is fully marked as detected.
/// K=0 is the classic any-point adjustment, K=100 leaves predictions as is.
std::vector<int> point_adjust(std::span<const int> preds, std::span<const int> labels,
                              double k_percent);

/// F1 of binary predictions (0 when there is no true positive).
double f1_score(std::span<const int> preds, std::span<const int> labels);

/// F1 after thresholding (score >= threshold) and PA%K adjustment.
double f1_at_threshold(std::span<const double> scores, std::span<const int> labels,
                       double threshold, double k_percent);

struct BestF1 {
  double f1 = 0.0;
  double threshold = 0.0;
};

/// Sweeps thresholds over the sorted unique scores, or over `grid` evenly
/// spaced values between min and max when grid > 0 and there are more unique
/// scores than that. Ties keep the lowest threshold. Throws
/// UndefinedMetricError without positive labels.
BestF1 best_f1(std::span<const double> scores, std::span<const int> labels, double k_percent,
               std::size_t grid = 0);

/// Rank statistic (Mann-Whitney U) with averaged ranks for ties.
double auc_roc(std::span<const double> scores, std::span<const int> labels);
/// Step-wise average precision over descending distinct thresholds.
double auc_pr(std::span<const double> scores, std::span<const int> labels);

struct MetricReport {
  double f1_k0 = 0.0;
  double threshold_k0 = 0.0;
  double f1_k100 = 0.0;
  double threshold_k100 = 0.0;
  double auc_roc = 0.0;
  double auc_pr = 0.0;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

MetricReport evaluate(std::span<const double> scores, std::span<const int> labels,
                      std::size_t grid = 0);

nlohmann::json to_json(const MetricReport& report);
MetricReport metric_report_from_json(const nlohmann::json& j);

}  // namespace comet
