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

#include "comet/eval.hpp"

#include <algorithm>
#include <numeric>

#include "comet/error.hpp"

namespace comet {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    throw DataError("scores/predictions (" + std::to_string(a) + ") and labels (" +
                    std::to_string(b) + ") differ in length");
  }
}

void require_both_classes(std::span<const int> labels) {
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size())) {
    throw UndefinedMetricError("metric needs both positive and negative labels");
  }
}

}  // namespace

std::vector<int> point_adjust(std::span<const int> preds, std::span<const int> labels,
                              double k_percent) {
  check_lengths(preds.size(), labels.size());
  std::vector<int> out(preds.begin(), preds.end());
  const std::size_t n = labels.size();
  std::size_t t = 0;
  while (t < n) {
    if (labels[t] != 1) {
      ++t;
      continue;
    }
    std::size_t end = t;
    std::size_t hits = 0;
    while (end < n && labels[end] == 1) hits += preds[end++] == 1;
    const double fraction = static_cast<double>(hits) / static_cast<double>(end - t);
    if (fraction > k_percent / 100.0) std::fill(out.begin() + t, out.begin() + end, 1);
    t = end;
  }
  return out;
}

double f1_score(std::span<const int> preds, std::span<const int> labels) {
  check_lengths(preds.size(), labels.size());
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t t = 0; t < preds.size(); ++t) {
    if (preds[t] == 1 && labels[t] == 1) ++tp;
    else if (preds[t] == 1) ++fp;
    else if (labels[t] == 1) ++fn;
  }
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

double f1_at_threshold(std::span<const double> scores, std::span<const int> labels,
                       double threshold, double k_percent) {
  check_lengths(scores.size(), labels.size());
  std::vector<int> preds(scores.size());
  for (std::size_t t = 0; t < scores.size(); ++t) preds[t] = scores[t] >= threshold ? 1 : 0;
  return f1_score(point_adjust(preds, labels, k_percent), labels);
}

BestF1 best_f1(std::span<const double> scores, std::span<const int> labels, double k_percent,
               std::size_t grid) {
  check_lengths(scores.size(), labels.size());
  if (std::count(labels.begin(), labels.end(), 1) == 0) {
    throw UndefinedMetricError("best F1 is undefined without positive labels");
  }
  std::vector<double> thresholds(scores.begin(), scores.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  if (grid > 0 && thresholds.size() > grid) {
    const double lo = thresholds.front();
    const double hi = thresholds.back();
    thresholds.resize(grid);
    for (std::size_t g = 0; g < grid; ++g) {
      thresholds[g] = grid == 1 ? lo : lo + (hi - lo) * static_cast<double>(g) /
                                                static_cast<double>(grid - 1);
    }
  }
  BestF1 best{-1.0, thresholds.front()};
  for (double th : thresholds) {
    const double f1 = f1_at_threshold(scores, labels, th, k_percent);
    if (f1 > best.f1) best = {f1, th};
  }
  return best;
}

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores.size(), labels.size());
  require_both_classes(labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1 .. j share their average.
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t r = i; r < j; ++r) {
      if (labels[order[r]] == 1) {
        rank_sum += avg_rank;
        ++pos;
      }
    }
    i = j;
  }
  const double np = static_cast<double>(pos);
  const double nn = static_cast<double>(n - pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double auc_pr(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores.size(), labels.size());
  require_both_classes(labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const double total_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  double tp = 0.0, fp = 0.0, prev_recall = 0.0, ap = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1) tp += 1.0;
      else fp += 1.0;
      ++j;
    }
    const double recall = tp / total_pos;
    const double precision = tp / (tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

MetricReport evaluate(std::span<const double> scores, std::span<const int> labels,
                      std::size_t grid) {
  check_lengths(scores.size(), labels.size());
  require_both_classes(labels);
  MetricReport r;
  const BestF1 k0 = best_f1(scores, labels, 0.0, grid);
  const BestF1 k100 = best_f1(scores, labels, 100.0, grid);
  r.f1_k0 = k0.f1;
  r.threshold_k0 = k0.threshold;
  r.f1_k100 = k100.f1;
  r.threshold_k100 = k100.threshold;
  r.auc_roc = auc_roc(scores, labels);
  r.auc_pr = auc_pr(scores, labels);
  return r;
}

nlohmann::json to_json(const MetricReport& r) {
  return {{"f1_k0", r.f1_k0},
          {"threshold_k0", r.threshold_k0},
          {"f1_k100", r.f1_k100},
          {"threshold_k100", r.threshold_k100},
          {"auc_roc", r.auc_roc},
          {"auc_pr", r.auc_pr}};
}

MetricReport metric_report_from_json(const nlohmann::json& j) {
  try {
    MetricReport r;
    r.f1_k0 = j.at("f1_k0").get<double>();
    r.threshold_k0 = j.at("threshold_k0").get<double>();
    r.f1_k100 = j.at("f1_k100").get<double>();
    r.threshold_k100 = j.at("threshold_k100").get<double>();
    r.auc_roc = j.at("auc_roc").get<double>();
    r.auc_pr = j.at("auc_pr").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metric report: ") + e.what());
  }
}

}  // namespace comet
