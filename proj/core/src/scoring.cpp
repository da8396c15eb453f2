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

#include "comet/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "comet/data.hpp"
#include "comet/error.hpp"

namespace comet {

double local_scaling_distance(std::span<const double> query, double query_scale,
                              std::span<const double> entry, double entry_scale, double eps) {
  return squared_distance(query, entry) / ((query_scale + entry_scale) / 2.0 + eps);
}

LocalScaleQuery query_bank(std::span<const double> query, const ScaleBank& bank,
                           std::size_t neighbors, std::size_t density_neighbors) {
  const std::size_t n = bank.indices.size();
  if (n == 0) throw DegenerateModelError("memory bank scale is empty");
  std::vector<std::pair<double, std::size_t>> ranked(n);
  for (std::size_t r = 0; r < n; ++r) ranked[r] = {squared_distance(query, bank.vectors.row(r)), r};
  const std::size_t keep = std::min(n, std::max(neighbors, density_neighbors));
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep),
                    ranked.end());
  LocalScaleQuery q;
  q.neighbors.reserve(keep);
  q.squared_distances.reserve(keep);
  for (std::size_t r = 0; r < keep; ++r) {
    q.squared_distances.push_back(ranked[r].first);
    q.neighbors.push_back(ranked[r].second);
  }
  const std::size_t dn = std::min(density_neighbors, keep);
  q.query_scale = median(std::vector<double>(q.squared_distances.begin(),
                                             q.squared_distances.begin() +
                                                 static_cast<std::ptrdiff_t>(dn)));
  return q;
}

double patch_memory_score(std::span<const double> query, const ScaleBank& bank,
                          const ScoringConfig& cfg) {
  const LocalScaleQuery q = query_bank(query, bank, cfg.neighbors, cfg.density_neighbors);
  const std::size_t n = std::min(cfg.neighbors, q.neighbors.size());
  double sum = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double sq = q.squared_distances[r];
    if (cfg.local_scaling) {
      const double sigma = bank.sigma[q.neighbors[r]];
      sum += sq / ((q.query_scale + sigma) / 2.0 + cfg.epsilon);
    } else {
      sum += sq;
    }
  }
  return sum / static_cast<double>(n);
}

namespace {

// Adds per-patch scores of one scale, spread to timesteps, into `out`
// (D x L) with weight `w`.
void spread_into(Matrix& out, const std::vector<double>& patch_scores, std::size_t variables,
                 std::size_t count, const CoverageMap& cov, double w) {
  for (std::size_t i = 0; i < variables; ++i) {
    std::span<const double> s(patch_scores.data() + i * count, count);
    const std::vector<double> per_t = cov.spread(s);
    auto row = out.row(i);
    for (std::size_t t = 0; t < per_t.size(); ++t) row[t] += w * per_t[t];
  }
}

}  // namespace

Matrix memory_score(const WindowPass& pass, const MemoryBank& bank,
                    std::span<const ScaleSpec> scales, const ScoringConfig& cfg,
                    std::size_t length) {
  const std::size_t K = pass.caches.size();
  if (bank.scales.size() != K || scales.size() != K) {
    throw ShapeError("memory_score: bank, scales and pass disagree on the number of scales");
  }
  const std::size_t D = pass.caches.front().variables;
  Matrix out(D, length);
  for (std::size_t k = 0; k < K; ++k) {
    const ScaleBank& sb = bank.scales[k];
    if (sb.indices.empty()) throw DegenerateModelError("memory bank has an empty scale");
    const auto& zq = pass.quantized[k].quantized;
    std::vector<double> patch_scores(zq.rows());
    for (std::size_t r = 0; r < zq.rows(); ++r) patch_scores[r] = patch_memory_score(zq.row(r), sb, cfg);
    spread_into(out, patch_scores, D, pass.caches[k].count, CoverageMap(scales[k], length),
                1.0 / static_cast<double>(K));
  }
  return out;
}

Matrix quant_score(const WindowPass& pass, std::span<const ScaleSpec> scales, std::size_t length) {
  const std::size_t K = pass.caches.size();
  if (scales.size() != K) throw ShapeError("quant_score: scale count mismatch");
  const std::size_t D = pass.caches.front().variables;
  Matrix out(D, length);
  for (std::size_t k = 0; k < K; ++k) {
    spread_into(out, pass.quantized[k].residual_norms, D, pass.caches[k].count,
                CoverageMap(scales[k], length), 1.0 / static_cast<double>(K));
  }
  return out;
}

namespace {

// Linear interpolation between closest ranks.
double percentile(std::vector<double> values, double rho) {
  std::sort(values.begin(), values.end());
  const double pos = rho / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace

Selection select_variables(const Matrix& scores, const SelectionConfig& cfg, double eps) {
  const std::size_t D = scores.rows();
  const std::size_t T = scores.cols();
  if (D == 0 || T == 0) throw ShapeError("select_variables: empty score matrix");
  std::vector<double> mu(D), sd(D);
  for (std::size_t i = 0; i < D; ++i) {
    auto row = scores.row(i);
    const double m = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(T);
    double var = 0.0;
    for (double v : row) var += (v - m) * (v - m);
    mu[i] = m;
    sd[i] = std::sqrt(var / static_cast<double>(T));
  }
  Selection out;
  out.selected.resize(T);
  out.aggregated.resize(T);
  std::vector<double> dev(D);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < D; ++i) dev[i] = std::abs((scores(i, t) - mu[i]) / (sd[i] + eps));
    std::vector<std::size_t>& sel = out.selected[t];
    switch (cfg.mode) {
      case SelectionMode::kOff:
        sel.resize(D);
        std::iota(sel.begin(), sel.end(), 0);
        break;
      case SelectionMode::kPercentile: {
        const double tau = percentile(dev, cfg.percentile);
        sel.push_back(0);
        for (std::size_t i = 1; i < D; ++i)
          if (dev[i] <= tau) sel.push_back(i);
        break;
      }
      case SelectionMode::kBudget: {
        const std::size_t budget = std::min(cfg.budget, D);
        std::vector<std::size_t> others(D - 1);
        std::iota(others.begin(), others.end(), 1);
        std::stable_sort(others.begin(), others.end(),
                         [&](std::size_t a, std::size_t b) { return dev[a] < dev[b]; });
        sel.push_back(0);
        for (std::size_t r = 0; r + 1 < budget; ++r) sel.push_back(others[r]);
        std::sort(sel.begin(), sel.end());
        break;
      }
    }
    double sum = 0.0;
    for (std::size_t i : sel) sum += scores(i, t);
    out.aggregated[t] = sum / static_cast<double>(sel.size());
  }
  return out;
}

std::vector<double> ema_normalize(std::span<const double> scores, EmaState& state,
                                  double momentum, double eps) {
  if (scores.empty()) throw ShapeError("ema_normalize: empty window");
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  if (!state.initialized) {
    state.mu_min = *lo;
    state.mu_max = *hi;
    state.initialized = true;
  } else {
    state.mu_min = momentum * state.mu_min + (1.0 - momentum) * *lo;
    state.mu_max = momentum * state.mu_max + (1.0 - momentum) * *hi;
  }
  std::vector<double> out(scores.size());
  const double denom = state.mu_max - state.mu_min + eps;
  for (std::size_t t = 0; t < scores.size(); ++t) out[t] = (scores[t] - state.mu_min) / denom;
  return out;
}

std::vector<double> aggregate(std::span<const double> memory, std::span<const double> quant,
                              double lambda) {
  if (memory.size() != quant.size()) throw ShapeError("aggregate: stream lengths differ");
  std::vector<double> out(memory.size());
  for (std::size_t t = 0; t < out.size(); ++t) {
    out[t] = (1.0 - lambda) * memory[t] + lambda * quant[t];
  }
  return out;
}

WindowScores score_window(const WindowPass& pass, const MemoryBank& bank,
                          std::span<const ScaleSpec> scales, const ScoringConfig& cfg,
                          std::size_t offset, std::size_t length) {
  WindowScores ws;
  ws.offset = offset;
  ws.memory = select_variables(memory_score(pass, bank, scales, cfg, length), cfg.selection,
                               cfg.epsilon)
                  .aggregated;
  ws.quant = select_variables(quant_score(pass, scales, length), cfg.selection, cfg.epsilon)
                 .aggregated;
  return ws;
}

WindowScores score_window(const ModelParams& model, const MemoryBank& bank,
                          const ScoringConfig& cfg, const Matrix& window, std::size_t offset) {
  return score_window(forward_window(model, window), bank, model.scales, cfg, offset,
                      window.rows());
}

ScoreAccumulator::ScoreAccumulator(std::size_t length, const ScoringConfig& cfg)
    : cfg_(cfg),
      mem_sum_(length, 0.0),
      quant_sum_(length, 0.0),
      score_sum_(length, 0.0),
      counts_(length, 0) {}

void ScoreAccumulator::add(const WindowScores& w) {
  const std::size_t n = w.memory.size();
  if (w.quant.size() != n || w.offset + n > counts_.size()) {
    throw ShapeError("score accumulator: window does not fit the series");
  }
  std::vector<double> combined;
  if (cfg_.normalization) {
    const auto nm = ema_normalize(w.memory, mem_state_, cfg_.ema_momentum, cfg_.epsilon);
    const auto nq = ema_normalize(w.quant, quant_state_, cfg_.ema_momentum, cfg_.epsilon);
    combined = aggregate(nm, nq, cfg_.lambda);
  } else {
    combined = aggregate(w.memory, w.quant, cfg_.lambda);
  }
  for (std::size_t t = 0; t < n; ++t) {
    mem_sum_[w.offset + t] += w.memory[t];
    quant_sum_[w.offset + t] += w.quant[t];
    score_sum_[w.offset + t] += combined[t];
    ++counts_[w.offset + t];
  }
}

ScoreSeries ScoreAccumulator::finish() const {
  ScoreSeries s;
  const std::size_t L = counts_.size();
  s.memory.resize(L);
  s.quant.resize(L);
  s.score.resize(L);
  for (std::size_t t = 0; t < L; ++t) {
    if (counts_[t] == 0) throw ContractError("score accumulator: timestep " + std::to_string(t) +
                                             " is not covered by any window");
    const double c = static_cast<double>(counts_[t]);
    s.memory[t] = mem_sum_[t] / c;
    s.quant[t] = quant_sum_[t] / c;
    s.score[t] = score_sum_[t] / c;
  }
  return s;
}

ScoreSeries score_series(const ModelParams& model, const MemoryBank& bank,
                         const RunConfig& config, const Matrix& series, std::size_t threads) {
  const auto offsets = window_offsets(series.rows(), config.window_length, config.window_stride);
  std::vector<WindowScores> scored(offsets.size());
  std::vector<std::exception_ptr> failures(std::max<std::size_t>(threads, 1));
  auto work = [&](std::size_t begin, std::size_t step) {
    try {
      for (std::size_t w = begin; w < offsets.size(); w += step) {
        scored[w] = score_window(model, bank, config.scoring,
                                 slice_window(series, offsets[w], config.window_length),
                                 offsets[w]);
      }
    } catch (...) {
      failures[begin] = std::current_exception();
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, offsets.size()));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto& th : pool) th.join();
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  ScoreAccumulator acc(series.rows(), config.scoring);
  for (const auto& w : scored) acc.add(w);
  return acc.finish();
}

}  // namespace comet
