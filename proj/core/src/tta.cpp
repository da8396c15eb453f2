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

#include "comet/tta.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "comet/data.hpp"
#include "comet/error.hpp"

namespace comet {

std::vector<PseudoLabel> pseudo_label(std::span<const WindowPass> passes,
                                      const ActivationSet& activations) {
  std::vector<PseudoLabel> out;
  for (const WindowPass& pass : passes) {
    for (std::size_t k = 0; k < pass.quantized.size(); ++k) {
      for (std::size_t idx : pass.quantized[k].indices) {
        out.push_back({activations.contains(k, idx) ? 0 : 1, k, idx});
      }
    }
  }
  return out;
}

ContrastiveResult contrastive_loss(const Matrix& embeddings, std::span<const int> labels,
                                   double temperature) {
  const std::size_t n = embeddings.rows();
  const std::size_t d = embeddings.cols();
  if (labels.size() != n) throw ShapeError("contrastive_loss: one label per embedding expected");
  if (!(temperature > 0.0)) throw ConfigError("contrastive_loss: temperature must be > 0");
  ContrastiveResult res;
  res.gradient = Matrix(n, d);
  if (n < 2) return res;

  std::vector<double> norms(n);
  Matrix unit(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    norms[i] = std::max(norm(embeddings.row(i)), 1e-12);
    auto src = embeddings.row(i);
    auto dst = unit.row(i);
    for (std::size_t c = 0; c < d; ++c) dst[c] = src[c] / norms[i];
  }
  const Matrix sim = matmul_bt(unit, unit);

  std::map<int, std::size_t> class_size;
  for (int l : labels) ++class_size[l];

  // g(i, a) = dLoss / d sim(i, a) with sim(i, a) treated as an independent
  // input; symmetry is folded in below.
  Matrix g(n, n);
  std::vector<double> logits(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t positives = class_size[labels[i]] - 1;
    if (positives == 0) continue;
    double mx = -INFINITY;
    for (std::size_t a = 0; a < n; ++a) {
      if (a == i) continue;
      logits[a] = sim(i, a) / temperature;
      mx = std::max(mx, logits[a]);
    }
    double z = 0.0;
    for (std::size_t a = 0; a < n; ++a)
      if (a != i) z += std::exp(logits[a] - mx);
    const double lse = mx + std::log(z);
    const double inv_p = 1.0 / static_cast<double>(positives);
    double pos_sum = 0.0;
    auto gi = g.row(i);
    for (std::size_t a = 0; a < n; ++a) {
      if (a == i) continue;
      const bool positive = labels[a] == labels[i];
      if (positive) pos_sum += logits[a];
      gi[a] = (std::exp(logits[a] - lse) - (positive ? inv_p : 0.0)) / temperature;
    }
    res.loss += lse - inv_p * pos_sum;
  }

  Matrix sym(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < n; ++a) sym(i, a) = g(i, a) + g(a, i);
  const Matrix g_unit = matmul(sym, unit);
  for (std::size_t i = 0; i < n; ++i) {
    auto u = unit.row(i);
    auto gu = g_unit.row(i);
    const double radial = dot(u, gu);
    auto out = res.gradient.row(i);
    for (std::size_t c = 0; c < d; ++c) out[c] = (gu[c] - radial * u[c]) / norms[i];
  }
  return res;
}

TtaObjective tta_objective(const ModelParams& model, std::span<const WindowPass> passes,
                           const ActivationSet& activations, const TtaConfig& cfg, double alpha,
                           double beta, ModelParams& grads) {
  const std::vector<PseudoLabel> labels = pseudo_label(passes, activations);
  TtaObjective obj;
  obj.total_count = labels.size();
  for (const auto& l : labels) obj.normal_count += l.value == 0;

  // Contrastive term over every patch embedding of the batch, scales mixed.
  std::vector<std::vector<Matrix>> extra(passes.size());
  for (std::size_t w = 0; w < passes.size(); ++w) {
    for (std::size_t k = 0; k < passes[w].caches.size(); ++k) {
      extra[w].emplace_back(passes[w].rows(k), passes[w].caches[k].embeddings.cols());
    }
  }
  if (cfg.weight > 0.0 && labels.size() >= 2) {
    const std::size_t d = model.dims.embed;
    Matrix all(labels.size(), d);
    std::vector<int> values(labels.size());
    std::size_t r = 0;
    for (const WindowPass& pass : passes) {
      for (const ForwardCache& c : pass.caches) {
        for (std::size_t i = 0; i < c.embeddings.rows(); ++i, ++r) {
          auto src = c.embeddings.row(i);
          std::copy(src.begin(), src.end(), all.row(r).begin());
        }
      }
    }
    for (std::size_t i = 0; i < labels.size(); ++i) values[i] = labels[i].value;
    ContrastiveResult con = contrastive_loss(all, values, cfg.temperature);
    obj.contrastive = con.loss;
    r = 0;
    for (std::size_t w = 0; w < passes.size(); ++w) {
      for (std::size_t k = 0; k < passes[w].caches.size(); ++k) {
        Matrix& e = extra[w][k];
        for (std::size_t i = 0; i < e.rows(); ++i, ++r) {
          auto src = con.gradient.row(r);
          auto dst = e.row(i);
          for (std::size_t c = 0; c < dst.size(); ++c) dst[c] = cfg.weight * src[c];
        }
      }
    }
  }

  const double inv_norm =
      obj.normal_count > 0 ? 1.0 / static_cast<double>(obj.normal_count) : 0.0;
  std::size_t r = 0;
  for (std::size_t w = 0; w < passes.size(); ++w) {
    std::vector<std::vector<double>> weights(passes[w].caches.size());
    for (std::size_t k = 0; k < weights.size(); ++k) {
      weights[k].resize(passes[w].rows(k));
      for (double& wt : weights[k]) wt = labels[r++].value == 0 ? inv_norm : 0.0;
    }
    obj.normal += accumulate_objective(model, passes[w], weights, alpha, beta, grads, &extra[w]);
  }
  return obj;
}

void tta_step(ModelParams& model, AdamW& optimizer, std::span<const Matrix> windows,
              std::vector<WindowPass> passes, const ActivationSet& activations,
              const TtaConfig& cfg, double alpha, double beta) {
  if (!cfg.enabled) return;
  if (passes.size() != windows.size()) throw ShapeError("tta_step: one pass per window expected");
  for (std::size_t step = 0; step < cfg.steps_per_batch; ++step) {
    if (step > 0) {
      for (std::size_t w = 0; w < windows.size(); ++w) passes[w] = forward_window(model, windows[w]);
    }
    ModelParams grads = model.zeros_like();
    const TtaObjective obj = tta_objective(model, passes, activations, cfg, alpha, beta, grads);
    const bool contrastive_active = cfg.weight > 0.0 && obj.total_count >= 2;
    if (obj.normal_count == 0 && !contrastive_active) return;
    auto params = model.tensors();
    auto g = static_cast<const ModelParams&>(grads).tensors();
    optimizer.step(params, g);
  }
}

MemoryBank refresh_coreset(const MemoryBank& previous, std::span<const Codebook> codebooks) {
  if (previous.scales.size() != codebooks.size()) {
    throw ShapeError("refresh_coreset: bank and codebooks disagree on the number of scales");
  }
  MemoryBank bank = previous;
  for (std::size_t k = 0; k < bank.scales.size(); ++k) {
    ScaleBank& sb = bank.scales[k];
    for (std::size_t r = 0; r < sb.indices.size(); ++r) {
      auto src = codebooks[k].entries.row(sb.indices[r]);
      std::copy(src.begin(), src.end(), sb.vectors.row(r).begin());
    }
    for (std::size_t r = 0; r < sb.indices.size(); ++r) {
      sb.sigma[r] = local_scale(sb.vectors.row(r), sb.vectors, bank.density_neighbors, r);
    }
  }
  return bank;
}

StreamResult stream_driver(std::span<const StreamWindow> windows, ModelParams model,
                           MemoryBank bank, const ActivationSet& activations,
                           const RunConfig& config, std::size_t length) {
  for (std::size_t w = 1; w < windows.size(); ++w) {
    if (windows[w].offset <= windows[w - 1].offset) {
      throw OrderingError("stream windows must arrive in temporal order (offset " +
                          std::to_string(windows[w].offset) + " after " +
                          std::to_string(windows[w - 1].offset) + ")");
    }
  }
  AdamW optimizer({.learning_rate = config.tta.learning_rate.value_or(config.train.learning_rate),
                   .weight_decay = config.train.weight_decay});
  ScoreAccumulator acc(length, config.scoring);
  StreamResult result;
  const std::size_t per_batch = config.tta.batch_windows;
  for (std::size_t b = 0; b < windows.size(); b += per_batch) {
    const std::size_t end = std::min(windows.size(), b + per_batch);
    std::vector<Matrix> batch;
    std::vector<WindowPass> passes;
    std::vector<WindowScores> scored;
    for (std::size_t w = b; w < end; ++w) {
      batch.push_back(windows[w].values);
      passes.push_back(forward_window(model, windows[w].values));
      scored.push_back(score_window(passes.back(), bank, model.scales, config.scoring,
                                    windows[w].offset, windows[w].values.rows()));
      acc.add(scored.back());
    }
    result.batches.push_back(std::move(scored));
    if (config.tta.enabled) {
      tta_step(model, optimizer, batch, std::move(passes), activations, config.tta,
               config.train.alpha, config.train.beta);
      bank = refresh_coreset(bank, model.codebooks);
    }
  }
  result.series = acc.finish();
  result.model = std::move(model);
  result.bank = std::move(bank);
  return result;
}

StreamResult stream_series(const ModelParams& model, const MemoryBank& bank,
                           const ActivationSet& activations, const RunConfig& config,
                           const Matrix& series) {
  std::vector<StreamWindow> windows;
  for (std::size_t off : window_offsets(series.rows(), config.window_length, config.window_stride)) {
    windows.push_back({off, slice_window(series, off, config.window_length)});
  }
  return stream_driver(windows, model, bank, activations, config, series.rows());
}

}  // namespace comet
