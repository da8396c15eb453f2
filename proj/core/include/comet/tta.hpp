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
#include "comet/scoring.hpp"
#include "comet/vq.hpp"

namespace comet {

/// Activation-based pseudo-label of one patch embedding: 0 (normal) when its
/// (scale, index) pair was activated during training, 1 otherwise.
struct PseudoLabel {
  int value = 0;
  std::size_t scale = 0;
  std::size_t index = 0;
};

/// Labels for every patch of every scale of every pass, flattened in
/// (pass, scale, row) order.
std::vector<PseudoLabel> pseudo_label(std::span<const WindowPass> passes,
                                      const ActivationSet& activations);

struct ContrastiveResult {
  double loss = 0.0;
  Matrix gradient;  // same shape as the embeddings
};

/// Supervised contrastive loss over cosine similarities of the rows of
/// `embeddings`, summed over anchors. Anchors without positives contribute
/// zero; fewer than two rows yield a zero loss.
ContrastiveResult contrastive_loss(const Matrix& embeddings, std::span<const int> labels,
                                   double temperature);

/// Adaptation objective of one batch: mean training loss over pseudo-normal
/// patches plus `cfg.weight` times the contrastive loss over all patches.
struct TtaObjective {
  LossTerms normal;     // mean over pseudo-normal patches
  double contrastive = 0.0;
  std::size_t normal_count = 0;
  std::size_t total_count = 0;
  double value(double alpha, double beta, double weight) const {
    return (normal_count > 0 ? normal.total(alpha, beta) : 0.0) + weight * contrastive;
  }
};

/// Evaluates the objective on `passes` (computed with `model`) and
/// accumulates its gradient into `grads`.
TtaObjective tta_objective(const ModelParams& model, std::span<const WindowPass> passes,
                           const ActivationSet& activations, const TtaConfig& cfg, double alpha,
                           double beta, ModelParams& grads);

/// `steps_per_batch` optimizer steps on the adaptation objective. `passes`
/// must come from the current `model`; later steps recompute them from
/// `windows`. Does nothing when TTA is disabled or the objective is empty
/// (no pseudo-normal patch and zero contrastive weight). The activation set
/// is never modified.
void tta_step(ModelParams& model, AdamW& optimizer, std::span<const Matrix> windows,
              std::vector<WindowPass> passes, const ActivationSet& activations,
              const TtaConfig& cfg, double alpha, double beta);

/// Replaces every bank vector by the current codebook row with the same
/// (scale, index) and recomputes local scales. Cardinality is unchanged.
MemoryBank refresh_coreset(const MemoryBank& previous, std::span<const Codebook> codebooks);

struct StreamWindow {
  std::size_t offset = 0;
  Matrix values;  // window_length x D
};

struct StreamResult {
  ScoreSeries series;
  /// Raw scores of every window, grouped by adaptation batch.
  std::vector<std::vector<WindowScores>> batches;
  ModelParams model;  // state after the last adaptation
  MemoryBank bank;
};

/// Inference-then-train over windows in temporal order: each batch of
/// `config.tta.batch_windows` windows is scored with the current state,
/// then (when TTA is enabled) the model adapts and the coreset is refreshed.
/// EMA normalization is one continuous fold. Throws OrderingError unless
/// offsets strictly increase.
StreamResult stream_driver(std::span<const StreamWindow> windows, ModelParams model,
                           MemoryBank bank, const ActivationSet& activations,
                           const RunConfig& config, std::size_t length);

/// Splits an L x D series into windows and runs `stream_driver`.
StreamResult stream_series(const ModelParams& model, const MemoryBank& bank,
                           const ActivationSet& activations, const RunConfig& config,
                           const Matrix& series);

}  // namespace comet
