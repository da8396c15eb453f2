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

#include "comet/model.hpp"
#include "comet/vq.hpp"

namespace comet {

/// Encoder, quantizer and decoder outputs of one window at every scale.
struct WindowPass {
  std::vector<ForwardCache> caches;       // per scale
  std::vector<QuantizedRows> quantized;   // per scale, rows aligned with the cache
  std::vector<Matrix> reconstructions;    // per scale, D*N x p

  std::size_t rows(std::size_t scale) const { return caches[scale].embeddings.rows(); }
};

/// `window` is L x D.
WindowPass forward_window(const ModelParams& model, const Matrix& window);

struct LossTerms {
  double reconstruction = 0.0;
  double codebook = 0.0;
  double commitment = 0.0;

  double total(double alpha, double beta) const {
    return reconstruction + alpha * codebook + beta * commitment;
  }
  LossTerms& operator+=(const LossTerms& o) {
    reconstruction += o.reconstruction;
    codebook += o.codebook;
    commitment += o.commitment;
    return *this;
  }
};

/// Weighted sum over patches of
///   ||P - h(z_q)||^2 + alpha ||z_q - sg[z_e]||^2 + beta ||sg[z_q] - z_e||^2
/// with `weights[k][row]` the weight of each patch row at scale k. Gradients
/// (straight-through for the reconstruction path) are accumulated into
/// `grads`. `extra_embedding_grads`, when given, holds one D*N x d matrix per
/// scale that is added to dLoss/dz_e before backpropagating.
LossTerms accumulate_objective(const ModelParams& model, const WindowPass& pass,
                               const std::vector<std::vector<double>>& weights, double alpha,
                               double beta, ModelParams& grads,
                               const std::vector<Matrix>* extra_embedding_grads = nullptr);

/// Loss terms only, same weighting, no gradients.
LossTerms evaluate_objective(const WindowPass& pass,
                             const std::vector<std::vector<double>>& weights);

/// Training objective of a batch: for each scale the mean patch loss over
/// the batch, summed over scales. Returns the mean terms and fills `grads`
/// (which is reset to zero first).
LossTerms batch_objective(const ModelParams& model, std::span<const Matrix> windows,
                          double alpha, double beta, ModelParams& grads);

}  // namespace comet
