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

#include "comet/objective.hpp"

#include "comet/error.hpp"

namespace comet {

WindowPass forward_window(const ModelParams& model, const Matrix& window) {
  if (window.cols() != model.dims.variables) {
    throw ShapeError("window has " + std::to_string(window.cols()) + " variables, model expects " +
                     std::to_string(model.dims.variables));
  }
  WindowPass pass;
  const std::size_t K = model.scale_count();
  pass.caches.reserve(K);
  pass.quantized.reserve(K);
  pass.reconstructions.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    PatchSet ps = extract_patches(window, model.scales[k]);
    pass.caches.push_back(encode(ps, model.layers[k]));
    pass.quantized.push_back(quantize_rows(pass.caches.back().embeddings, model.codebooks[k]));
    pass.reconstructions.push_back(decode_rows(pass.quantized.back().quantized, model.layers[k]));
  }
  return pass;
}

namespace {

LossTerms objective_impl(const ModelParams* model, const WindowPass& pass,
                         const std::vector<std::vector<double>>& weights, double alpha,
                         double beta, ModelParams* grads,
                         const std::vector<Matrix>* extra) {
  LossTerms terms;
  const std::size_t K = pass.caches.size();
  if (weights.size() != K) throw ShapeError("objective: one weight vector per scale expected");
  for (std::size_t k = 0; k < K; ++k) {
    const ForwardCache& cache = pass.caches[k];
    const QuantizedRows& q = pass.quantized[k];
    const Matrix& rec = pass.reconstructions[k];
    const std::size_t rows = cache.embeddings.rows();
    const std::size_t d = cache.embeddings.cols();
    const std::size_t p = cache.patches.cols();
    if (weights[k].size() != rows) throw ShapeError("objective: weight count != patch count");

    Matrix g_rec, g_embed;
    if (grads != nullptr) {
      g_rec = Matrix(rows, p);
      g_embed = extra != nullptr ? (*extra)[k] : Matrix(rows, d);
      if (!g_embed.same_shape(cache.embeddings)) {
        throw ShapeError("objective: extra embedding gradient shape");
      }
    }
    for (std::size_t r = 0; r < rows; ++r) {
      const double w = weights[k][r];
      if (w == 0.0) continue;
      auto x = cache.patches.row(r);
      auto xr = rec.row(r);
      double rec_sq = 0.0;
      for (std::size_t c = 0; c < p; ++c) {
        const double diff = xr[c] - x[c];
        rec_sq += diff * diff;
        if (grads != nullptr) g_rec(r, c) = w * 2.0 * diff;
      }
      terms.reconstruction += w * rec_sq;

      VqLosses vq = vq_losses(cache.embeddings.row(r), q.quantized.row(r), alpha, beta);
      terms.codebook += w * vq.codebook;
      terms.commitment += w * vq.commitment;
      if (grads != nullptr) {
        auto ge = g_embed.row(r);
        auto gc = grads->codebooks[k].entries.row(q.indices[r]);
        for (std::size_t c = 0; c < d; ++c) {
          ge[c] += w * vq.encoder_grad[c];
          gc[c] += w * vq.codebook_grad[c];
        }
      }
    }
    if (grads != nullptr) {
      backward(cache, model->layers[k], q.quantized, g_embed, g_rec, grads->layers[k]);
    }
  }
  return terms;
}

}  // namespace

LossTerms accumulate_objective(const ModelParams& model, const WindowPass& pass,
                               const std::vector<std::vector<double>>& weights, double alpha,
                               double beta, ModelParams& grads,
                               const std::vector<Matrix>* extra_embedding_grads) {
  return objective_impl(&model, pass, weights, alpha, beta, &grads, extra_embedding_grads);
}

LossTerms evaluate_objective(const WindowPass& pass,
                             const std::vector<std::vector<double>>& weights) {
  return objective_impl(nullptr, pass, weights, 0.0, 0.0, nullptr, nullptr);
}

LossTerms batch_objective(const ModelParams& model, std::span<const Matrix> windows,
                          double alpha, double beta, ModelParams& grads) {
  if (windows.empty()) throw DataError("batch_objective: empty batch");
  for (Matrix* m : grads.tensors()) m->fill(0.0);
  LossTerms terms;
  const double batch = static_cast<double>(windows.size());
  for (const Matrix& window : windows) {
    WindowPass pass = forward_window(model, window);
    std::vector<std::vector<double>> weights(pass.caches.size());
    for (std::size_t k = 0; k < pass.caches.size(); ++k) {
      const std::size_t rows = pass.rows(k);
      weights[k].assign(rows, 1.0 / (batch * static_cast<double>(rows)));
    }
    terms += accumulate_objective(model, pass, weights, alpha, beta, grads);
  }
  return terms;
}

}  // namespace comet
