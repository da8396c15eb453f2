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
#include <span>
#include <vector>

#include "comet/ndmath.hpp"
#include "comet/patching.hpp"
#include "comet/vq.hpp"

namespace comet {

/// Shapes shared by every scale of a model.
struct ModelDims {
  std::size_t variables = 1;  // D
  std::size_t embed = 128;    // d, must be even
  std::size_t core = 64;      // d_c
  std::size_t codebook = 128; // M

  void validate() const;
};

/// Affine layers of one scale. Weight shapes (rows x cols):
///   series_w[i] : d/2 x p      series_b[i] : d/2 x 1   (one pair per variable)
///   core_w      : d_c x D*p    core_b      : d_c x 1
///   fuse_w      : d x (d/2+d_c) fuse_b     : d x 1
///   dec_w       : p x d        dec_b       : p x 1
struct ScaleParams {
  std::vector<Matrix> series_w;
  std::vector<Matrix> series_b;
  Matrix core_w, core_b;
  Matrix fuse_w, fuse_b;
  Matrix dec_w, dec_b;

  /// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
  static ScaleParams init(const ModelDims& dims, std::size_t patch, Rng& rng);
  static ScaleParams zeros(const ModelDims& dims, std::size_t patch);
  ScaleParams zeros_like() const;

  std::size_t patch() const noexcept { return dec_w.rows(); }
  std::size_t variables() const noexcept { return series_w.size(); }
  std::size_t embed() const noexcept { return fuse_w.rows(); }
  std::size_t core() const noexcept { return core_w.rows(); }

  /// Every tensor in a fixed order (series pairs first, then core, fuse, dec).
  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;

  /// FNV-1a over all parameter bits; used to detect stale caches.
  std::uint64_t fingerprint() const;
};

/// Everything gradient descent touches: per-scale layers and codebooks.
struct ModelParams {
  ModelDims dims;
  std::vector<ScaleSpec> scales;
  std::vector<ScaleParams> layers;
  std::vector<Codebook> codebooks;

  static ModelParams init(const ModelDims& dims, std::span<const ScaleSpec> scales, Rng& rng);
  ModelParams zeros_like() const;

  std::size_t scale_count() const noexcept { return scales.size(); }
  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;
};

/// Intermediates of one scale's encoder pass over a window.
/// Row layout matches PatchSet: row = variable * count + j.
struct ForwardCache {
  std::size_t variables = 0;
  std::size_t count = 0;
  Matrix patches;      // D*N x p
  Matrix concatenated; // N x D*p
  Matrix series;       // D*N x d/2
  Matrix core;         // N x d_c
  Matrix embeddings;   // D*N x d  (z_e)
  std::uint64_t params_fingerprint = 0;
};

/// z_e = W_g [W_s,i P + b_s,i ; W_c P~_j + b_c] + b_g for every patch.
ForwardCache encode(const PatchSet& patches, const ScaleParams& params);

/// W_dec z + b_dec for one embedding.
std::vector<double> decode(std::span<const double> embedding, const ScaleParams& params);
/// Row-wise decode of an n x d matrix.
Matrix decode_rows(const Matrix& embeddings, const ScaleParams& params);

/// Accumulates parameter gradients into `grads`.
///
/// `decoder_input` is the matrix fed to the decoder (the quantized rows),
/// `grad_embedding` is dLoss/dz_e from terms that see z_e directly and
/// `grad_reconstruction` is dLoss/d(decoder output). The decoder-input
/// gradient is copied straight through onto z_e. Throws ContractError when
/// `params` no longer matches the parameters `cache` was produced with.
void backward(const ForwardCache& cache, const ScaleParams& params, const Matrix& decoder_input,
              const Matrix& grad_embedding, const Matrix& grad_reconstruction,
              ScaleParams& grads);

}  // namespace comet
