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
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "comet/ndmath.hpp"

namespace comet {

/// Learnable prototypes for one scale: `entries` is M x d.
struct Codebook {
  std::size_t scale = 0;
  Matrix entries;

  std::size_t size() const noexcept { return entries.rows(); }
  std::size_t dim() const noexcept { return entries.cols(); }
};

/// Entries drawn i.i.d. from N(0, 1/d).
Codebook init_codebook(std::size_t scale, std::size_t entries, std::size_t dim, Rng& rng);

/// Nearest codebook entry. Indices are zero-based.
struct QuantResult {
  std::size_t index = 0;
  std::vector<double> quantized;
  double residual_norm = 0.0;
};

/// Exact argmin of the squared Euclidean distance; ties go to the lowest index.
QuantResult quantize(std::span<const double> embedding, const Codebook& codebook);

/// Row-wise quantization of an n x d embedding matrix.
struct QuantizedRows {
  std::vector<std::size_t> indices;
  Matrix quantized;                  // n x d, row r is codebook row indices[r]
  std::vector<double> residual_norms;
};
QuantizedRows quantize_rows(const Matrix& embeddings, const Codebook& codebook);

/// Codebook and commitment terms for one embedding, with stop-gradient
/// routing resolved: `codebook_grad` flows only into the selected codebook
/// row, `encoder_grad` only into the encoder output. Both are the weighted
/// (alpha, beta) gradients.
struct VqLosses {
  double codebook = 0.0;    // ||z_q - sg[z_e]||^2
  double commitment = 0.0;  // ||sg[z_q] - z_e||^2
  std::vector<double> codebook_grad;
  std::vector<double> encoder_grad;
};
VqLosses vq_losses(std::span<const double> embedding, std::span<const double> quantized,
                   double alpha, double beta);

/// (scale, index) pairs of codebook entries hit by training data.
class ActivationSet {
 public:
  ActivationSet() = default;
  explicit ActivationSet(std::size_t scales) : per_scale_(scales) {}

  void record(std::size_t scale, std::size_t index);
  bool contains(std::size_t scale, std::size_t index) const;
  std::size_t scales() const noexcept { return per_scale_.size(); }
  const std::set<std::size_t>& at(std::size_t scale) const { return per_scale_.at(scale); }
  std::size_t size() const;
  bool empty() const { return size() == 0; }

  friend bool operator==(const ActivationSet&, const ActivationSet&) = default;

 private:
  std::vector<std::set<std::size_t>> per_scale_;
};

/// Activated entries of one scale together with their local scales.
struct ScaleBank {
  std::vector<std::size_t> indices;  // codebook rows, ascending
  Matrix vectors;                    // indices.size() x d
  std::vector<double> sigma;         // median squared distance to nearest peers
};

struct MemoryBank {
  std::size_t density_neighbors = 10;
  std::vector<ScaleBank> scales;

  std::size_t size() const;
};

/// Median squared distance from `query` to its `neighbors` nearest rows of
/// `vectors`, optionally skipping row `exclude`. Ties resolve by row order.
double local_scale(std::span<const double> query, const Matrix& vectors, std::size_t neighbors,
                   std::size_t exclude = static_cast<std::size_t>(-1));

/// Collects activated codebook rows per scale and computes each one's local
/// scale against its same-scale peers (self excluded; an isolated entry gets
/// 0). Throws DegenerateModelError when some scale has no activations.
MemoryBank build_memory_bank(std::span<const Codebook> codebooks,
                             const ActivationSet& activations, std::size_t density_neighbors);

}  // namespace comet
