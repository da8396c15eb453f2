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

#include "comet/vq.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "comet/error.hpp"

namespace comet {

Codebook init_codebook(std::size_t scale, std::size_t entries, std::size_t dim, Rng& rng) {
  if (entries == 0 || dim == 0) throw ConfigError("codebook needs at least one entry and dim");
  Codebook cb;
  cb.scale = scale;
  cb.entries = Matrix(entries, dim);
  const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& v : cb.entries.data()) v = sd * rng.normal();
  return cb;
}

QuantResult quantize(std::span<const double> embedding, const Codebook& codebook) {
  if (codebook.size() == 0) throw ConfigError("cannot quantize against an empty codebook");
  if (embedding.size() != codebook.dim()) {
    throw ShapeError("embedding dim " + std::to_string(embedding.size()) +
                     " does not match codebook dim " + std::to_string(codebook.dim()));
  }
  std::size_t best = 0;
  double best_d = squared_distance(embedding, codebook.entries.row(0));
  for (std::size_t m = 1; m < codebook.size(); ++m) {
    const double dist = squared_distance(embedding, codebook.entries.row(m));
    if (dist < best_d) {
      best_d = dist;
      best = m;
    }
  }
  QuantResult r;
  r.index = best;
  auto row = codebook.entries.row(best);
  r.quantized.assign(row.begin(), row.end());
  r.residual_norm = std::sqrt(best_d);
  return r;
}

QuantizedRows quantize_rows(const Matrix& embeddings, const Codebook& codebook) {
  QuantizedRows out;
  out.indices.resize(embeddings.rows());
  out.residual_norms.resize(embeddings.rows());
  out.quantized = Matrix(embeddings.rows(), codebook.dim());
  for (std::size_t r = 0; r < embeddings.rows(); ++r) {
    QuantResult q = quantize(embeddings.row(r), codebook);
    out.indices[r] = q.index;
    out.residual_norms[r] = q.residual_norm;
    std::copy(q.quantized.begin(), q.quantized.end(), out.quantized.row(r).begin());
  }
  return out;
}

VqLosses vq_losses(std::span<const double> embedding, std::span<const double> quantized,
                   double alpha, double beta) {
  if (embedding.size() != quantized.size()) throw ShapeError("vq_losses: dimension mismatch");
  VqLosses out;
  out.codebook_grad.resize(embedding.size());
  out.encoder_grad.resize(embedding.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < embedding.size(); ++i) {
    const double diff = quantized[i] - embedding[i];
    sq += diff * diff;
    out.codebook_grad[i] = alpha * 2.0 * diff;
    out.encoder_grad[i] = -beta * 2.0 * diff;
  }
  out.codebook = sq;
  out.commitment = sq;
  return out;
}

void ActivationSet::record(std::size_t scale, std::size_t index) {
  if (scale >= per_scale_.size()) per_scale_.resize(scale + 1);
  per_scale_[scale].insert(index);
}

bool ActivationSet::contains(std::size_t scale, std::size_t index) const {
  return scale < per_scale_.size() && per_scale_[scale].count(index) > 0;
}

std::size_t ActivationSet::size() const {
  std::size_t n = 0;
  for (const auto& s : per_scale_) n += s.size();
  return n;
}

std::size_t MemoryBank::size() const {
  std::size_t n = 0;
  for (const auto& s : scales) n += s.indices.size();
  return n;
}

double local_scale(std::span<const double> query, const Matrix& vectors, std::size_t neighbors,
                   std::size_t exclude) {
  std::vector<double> dists;
  dists.reserve(vectors.rows());
  for (std::size_t r = 0; r < vectors.rows(); ++r) {
    if (r == exclude) continue;
    dists.push_back(squared_distance(query, vectors.row(r)));
  }
  const std::size_t take = std::min(neighbors, dists.size());
  if (take == 0) return 0.0;
  std::partial_sort(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(take),
                    dists.end());
  dists.resize(take);
  return median(std::move(dists));
}

MemoryBank build_memory_bank(std::span<const Codebook> codebooks,
                             const ActivationSet& activations, std::size_t density_neighbors) {
  MemoryBank bank;
  bank.density_neighbors = density_neighbors;
  bank.scales.resize(codebooks.size());
  for (std::size_t k = 0; k < codebooks.size(); ++k) {
    if (k >= activations.scales() || activations.at(k).empty()) {
      throw DegenerateModelError("scale " + std::to_string(k) +
                                 " has no activated codebook entries");
    }
    const auto& active = activations.at(k);
    const Codebook& cb = codebooks[k];
    ScaleBank& sb = bank.scales[k];
    sb.indices.assign(active.begin(), active.end());
    sb.vectors = Matrix(sb.indices.size(), cb.dim());
    for (std::size_t r = 0; r < sb.indices.size(); ++r) {
      if (sb.indices[r] >= cb.size()) {
        throw ContractError("activation index out of codebook range");
      }
      auto src = cb.entries.row(sb.indices[r]);
      std::copy(src.begin(), src.end(), sb.vectors.row(r).begin());
    }
    sb.sigma.resize(sb.indices.size());
    for (std::size_t r = 0; r < sb.indices.size(); ++r) {
      sb.sigma[r] = local_scale(sb.vectors.row(r), sb.vectors, density_neighbors, r);
    }
  }
  return bank;
}

}  // namespace comet
