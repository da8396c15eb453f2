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

#include "comet/model.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "comet/error.hpp"

namespace comet {

namespace {

Matrix uniform_weights(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix w(rows, cols);
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  for (double& v : w.data()) v = rng.uniform(-bound, bound);
  return w;
}

void add_column_sums(const Matrix& g, std::size_t row_begin, std::size_t row_end, Matrix& bias) {
  auto b = bias.data();
  for (std::size_t r = row_begin; r < row_end; ++r) {
    auto row = g.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) b[c] += row[c];
  }
}

void fnv_mix(std::uint64_t& h, const Matrix& m) {
  for (double v : m.data()) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
}

}  // namespace

void ModelDims::validate() const {
  if (variables < 1) throw ConfigError("model needs at least one variable");
  if (embed < 2 || embed % 2 != 0) {
    throw ConfigError("embedding dimension d must be even and >= 2 (got " +
                      std::to_string(embed) + ")");
  }
  if (core < 1) throw ConfigError("core encoder dimension must be >= 1");
  if (codebook < 1) throw ConfigError("codebook size must be >= 1");
}

ScaleParams ScaleParams::init(const ModelDims& dims, std::size_t patch, Rng& rng) {
  dims.validate();
  const std::size_t half = dims.embed / 2;
  ScaleParams p;
  for (std::size_t i = 0; i < dims.variables; ++i) {
    p.series_w.push_back(uniform_weights(half, patch, rng));
    p.series_b.emplace_back(half, 1);
  }
  p.core_w = uniform_weights(dims.core, dims.variables * patch, rng);
  p.core_b = Matrix(dims.core, 1);
  p.fuse_w = uniform_weights(dims.embed, half + dims.core, rng);
  p.fuse_b = Matrix(dims.embed, 1);
  p.dec_w = uniform_weights(patch, dims.embed, rng);
  p.dec_b = Matrix(patch, 1);
  return p;
}

ScaleParams ScaleParams::zeros(const ModelDims& dims, std::size_t patch) {
  dims.validate();
  const std::size_t half = dims.embed / 2;
  ScaleParams p;
  for (std::size_t i = 0; i < dims.variables; ++i) {
    p.series_w.emplace_back(half, patch);
    p.series_b.emplace_back(half, 1);
  }
  p.core_w = Matrix(dims.core, dims.variables * patch);
  p.core_b = Matrix(dims.core, 1);
  p.fuse_w = Matrix(dims.embed, half + dims.core);
  p.fuse_b = Matrix(dims.embed, 1);
  p.dec_w = Matrix(patch, dims.embed);
  p.dec_b = Matrix(patch, 1);
  return p;
}

ScaleParams ScaleParams::zeros_like() const {
  ScaleParams z = *this;
  for (Matrix* m : z.tensors()) m->fill(0.0);
  return z;
}

std::vector<Matrix*> ScaleParams::tensors() {
  std::vector<Matrix*> out;
  for (std::size_t i = 0; i < series_w.size(); ++i) {
    out.push_back(&series_w[i]);
    out.push_back(&series_b[i]);
  }
  for (Matrix* m : {&core_w, &core_b, &fuse_w, &fuse_b, &dec_w, &dec_b}) out.push_back(m);
  return out;
}

std::vector<const Matrix*> ScaleParams::tensors() const {
  std::vector<const Matrix*> out;
  for (Matrix* m : const_cast<ScaleParams*>(this)->tensors()) out.push_back(m);
  return out;
}

std::uint64_t ScaleParams::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Matrix* m : tensors()) fnv_mix(h, *m);
  return h;
}

ModelParams ModelParams::init(const ModelDims& dims, std::span<const ScaleSpec> scales, Rng& rng) {
  dims.validate();
  if (scales.empty()) throw ConfigError("at least one scale is required");
  ModelParams mp;
  mp.dims = dims;
  mp.scales.assign(scales.begin(), scales.end());
  for (std::size_t k = 0; k < scales.size(); ++k) {
    scales[k].validate();
    mp.layers.push_back(ScaleParams::init(dims, scales[k].patch, rng));
  }
  for (std::size_t k = 0; k < scales.size(); ++k) {
    mp.codebooks.push_back(init_codebook(k, dims.codebook, dims.embed, rng));
  }
  return mp;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  for (Matrix* m : z.tensors()) m->fill(0.0);
  return z;
}

std::vector<Matrix*> ModelParams::tensors() {
  std::vector<Matrix*> out;
  for (auto& l : layers) {
    auto t = l.tensors();
    out.insert(out.end(), t.begin(), t.end());
  }
  for (auto& cb : codebooks) out.push_back(&cb.entries);
  return out;
}

std::vector<const Matrix*> ModelParams::tensors() const {
  std::vector<const Matrix*> out;
  for (Matrix* m : const_cast<ModelParams*>(this)->tensors()) out.push_back(m);
  return out;
}

ForwardCache encode(const PatchSet& patches, const ScaleParams& params) {
  const std::size_t D = patches.variables;
  const std::size_t N = patches.count;
  const std::size_t p = patches.scale.patch;
  if (params.variables() != D || params.patch() != p || patches.values.cols() != p) {
    throw ShapeError("encode: patches (D=" + std::to_string(D) + ", p=" + std::to_string(p) +
                     ") do not match scale parameters (D=" +
                     std::to_string(params.variables()) + ", p=" +
                     std::to_string(params.patch()) + ")");
  }
  const std::size_t half = params.embed() / 2;
  const std::size_t dc = params.core();

  ForwardCache c;
  c.variables = D;
  c.count = N;
  c.patches = patches.values;
  c.params_fingerprint = params.fingerprint();

  c.concatenated = Matrix(N, D * p);
  for (std::size_t j = 0; j < N; ++j) {
    auto dst = c.concatenated.row(j);
    for (std::size_t i = 0; i < D; ++i) {
      auto src = patches.patch(i, j);
      std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(i * p));
    }
  }

  c.series = Matrix(D * N, half);
  for (std::size_t i = 0; i < D; ++i) {
    const Matrix& w = params.series_w[i];
    auto b = params.series_b[i].data();
    for (std::size_t j = 0; j < N; ++j) {
      auto x = patches.patch(i, j);
      auto out = c.series.row(i * N + j);
      for (std::size_t r = 0; r < half; ++r) out[r] = dot(w.row(r), x) + b[r];
    }
  }

  c.core = matmul_bt(c.concatenated, params.core_w);
  for (std::size_t j = 0; j < N; ++j) {
    auto row = c.core.row(j);
    for (std::size_t r = 0; r < dc; ++r) row[r] += params.core_b.data()[r];
  }

  const std::size_t d = params.embed();
  c.embeddings = Matrix(D * N, d);
  std::vector<double> joint(half + dc);
  for (std::size_t i = 0; i < D; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      auto hs = c.series.row(i * N + j);
      auto hc = c.core.row(j);
      std::copy(hs.begin(), hs.end(), joint.begin());
      std::copy(hc.begin(), hc.end(), joint.begin() + static_cast<std::ptrdiff_t>(half));
      auto out = c.embeddings.row(i * N + j);
      for (std::size_t r = 0; r < d; ++r) {
        out[r] = dot(params.fuse_w.row(r), joint) + params.fuse_b.data()[r];
      }
    }
  }
  return c;
}

std::vector<double> decode(std::span<const double> embedding, const ScaleParams& params) {
  if (embedding.size() != params.embed()) {
    throw ShapeError("decode: embedding length " + std::to_string(embedding.size()) +
                     " != d=" + std::to_string(params.embed()));
  }
  std::vector<double> out(params.patch());
  for (std::size_t r = 0; r < out.size(); ++r) {
    out[r] = dot(params.dec_w.row(r), embedding) + params.dec_b.data()[r];
  }
  return out;
}

Matrix decode_rows(const Matrix& embeddings, const ScaleParams& params) {
  if (embeddings.cols() != params.embed()) throw ShapeError("decode_rows: embedding width");
  Matrix out = matmul_bt(embeddings, params.dec_w);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += params.dec_b.data()[c];
  }
  return out;
}

void backward(const ForwardCache& cache, const ScaleParams& params, const Matrix& decoder_input,
              const Matrix& grad_embedding, const Matrix& grad_reconstruction,
              ScaleParams& grads) {
  if (cache.params_fingerprint != params.fingerprint()) {
    throw ContractError("backward: forward cache is stale (parameters changed since encode)");
  }
  const std::size_t D = cache.variables;
  const std::size_t N = cache.count;
  const std::size_t rows = D * N;
  const std::size_t p = params.patch();
  const std::size_t half = params.embed() / 2;
  const std::size_t dc = params.core();
  if (decoder_input.rows() != rows || grad_embedding.rows() != rows ||
      grad_reconstruction.rows() != rows || grad_reconstruction.cols() != p ||
      grad_embedding.cols() != params.embed() || decoder_input.cols() != params.embed()) {
    throw ShapeError("backward: upstream gradient shapes do not match the cache");
  }

  // Decoder.
  grads.dec_w += matmul_at(grad_reconstruction, decoder_input);
  add_column_sums(grad_reconstruction, 0, rows, grads.dec_b);

  // Straight-through: the decoder-input gradient lands on z_e.
  Matrix g_embed = matmul(grad_reconstruction, params.dec_w);
  g_embed += grad_embedding;

  // Fusion layer.
  Matrix joint(rows, half + dc);
  for (std::size_t i = 0; i < D; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      auto dst = joint.row(i * N + j);
      auto hs = cache.series.row(i * N + j);
      auto hc = cache.core.row(j);
      std::copy(hs.begin(), hs.end(), dst.begin());
      std::copy(hc.begin(), hc.end(), dst.begin() + static_cast<std::ptrdiff_t>(half));
    }
  }
  grads.fuse_w += matmul_at(g_embed, joint);
  add_column_sums(g_embed, 0, rows, grads.fuse_b);
  Matrix g_joint = matmul(g_embed, params.fuse_w);

  // Series encoders, one per variable.
  for (std::size_t i = 0; i < D; ++i) {
    Matrix& gw = grads.series_w[i];
    auto gb = grads.series_b[i].data();
    for (std::size_t j = 0; j < N; ++j) {
      auto g = g_joint.row(i * N + j);
      auto x = cache.patches.row(i * N + j);
      for (std::size_t r = 0; r < half; ++r) {
        const double gr = g[r];
        if (gr == 0.0) continue;
        gb[r] += gr;
        auto w_row = gw.row(r);
        for (std::size_t c = 0; c < p; ++c) w_row[c] += gr * x[c];
      }
    }
  }

  // Shared core encoder: contributions from every variable at patch j add up.
  Matrix g_core(N, dc);
  for (std::size_t i = 0; i < D; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      auto g = g_joint.row(i * N + j);
      auto dst = g_core.row(j);
      for (std::size_t r = 0; r < dc; ++r) dst[r] += g[half + r];
    }
  }
  grads.core_w += matmul_at(g_core, cache.concatenated);
  add_column_sums(g_core, 0, N, grads.core_b);
}

}  // namespace comet
