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

// Independent reference implementations used as test oracles. Nothing here
// calls into the library's numeric kernels except for plain data access.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "comet/model.hpp"
#include "comet/ndmath.hpp"
#include "comet/objective.hpp"

namespace comet::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = scale * rng.uniform(-1.0, 1.0);
  return m;
}

inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

inline double sq(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

/// Lowest-index argmin by a plain scan.
inline std::size_t scan_argmin(std::span<const double> z, const Matrix& entries) {
  std::size_t best = 0;
  double best_d = INFINITY;
  for (std::size_t m = 0; m < entries.rows(); ++m) {
    const double d = sq(z, entries.row(m));
    if (d < best_d) {
      best_d = d;
      best = m;
    }
  }
  return best;
}

/// Encoder output of patch j of variable i, evaluated term by term from the
/// raw window (L x D).
inline std::vector<double> naive_embedding(const Matrix& window, const ScaleSpec& scale,
                                           const ScaleParams& p, std::size_t i, std::size_t j) {
  const std::size_t D = window.cols();
  const std::size_t P = scale.patch;
  const std::size_t half = p.fuse_w.rows() / 2;
  const std::size_t dc = p.core_w.rows();
  auto x = [&](std::size_t var, std::size_t c) { return window(j * scale.stride + c, var); };
  std::vector<double> joint(half + dc);
  for (std::size_t r = 0; r < half; ++r) {
    double s = p.series_b[i](r, 0);
    for (std::size_t c = 0; c < P; ++c) s += p.series_w[i](r, c) * x(i, c);
    joint[r] = s;
  }
  for (std::size_t r = 0; r < dc; ++r) {
    double s = p.core_b(r, 0);
    for (std::size_t v = 0; v < D; ++v)
      for (std::size_t c = 0; c < P; ++c) s += p.core_w(r, v * P + c) * x(v, c);
    joint[half + r] = s;
  }
  std::vector<double> z(p.fuse_w.rows());
  for (std::size_t r = 0; r < z.size(); ++r) {
    double s = p.fuse_b(r, 0);
    for (std::size_t c = 0; c < joint.size(); ++c) s += p.fuse_w(r, c) * joint[c];
    z[r] = s;
  }
  return z;
}

inline std::vector<double> naive_decode(std::span<const double> z, const ScaleParams& p) {
  std::vector<double> out(p.dec_w.rows());
  for (std::size_t r = 0; r < out.size(); ++r) {
    double s = p.dec_b(r, 0);
    for (std::size_t c = 0; c < z.size(); ++c) s += p.dec_w(r, c) * z[c];
    out[r] = s;
  }
  return out;
}

/// Codebook choice and encoder output of every patch, frozen at the point
/// where the analytic gradient is taken.
struct FrozenPatch {
  std::size_t window, scale, variable, j, index;
  std::vector<double> z_e;
  std::vector<double> z_q;
};

inline std::vector<FrozenPatch> freeze(const ModelParams& model, std::span<const Matrix> windows) {
  std::vector<FrozenPatch> out;
  for (std::size_t w = 0; w < windows.size(); ++w)
    for (std::size_t k = 0; k < model.scale_count(); ++k) {
      const std::size_t n = model.scales[k].patch_count(windows[w].rows());
      for (std::size_t i = 0; i < model.dims.variables; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          FrozenPatch f{w, k, i, j, 0, naive_embedding(windows[w], model.scales[k], model.layers[k], i, j), {}};
          f.index = scan_argmin(f.z_e, model.codebooks[k].entries);
          auto row = model.codebooks[k].entries.row(f.index);
          f.z_q.assign(row.begin(), row.end());
          out.push_back(std::move(f));
        }
    }
  return out;
}

/// Loss of one frozen patch written with the stop-gradients spelled out:
/// the codebook index and every sg[.] operand are held at their frozen
/// values while the live parameters vary. Its value equals the patch loss at
/// the frozen point and its derivative is the straight-through gradient.
inline double surrogate_patch_loss(const ModelParams& model, std::span<const Matrix> windows,
                                   const FrozenPatch& f, double alpha, double beta) {
  const ScaleSpec& s = model.scales[f.scale];
  const ScaleParams& p = model.layers[f.scale];
  const std::vector<double> ze = naive_embedding(windows[f.window], s, p, f.variable, f.j);
  std::vector<double> dec_in(ze.size());
  for (std::size_t c = 0; c < ze.size(); ++c) dec_in[c] = ze[c] + f.z_q[c] - f.z_e[c];
  const std::vector<double> rec = naive_decode(dec_in, p);
  double l = 0.0;
  for (std::size_t c = 0; c < s.patch; ++c) {
    const double diff = windows[f.window](f.j * s.stride + c, f.variable) - rec[c];
    l += diff * diff;
  }
  l += alpha * sq(model.codebooks[f.scale].entries.row(f.index), f.z_e);
  l += beta * sq(f.z_q, ze);
  return l;
}

/// Batch training loss: per scale, the mean patch loss over the batch,
/// summed over scales.
inline double surrogate_loss(const ModelParams& model, std::span<const Matrix> windows,
                             const std::vector<FrozenPatch>& frozen, double alpha, double beta) {
  std::vector<std::vector<std::size_t>> rows(windows.size(),
                                             std::vector<std::size_t>(model.scale_count(), 0));
  for (const auto& f : frozen) ++rows[f.window][f.scale];
  double total = 0.0;
  for (const auto& f : frozen) {
    const double w = 1.0 / (static_cast<double>(windows.size()) *
                            static_cast<double>(rows[f.window][f.scale]));
    total += w * surrogate_patch_loss(model, windows, f, alpha, beta);
  }
  return total;
}

/// Plain evaluation of the supervised contrastive loss over cosine
/// similarities, summed over anchors.
inline double naive_contrastive(const Matrix& z, const std::vector<int>& labels, double tau) {
  const std::size_t n = z.rows();
  auto cosine = [&](std::size_t a, std::size_t b) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t c = 0; c < z.cols(); ++c) {
      ab += z(a, c) * z(b, c);
      aa += z(a, c) * z(a, c);
      bb += z(b, c) * z(b, c);
    }
    return ab / (std::sqrt(aa) * std::sqrt(bb));
  };
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t positives = 0;
    for (std::size_t a = 0; a < n; ++a) positives += a != i && labels[a] == labels[i];
    if (positives == 0) continue;
    double denom = 0.0;
    for (std::size_t a = 0; a < n; ++a)
      if (a != i) denom += std::exp(cosine(i, a) / tau);
    double s = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      if (p != i && labels[p] == labels[i]) s += std::log(std::exp(cosine(i, p) / tau) / denom);
    loss += -s / static_cast<double>(positives);
  }
  return loss;
}

/// AUC by counting every (positive, negative) pair; ties count one half.
inline double pairwise_auc(std::span<const double> scores, std::span<const int> labels) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

inline ModelParams toy_model(std::size_t variables, std::size_t embed, std::size_t core,
                             std::size_t codebook, std::vector<ScaleSpec> scales,
                             std::uint64_t seed) {
  Rng rng(seed);
  return ModelParams::init({variables, embed, core, codebook}, scales, rng);
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<std::uint64_t> counter{0};
    const auto ticks = std::chrono::steady_clock::now().time_since_epoch().count();
    Rng rng(static_cast<std::uint64_t>(ticks) + counter++);
    path_ = std::filesystem::temp_directory_path() /
            ("comet-test-" + std::to_string(rng.next_u64()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace comet::testing
