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
#include <vector>

#include "comet/ndmath.hpp"

namespace comet {

/// One (patch size, stride) pair. Valid when 1 <= stride <= patch.
struct ScaleSpec {
  std::size_t patch = 1;
  std::size_t stride = 1;

  void validate() const;
  /// floor((length - patch) / stride) + 1; requires length >= patch.
  std::size_t patch_count(std::size_t length) const;

  friend bool operator==(const ScaleSpec&, const ScaleSpec&) = default;
};

/// Patches of every variable at one scale. `values` has one row per
/// (variable, patch index) pair, row = variable * count + j, and `patch`
/// columns holding X[j*stride : j*stride + patch, variable].
struct PatchSet {
  ScaleSpec scale;
  std::size_t variables = 0;
  std::size_t count = 0;
  Matrix values;

  std::span<const double> patch(std::size_t variable, std::size_t j) const {
    return values.row(variable * count + j);
  }
};

/// `window` is L x D (timesteps by variables). Throws DataError when the
/// window is shorter than the patch.
PatchSet extract_patches(const Matrix& window, const ScaleSpec& scale);

/// For every timestep t in [0, length), the patch indices j whose span
/// [j*stride, j*stride + patch) contains t. Trailing timesteps no full patch
/// reaches are left empty here; see `nearest_covered`.
class CoverageMap {
 public:
  CoverageMap(const ScaleSpec& scale, std::size_t length);

  std::size_t length() const noexcept { return covering_.size(); }
  const std::vector<std::size_t>& covering(std::size_t t) const { return covering_[t]; }
  /// Last timestep reached by any patch.
  std::size_t last_covered() const noexcept { return last_covered_; }

  /// Spreads one score per patch onto timesteps: each timestep gets the mean
  /// of the patches covering it, and uncovered tail timesteps copy the last
  /// covered timestep.
  std::vector<double> spread(std::span<const double> patch_scores) const;

 private:
  std::vector<std::vector<std::size_t>> covering_;
  std::size_t last_covered_ = 0;
};

inline CoverageMap coverage(const ScaleSpec& scale, std::size_t length) {
  return CoverageMap(scale, length);
}

}  // namespace comet
