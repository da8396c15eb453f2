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

#include "comet/patching.hpp"

#include <string>

#include "comet/error.hpp"

namespace comet {

void ScaleSpec::validate() const {
  if (patch < 1 || stride < 1 || stride > patch) {
    throw ConfigError("scale needs 1 <= stride <= patch (got patch=" + std::to_string(patch) +
                      ", stride=" + std::to_string(stride) + ")");
  }
}

std::size_t ScaleSpec::patch_count(std::size_t length) const {
  if (length < patch) {
    throw DataError("window of length " + std::to_string(length) +
                    " is too short for patch size " + std::to_string(patch));
  }
  return (length - patch) / stride + 1;
}

PatchSet extract_patches(const Matrix& window, const ScaleSpec& scale) {
  scale.validate();
  PatchSet out;
  out.scale = scale;
  out.variables = window.cols();
  out.count = scale.patch_count(window.rows());
  out.values = Matrix(out.variables * out.count, scale.patch);
  for (std::size_t i = 0; i < out.variables; ++i) {
    for (std::size_t j = 0; j < out.count; ++j) {
      auto dst = out.values.row(i * out.count + j);
      const std::size_t start = j * scale.stride;
      for (std::size_t r = 0; r < scale.patch; ++r) dst[r] = window(start + r, i);
    }
  }
  return out;
}

CoverageMap::CoverageMap(const ScaleSpec& scale, std::size_t length) : covering_(length) {
  scale.validate();
  const std::size_t n = scale.patch_count(length);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t start = j * scale.stride;
    for (std::size_t t = start; t < start + scale.patch; ++t) covering_[t].push_back(j);
  }
  last_covered_ = (n - 1) * scale.stride + scale.patch - 1;
}

std::vector<double> CoverageMap::spread(std::span<const double> patch_scores) const {
  std::vector<double> out(covering_.size(), 0.0);
  for (std::size_t t = 0; t <= last_covered_; ++t) {
    const auto& js = covering_[t];
    double sum = 0.0;
    for (std::size_t j : js) sum += patch_scores[j];
    out[t] = sum / static_cast<double>(js.size());
  }
  for (std::size_t t = last_covered_ + 1; t < out.size(); ++t) out[t] = out[last_covered_];
  return out;
}

}  // namespace comet
