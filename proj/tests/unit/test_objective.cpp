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

#include <gtest/gtest.h>

#include "comet/error.hpp"
#include "comet/objective.hpp"
#include "oracles.hpp"

using namespace comet;
namespace ct = comet::testing;

namespace {

double grad_check(ModelParams& model, const std::vector<Matrix>& windows, double alpha,
                  double beta, double h) {
  ModelParams grads = model.zeros_like();
  const LossTerms terms = batch_objective(model, windows, alpha, beta, grads);
  const auto frozen = ct::freeze(model, windows);
  EXPECT_NEAR(ct::surrogate_loss(model, windows, frozen, alpha, beta), terms.total(alpha, beta),
              1e-12 * (1.0 + terms.total(alpha, beta)));
  return finite_diff_check([&] { return ct::surrogate_loss(model, windows, frozen, alpha, beta); },
                           model.tensors(), static_cast<const ModelParams&>(grads).tensors(), h);
}

}  // namespace

TEST(Objective, GradientOnSpecToySizes) {
  ModelParams model = ct::toy_model(2, 4, 2, 3, {{2, 1}}, 42);
  Rng rng(1);
  const std::vector<Matrix> windows{ct::random_matrix(12, 2, rng)};
  EXPECT_LE(grad_check(model, windows, 1.0, 1.0, 1e-3), 1e-4);
}

TEST(Objective, GradientSingleVariableLengthTen) {
  ModelParams model = ct::toy_model(1, 4, 2, 3, {{2, 1}, {4, 2}}, 7);
  Rng rng(2);
  const std::vector<Matrix> windows{ct::random_matrix(10, 1, rng)};
  EXPECT_LE(grad_check(model, windows, 1.0, 1.0, 1e-3), 1e-4);
}

TEST(Objective, GradientMultiScaleBatchWithUnequalWeights) {
  ModelParams model = ct::toy_model(3, 6, 3, 4, {{2, 1}, {4, 2}, {6, 3}}, 9);
  Rng rng(3);
  const std::vector<Matrix> windows{ct::random_matrix(16, 3, rng), ct::random_matrix(16, 3, rng)};
  EXPECT_LE(grad_check(model, windows, 0.7, 0.3, 1e-3), 1e-4);
}

TEST(Objective, BatchValueIsPerScaleMeanSummedOverScales) {
  ModelParams model = ct::toy_model(2, 4, 2, 3, {{2, 1}, {4, 2}}, 5);
  Rng rng(4);
  const std::vector<Matrix> windows{ct::random_matrix(12, 2, rng), ct::random_matrix(12, 2, rng)};
  ModelParams grads = model.zeros_like();
  const LossTerms terms = batch_objective(model, windows, 1.0, 1.0, grads);

  double expect_rec = 0.0, expect_cb = 0.0;
  for (std::size_t k = 0; k < 2; ++k) {
    double sum_rec = 0, sum_cb = 0;
    std::size_t n = 0;
    for (const Matrix& w : windows) {
      const ScaleSpec s = model.scales[k];
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < s.patch_count(12); ++j, ++n) {
          const auto z = ct::naive_embedding(w, s, model.layers[k], i, j);
          const auto q = model.codebooks[k].entries.row(ct::scan_argmin(z, model.codebooks[k].entries));
          const auto rec = ct::naive_decode(q, model.layers[k]);
          for (std::size_t c = 0; c < s.patch; ++c) {
            const double diff = w(j * s.stride + c, i) - rec[c];
            sum_rec += diff * diff;
          }
          sum_cb += ct::sq(q, z);
        }
    }
    expect_rec += sum_rec / static_cast<double>(n);
    expect_cb += sum_cb / static_cast<double>(n);
  }
  EXPECT_NEAR(terms.reconstruction, expect_rec, 1e-12);
  EXPECT_NEAR(terms.codebook, expect_cb, 1e-12);
  EXPECT_NEAR(terms.commitment, expect_cb, 1e-12);
}

TEST(Objective, GradientsResetEachCall) {
  ModelParams model = ct::toy_model(1, 4, 2, 3, {{2, 1}}, 5);
  Rng rng(4);
  const std::vector<Matrix> windows{ct::random_matrix(8, 1, rng)};
  ModelParams g1 = model.zeros_like();
  batch_objective(model, windows, 1.0, 1.0, g1);
  ModelParams g2 = g1;
  batch_objective(model, windows, 1.0, 1.0, g2);
  const auto a = static_cast<const ModelParams&>(g1).tensors();
  const auto b = static_cast<const ModelParams&>(g2).tensors();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i], *b[i]);
}

TEST(Objective, EmptyBatchThrows) {
  ModelParams model = ct::toy_model(1, 4, 2, 3, {{2, 1}}, 5);
  ModelParams g = model.zeros_like();
  EXPECT_THROW(batch_objective(model, {}, 1.0, 1.0, g), DataError);
}
