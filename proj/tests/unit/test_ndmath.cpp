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

#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "comet/error.hpp"
#include "comet/ndmath.hpp"
#include "oracles.hpp"

using namespace comet;
using comet::testing::naive_matmul;
using comet::testing::random_matrix;

TEST(Matmul, IdentityTimesColumn) {
  Matrix a{{1, 0}, {0, 1}};
  Matrix b{{3}, {4}};
  EXPECT_EQ(matmul(a, b), (Matrix{{3}, {4}}));
}

TEST(Matmul, RowTimesColumn) {
  EXPECT_EQ(matmul(Matrix{{1, 2}}, Matrix{{3}, {4}}), (Matrix{{11}}));
}

TEST(Matmul, ShapeMismatchThrows) {
  EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
  EXPECT_THROW(matmul_bt(Matrix(2, 3), Matrix(2, 4)), ShapeError);
  EXPECT_THROW(matmul_at(Matrix(2, 3), Matrix(3, 3)), ShapeError);
}

TEST(Matmul, AgreesWithTripleLoopOnRandomShapes) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = 1 + rng.below(6), k = 1 + rng.below(6), m = 1 + rng.below(6);
    const Matrix a = random_matrix(n, k, rng);
    const Matrix b = random_matrix(k, m, rng);
    const Matrix ref = naive_matmul(a, b);
    const Matrix got = matmul(a, b);
    const Matrix got_bt = matmul_bt(a, b.transposed());
    const Matrix got_at = matmul_at(a.transposed(), b);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      EXPECT_NEAR(got.data()[i], ref.data()[i], 1e-12);
      EXPECT_NEAR(got_bt.data()[i], ref.data()[i], 1e-12);
      EXPECT_NEAR(got_at.data()[i], ref.data()[i], 1e-12);
    }
  }
}

TEST(Median, EvenAndOddAndEmpty) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_EQ(median({}), 0.0);
}

TEST(Rng, SameSeedSameSequence) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs |= x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformAndNormalMoments) {
  Rng rng(1);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 0.01);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.02);
}

TEST(Rng, BelowIsUnbiasedAndInRange) {
  Rng rng(3);
  std::map<std::uint64_t, int> hist;
  for (int i = 0; i < 60000; ++i) {
    const auto v = rng.below(6);
    ASSERT_LT(v, 6u);
    ++hist[v];
  }
  for (const auto& [v, count] : hist) EXPECT_NEAR(count, 10000, 500) << v;
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng rng(9);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  rng.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(AdamW, ZeroGradientNoDecayIsFixedPoint) {
  AdamW opt({.learning_rate = 0.1, .weight_decay = 0.0});
  const Matrix p{{1.5, -2.0}};
  EXPECT_EQ(opt.step(p, Matrix(1, 2)), p);
}

TEST(AdamW, FirstStepFromZeroWithUnitGradient) {
  // t=1: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps).
  AdamW opt({.learning_rate = 0.1, .weight_decay = 0.0, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8});
  const Matrix out = opt.step(Matrix{{0.0}}, Matrix{{1.0}});
  EXPECT_NEAR(out(0, 0), -0.1 * 1.0 / (1.0 + 1e-8), 1e-15);
}

TEST(AdamW, DecoupledDecayOnly) {
  AdamW opt({.learning_rate = 0.1, .weight_decay = 0.5});
  const Matrix out = opt.step(Matrix{{1.0}}, Matrix{{0.0}});
  EXPECT_DOUBLE_EQ(out(0, 0), 0.95);
}

TEST(AdamW, SecondStepMatchesHandRecurrence) {
  const double lr = 0.01, wd = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  AdamW opt({lr, wd, b1, b2, eps});
  double p = 0.7, m = 0, v = 0;
  Matrix pm{{p}};
  const double grads[] = {0.3, -1.2};
  for (int t = 1; t <= 2; ++t) {
    const double g = grads[t - 1];
    pm = opt.step(pm, Matrix{{g}});
    p -= lr * wd * p;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    p -= lr * mh / (std::sqrt(vh) + eps);
    EXPECT_NEAR(pm(0, 0), p, 1e-15);
  }
  EXPECT_EQ(opt.step_count(), 2u);
}

TEST(AdamW, ZeroLearningRateKeepsParametersBitIdentical) {
  Rng rng(5);
  Matrix p = random_matrix(3, 4, rng);
  const Matrix before = p;
  AdamW opt({.learning_rate = 0.0, .weight_decay = 5e-4});
  Matrix* params[] = {&p};
  const Matrix g = random_matrix(3, 4, rng);
  const Matrix* grads[] = {&g};
  for (int i = 0; i < 3; ++i) opt.step(params, grads);
  EXPECT_EQ(p, before);
}

TEST(AdamW, ShapeMismatchThrows) {
  AdamW opt;
  EXPECT_THROW(opt.step(Matrix(2, 2), Matrix(2, 3)), ShapeError);
}

TEST(FiniteDiff, QuadraticIsExact) {
  Rng rng(11);
  Matrix p = random_matrix(3, 3, rng);
  auto loss = [&] {
    double s = 0;
    for (double v : p.data()) s += 0.5 * v * v;
    return s;
  };
  const Matrix g = p;
  Matrix* params[] = {&p};
  const Matrix* grads[] = {&g};
  EXPECT_LE(finite_diff_check(loss, params, grads, 1e-5), 1e-6);
}

TEST(FiniteDiff, WrongScaleIsReported) {
  Rng rng(12);
  Matrix p = random_matrix(2, 2, rng);
  auto loss = [&] {
    double s = 0;
    for (double v : p.data()) s += 0.5 * v * v;
    return s;
  };
  Matrix g = p;
  g *= 2.0;
  Matrix* params[] = {&p};
  const Matrix* grads[] = {&g};
  EXPECT_NEAR(finite_diff_check(loss, params, grads, 1e-5), 1.0, 1e-6);
}

TEST(FiniteDiff, RestoresParametersAndRejectsNonFinite) {
  Matrix p{{1.0, 2.0}};
  const Matrix before = p;
  const Matrix g{{0.0, 0.0}};
  Matrix* params[] = {&p};
  const Matrix* grads[] = {&g};
  finite_diff_check([&] { return p(0, 0) + p(0, 1); }, params, grads);
  EXPECT_EQ(p, before);
  EXPECT_THROW(finite_diff_check([] { return NAN; }, params, grads), NumericError);
  EXPECT_THROW(finite_diff_check([] { return 0.0; }, params, grads, 0.0), ConfigError);
}
