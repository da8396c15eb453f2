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

#include <gtest/gtest.h>

#include "comet/data.hpp"
#include "comet/error.hpp"
#include "comet/train.hpp"
#include "comet/tta.hpp"
#include "oracles.hpp"

using namespace comet;
namespace ct = comet::testing;

namespace {

struct Rig {
  RunConfig config;
  ModelParams model;
  ActivationSet activations;
  MemoryBank bank;
  Matrix test;
};

// Small model with activations collected on a smooth training signal.
Rig make_setup(std::size_t test_length = 200) {
  Rig s;
  s.config.scales = {{2, 1}, {4, 2}};
  s.config.embed = 4;
  s.config.core = 2;
  s.config.codebook = 16;
  s.config.window_length = 20;
  s.config.window_stride = 10;
  s.config.tta.enabled = true;
  s.config.tta.batch_windows = 3;
  s.config.tta.learning_rate = 1e-2;
  s.model = ct::toy_model(2, 4, 2, 16, s.config.scales, 11);
  Matrix train(120, 2);
  for (std::size_t t = 0; t < 120; ++t) {
    train(t, 0) = std::sin(0.3 * static_cast<double>(t));
    train(t, 1) = std::cos(0.2 * static_cast<double>(t));
  }
  std::vector<Matrix> windows;
  for (auto off : window_offsets(120, 20, 10)) windows.push_back(slice_window(train, off, 20));
  s.activations = collect_activations(s.model, windows);
  s.bank = build_memory_bank(s.model.codebooks, s.activations, 10);
  Rng rng(5);
  s.test = Matrix(test_length, 2);
  for (std::size_t t = 0; t < test_length; ++t) {
    s.test(t, 0) = std::sin(0.3 * static_cast<double>(t)) + 0.3 * rng.normal();
    s.test(t, 1) = std::cos(0.2 * static_cast<double>(t)) + 0.3 * rng.normal() + 0.01 * t;
  }
  return s;
}

std::vector<StreamWindow> stream_of(const Rig& s) {
  std::vector<StreamWindow> out;
  for (auto off : window_offsets(s.test.rows(), s.config.window_length, s.config.window_stride))
    out.push_back({off, slice_window(s.test, off, s.config.window_length)});
  return out;
}

bool same_params(const ModelParams& a, const ModelParams& b) {
  const auto x = a.tensors();
  const auto y = b.tensors();
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(*x[i] == *y[i])) return false;
  return true;
}

}  // namespace

TEST(PseudoLabel, TrainingWindowsAreAllNormal) {
  const Rig s = make_setup();
  Matrix train(120, 2);
  for (std::size_t t = 0; t < 120; ++t) {
    train(t, 0) = std::sin(0.3 * static_cast<double>(t));
    train(t, 1) = std::cos(0.2 * static_cast<double>(t));
  }
  std::vector<WindowPass> passes;
  for (auto off : window_offsets(120, 20, 10)) passes.push_back(forward_window(s.model, slice_window(train, off, 20)));
  for (const PseudoLabel& l : pseudo_label(passes, s.activations)) EXPECT_EQ(l.value, 0);
}

TEST(PseudoLabel, UnseenIndexIsAnomalous) {
  const Rig s = make_setup();
  const std::vector<WindowPass> passes{forward_window(s.model, slice_window(s.test, 0, 20))};
  const auto labels = pseudo_label(passes, ActivationSet(2));
  ASSERT_FALSE(labels.empty());
  for (const PseudoLabel& l : labels) EXPECT_EQ(l.value, 1);
  std::size_t r = 0;
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t idx : passes[0].quantized[k].indices) {
      EXPECT_EQ(labels[r].scale, k);
      EXPECT_EQ(labels[r++].index, idx);
    }
}

TEST(Contrastive, TwoIdenticalSameLabelIsZero) {
  const Matrix z{{0.3, 0.4}, {0.3, 0.4}};
  const ContrastiveResult r = contrastive_loss(z, std::vector<int>{0, 0}, 1.0);
  EXPECT_NEAR(r.loss, 0.0, 1e-15);
}

TEST(Contrastive, DistinctLabelsAndSingletonsAreZero) {
  Rng rng(2);
  const Matrix z = ct::random_matrix(2, 3, rng);
  EXPECT_EQ(contrastive_loss(z, std::vector<int>{0, 1}, 0.1).loss, 0.0);
  const ContrastiveResult one = contrastive_loss(ct::random_matrix(1, 3, rng), std::vector<int>{0}, 0.1);
  EXPECT_EQ(one.loss, 0.0);
  for (double g : one.gradient.data()) EXPECT_EQ(g, 0.0);
}

TEST(Contrastive, MatchesDirectFormula) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2 + rng.below(8);
    const Matrix z = ct::random_matrix(n, 1 + rng.below(5), rng);
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(rng.below(2));
    const double tau = rng.uniform(0.05, 1.0);
    EXPECT_NEAR(contrastive_loss(z, labels, tau).loss, ct::naive_contrastive(z, labels, tau), 1e-9);
  }
}

TEST(Contrastive, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix z = ct::random_matrix(6, 4, rng);
    const std::vector<int> labels{0, 1, 0, 0, 1, 1};
    const ContrastiveResult r = contrastive_loss(z, labels, 0.5);
    Matrix* params[] = {&z};
    const Matrix* grads[] = {&r.gradient};
    EXPECT_LE(finite_diff_check([&] { return ct::naive_contrastive(z, labels, 0.5); }, params, grads, 1e-5), 1e-5);
  }
}

TEST(Contrastive, InvariantToPositiveRescaling) {
  Rng rng(5);
  Matrix z = ct::random_matrix(7, 3, rng);
  const std::vector<int> labels{0, 0, 1, 1, 0, 1, 0};
  const double base = contrastive_loss(z, labels, 0.1).loss;
  for (std::size_t r = 0; r < z.rows(); ++r)
    for (double& v : z.row(r)) v *= 0.01 + 37.0 * static_cast<double>(r);
  EXPECT_NEAR(contrastive_loss(z, labels, 0.1).loss, base, 1e-9);
}

TEST(TtaObjective, GradientMatchesFiniteDifferences) {
  Rig s = make_setup();
  ModelParams& model = s.model;
  const std::vector<Matrix> windows{slice_window(s.test, 0, 20), slice_window(s.test, 100, 20)};
  std::vector<WindowPass> passes;
  for (const Matrix& w : windows) passes.push_back(forward_window(model, w));
  TtaConfig cfg = s.config.tta;
  cfg.weight = 0.7;
  cfg.temperature = 0.5;
  ModelParams grads = model.zeros_like();
  const TtaObjective obj = tta_objective(model, passes, s.activations, cfg, 1.0, 1.0, grads);
  ASSERT_GT(obj.normal_count, 0u);
  ASSERT_LT(obj.normal_count, obj.total_count);

  const auto frozen = ct::freeze(model, windows);
  std::vector<int> labels;
  for (const auto& f : frozen) labels.push_back(s.activations.contains(f.scale, f.index) ? 0 : 1);
  auto surrogate = [&] {
    double normal = 0.0;
    Matrix z(frozen.size(), model.dims.embed);
    for (std::size_t r = 0; r < frozen.size(); ++r) {
      const auto& f = frozen[r];
      if (labels[r] == 0) normal += ct::surrogate_patch_loss(model, windows, f, 1.0, 1.0);
      const auto ze = ct::naive_embedding(windows[f.window], model.scales[f.scale], model.layers[f.scale], f.variable, f.j);
      std::copy(ze.begin(), ze.end(), z.row(r).begin());
    }
    return normal / static_cast<double>(obj.normal_count) + cfg.weight * ct::naive_contrastive(z, labels, cfg.temperature);
  };
  EXPECT_NEAR(surrogate(), obj.value(1.0, 1.0, cfg.weight), 1e-9);
  EXPECT_LE(finite_diff_check(surrogate, model.tensors(), static_cast<const ModelParams&>(grads).tensors(), 1e-4), 1e-4);
}

TEST(TtaStep, DisabledIsANoOp) {
  Rig s = make_setup();
  const ModelParams before = s.model;
  TtaConfig cfg = s.config.tta;
  cfg.enabled = false;
  AdamW opt({.learning_rate = 0.1});
  const std::vector<Matrix> windows{slice_window(s.test, 0, 20)};
  tta_step(s.model, opt, windows, {forward_window(s.model, windows[0])}, s.activations, cfg, 1, 1);
  EXPECT_TRUE(same_params(before, s.model));
  EXPECT_EQ(opt.step_count(), 0u);
}

TEST(TtaStep, EmptyObjectiveIsANoOp) {
  Rig s = make_setup();
  const ModelParams before = s.model;
  TtaConfig cfg = s.config.tta;
  cfg.weight = 0.0;
  AdamW opt({.learning_rate = 0.1});
  const std::vector<Matrix> windows{slice_window(s.test, 0, 20)};
  tta_step(s.model, opt, windows, {forward_window(s.model, windows[0])}, ActivationSet(2), cfg, 1, 1);
  EXPECT_TRUE(same_params(before, s.model));
}

TEST(TtaStep, MovementBoundedByLearningRate) {
  Rig s = make_setup();
  const ModelParams before = s.model;
  const double lr = 1e-3;
  AdamW opt({.learning_rate = lr, .weight_decay = 5e-4});
  const std::vector<Matrix> windows{slice_window(s.test, 0, 20), slice_window(s.test, 20, 20)};
  std::vector<WindowPass> passes;
  for (const Matrix& w : windows) passes.push_back(forward_window(s.model, w));
  tta_step(s.model, opt, windows, passes, s.activations, s.config.tta, 1, 1);
  EXPECT_FALSE(same_params(before, s.model));
  const auto a = before.tensors();
  const auto b = s.model.tensors();
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i]->size(); ++j)
      EXPECT_LE(std::abs(a[i]->data()[j] - b[i]->data()[j]), lr * (1.0 + 5e-4 * std::abs(a[i]->data()[j])) + 1e-15);
}

TEST(Refresh, UnchangedCodebooksGiveIdenticalBank) {
  const Rig s = make_setup();
  const MemoryBank r = refresh_coreset(s.bank, s.model.codebooks);
  ASSERT_EQ(r.scales.size(), s.bank.scales.size());
  for (std::size_t k = 0; k < r.scales.size(); ++k) {
    EXPECT_EQ(r.scales[k].indices, s.bank.scales[k].indices);
    EXPECT_EQ(r.scales[k].vectors, s.bank.scales[k].vectors);
    EXPECT_EQ(r.scales[k].sigma, s.bank.scales[k].sigma);
  }
}

TEST(Refresh, TranslationShiftsEntriesAndKeepsSigma) {
  const Rig s = make_setup();
  std::vector<Codebook> shifted = s.model.codebooks;
  const std::vector<double> v{0.25, -1.5, 3.0, 0.125};
  for (auto& cb : shifted)
    for (std::size_t r = 0; r < cb.size(); ++r)
      for (std::size_t c = 0; c < 4; ++c) cb.entries(r, c) += v[c];
  const MemoryBank r = refresh_coreset(s.bank, shifted);
  EXPECT_EQ(r.size(), s.bank.size());
  for (std::size_t k = 0; k < r.scales.size(); ++k) {
    for (std::size_t i = 0; i < r.scales[k].indices.size(); ++i) {
      for (std::size_t c = 0; c < 4; ++c)
        EXPECT_NEAR(r.scales[k].vectors(i, c), s.bank.scales[k].vectors(i, c) + v[c], 1e-12);
      EXPECT_NEAR(r.scales[k].sigma[i], s.bank.scales[k].sigma[i], 1e-12);
    }
  }
}

TEST(Stream, OutOfOrderWindowsRejected) {
  const Rig s = make_setup();
  std::vector<StreamWindow> w = stream_of(s);
  std::swap(w[1], w[2]);
  EXPECT_THROW(stream_driver(w, s.model, s.bank, s.activations, s.config, s.test.rows()), OrderingError);
}

TEST(Stream, SingleBatchIdenticalWithAndWithoutAdaptation) {
  const Rig s = make_setup(40);
  RunConfig off = s.config;
  off.tta.enabled = false;
  const StreamResult on = stream_series(s.model, s.bank, s.activations, s.config, s.test);
  const StreamResult plain = stream_series(s.model, s.bank, s.activations, off, s.test);
  ASSERT_EQ(on.batches.size(), 1u);
  EXPECT_EQ(on.series, plain.series);
}

TEST(Stream, FirstBatchIdenticalLaterBatchesAdapt) {
  const Rig s = make_setup();
  RunConfig off = s.config;
  off.tta.enabled = false;
  const StreamResult on = stream_series(s.model, s.bank, s.activations, s.config, s.test);
  const StreamResult plain = stream_series(s.model, s.bank, s.activations, off, s.test);
  ASSERT_GE(on.batches.size(), 2u);
  for (std::size_t w = 0; w < on.batches[0].size(); ++w) {
    EXPECT_EQ(on.batches[0][w].memory, plain.batches[0][w].memory);
    EXPECT_EQ(on.batches[0][w].quant, plain.batches[0][w].quant);
  }
  EXPECT_NE(on.batches[1][0].quant, plain.batches[1][0].quant);
  EXPECT_FALSE(same_params(on.model, s.model));
  EXPECT_TRUE(same_params(plain.model, s.model));
}

TEST(Stream, ReplayIsBitIdentical) {
  const Rig s = make_setup();
  const StreamResult a = stream_series(s.model, s.bank, s.activations, s.config, s.test);
  const StreamResult b = stream_series(s.model, s.bank, s.activations, s.config, s.test);
  EXPECT_EQ(a.series, b.series);
  EXPECT_TRUE(same_params(a.model, b.model));
}

TEST(Stream, DisabledMatchesFrozenScoring) {
  const Rig s = make_setup();
  RunConfig off = s.config;
  off.tta.enabled = false;
  EXPECT_EQ(stream_series(s.model, s.bank, s.activations, off, s.test).series,
            score_series(s.model, s.bank, off, s.test));
}

TEST(Stream, TruncatedRunReproducesEachBatch) {
  const Rig s = make_setup();
  const std::vector<StreamWindow> all = stream_of(s);
  const StreamResult full = stream_driver(all, s.model, s.bank, s.activations, s.config, s.test.rows());
  const std::size_t B = s.config.tta.batch_windows;
  for (std::size_t i = 0; i < full.batches.size(); ++i) {
    const std::size_t prefix = std::min(all.size(), i * B);
    const std::size_t end = std::min(all.size(), prefix + B);
    // A stream cut after batch i reproduces batch i.
    std::span<const StreamWindow> cut(all.data(), end);
    const StreamResult truncated = stream_driver(cut, s.model, s.bank, s.activations, s.config,
                                                 all[end - 1].offset + s.config.window_length);
    ASSERT_EQ(truncated.batches.size(), i + 1);
    for (std::size_t w = 0; w < end - prefix; ++w) {
      EXPECT_EQ(truncated.batches[i][w].memory, full.batches[i][w].memory);
      EXPECT_EQ(truncated.batches[i][w].quant, full.batches[i][w].quant);
    }
    ModelParams model = s.model;
    MemoryBank bank = s.bank;
    // Hand-composed adaptation on batches before i, then scoring of batch i.
    AdamW opt({.learning_rate = *s.config.tta.learning_rate, .weight_decay = s.config.train.weight_decay});
    for (std::size_t b = 0; b < prefix; b += B) {
      std::vector<Matrix> windows;
      std::vector<WindowPass> passes;
      for (std::size_t w = b; w < std::min(prefix, b + B); ++w) {
        windows.push_back(all[w].values);
        passes.push_back(forward_window(model, all[w].values));
      }
      tta_step(model, opt, windows, passes, s.activations, s.config.tta, 1, 1);
      bank = refresh_coreset(bank, model.codebooks);
    }
    for (std::size_t w = prefix; w < end; ++w) {
      const WindowScores ws = score_window(model, bank, s.config.scoring, all[w].values, all[w].offset);
      EXPECT_EQ(ws.memory, full.batches[i][w - prefix].memory);
      EXPECT_EQ(ws.quant, full.batches[i][w - prefix].quant);
    }
  }
}
