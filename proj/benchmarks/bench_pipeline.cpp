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

#include <benchmark/benchmark.h>

#include "comet/data.hpp"
#include "comet/objective.hpp"
#include "comet/scoring.hpp"
#include "comet/train.hpp"
#include "comet/tta.hpp"

using namespace comet;

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

ModelParams default_model(std::size_t variables, std::size_t embed, std::size_t codebook) {
  Rng rng(42);
  const RunConfig c;
  return ModelParams::init({variables, embed, embed / 2, codebook}, c.scales, rng);
}

// Nearest-entry search; args: M, d.
void BM_Quantize(benchmark::State& state) {
  Rng rng(1);
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  const Codebook cb = init_codebook(0, m, d, rng);
  const Matrix queries = gaussian(256, d, rng);
  std::size_t r = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(quantize(queries.row(r++ % 256), cb));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Quantize)->Args({32, 64})->Args({128, 128})->Args({256, 256});

// Encode and quantize one 100-step window at three scales; arg: D.
void BM_ForwardWindow(benchmark::State& state) {
  const auto D = static_cast<std::size_t>(state.range(0));
  const ModelParams model = default_model(D, 128, 128);
  Rng rng(2);
  const Matrix window = gaussian(100, D, rng);
  for (auto _ : state) benchmark::DoNotOptimize(forward_window(model, window));
}
BENCHMARK(BM_ForwardWindow)->Arg(2)->Arg(8)->Arg(25);

// Memory and quantization scores of one window against a trained bank.
void BM_ScoreWindow(benchmark::State& state) {
  const Dataset d = standardize(synthesize(default_synthetic_spec(42)));
  RunConfig c;
  c.train.epochs = 1;
  const Checkpoint ck = train(d.train.values, c).checkpoint;
  const Matrix window = slice_window(d.test.values, 0, c.window_length);
  for (auto _ : state) benchmark::DoNotOptimize(score_window(ck.model, ck.bank, c.scoring, window, 0));
  state.counters["bank"] = static_cast<double>(ck.bank.size());
}
BENCHMARK(BM_ScoreWindow)->Unit(benchmark::kMillisecond);

// One optimizer step on a batch of windows; arg: batch size.
void BM_TrainStep(benchmark::State& state) {
  ModelParams model = default_model(2, 128, 128);
  Rng rng(3);
  std::vector<Matrix> batch;
  for (int64_t i = 0; i < state.range(0); ++i) batch.push_back(gaussian(100, 2, rng));
  AdamW opt({.learning_rate = 1e-4, .weight_decay = 5e-4});
  for (auto _ : state) benchmark::DoNotOptimize(train_step(model, opt, batch, 1.0, 1.0));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainStep)->Arg(16)->Arg(128)->Unit(benchmark::kMillisecond);

// Supervised contrastive loss and gradient; arg: rows.
void BM_Contrastive(benchmark::State& state) {
  Rng rng(4);
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix z = gaussian(n, 128, rng);
  std::vector<int> labels(n);
  for (int& l : labels) l = static_cast<int>(rng.below(2));
  for (auto _ : state) benchmark::DoNotOptimize(contrastive_loss(z, labels, 0.1));
}
BENCHMARK(BM_Contrastive)->Arg(64)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
