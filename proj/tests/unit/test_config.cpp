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

#include <fstream>

#include <gtest/gtest.h>

#include "comet/config.hpp"
#include "comet/error.hpp"
#include "oracles.hpp"

using namespace comet;

namespace {

std::string config_error(const RunConfig& c) {
  try {
    c.validate();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(RunConfig, DefaultsAreValid) {
  const RunConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.scales, (std::vector<ScaleSpec>{{2, 1}, {4, 2}, {6, 3}}));
  EXPECT_EQ(c.embed, 128u);
  EXPECT_EQ(c.core, 64u);
  EXPECT_EQ(c.codebook, 128u);
  EXPECT_EQ(c.window_length, 100u);
  EXPECT_EQ(c.window_stride, 50u);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.train.epochs, 20u);
  EXPECT_EQ(c.train.batch_size, 128u);
  EXPECT_EQ(c.train.learning_rate, 1e-4);
  EXPECT_EQ(c.train.weight_decay, 5e-4);
  EXPECT_EQ(c.train.validation_fraction, 0.1);
  EXPECT_EQ(c.scoring.neighbors, 10u);
  EXPECT_EQ(c.scoring.density_neighbors, 10u);
  EXPECT_EQ(c.scoring.lambda, 0.5);
  EXPECT_EQ(c.scoring.ema_momentum, 0.75);
  EXPECT_EQ(c.scoring.selection.percentile, 75.0);
  EXPECT_FALSE(c.tta.enabled);
  EXPECT_EQ(c.tta.weight, 1.0);
  EXPECT_EQ(c.tta.temperature, 0.1);
  EXPECT_EQ(c.tta.steps_per_batch, 1u);
}

TEST(RunConfig, FieldLevelMessages) {
  RunConfig c;
  c.embed = 7;
  EXPECT_NE(config_error(c).find("embed"), std::string::npos);
  c = RunConfig{};
  c.train.validation_fraction = 1.0;
  EXPECT_NE(config_error(c).find("validation_fraction"), std::string::npos);
  c = RunConfig{};
  c.train.epochs = 0;
  EXPECT_NE(config_error(c).find("epochs"), std::string::npos);
  c = RunConfig{};
  c.scales = {{6, 3}, {2, 4}};
  EXPECT_NE(config_error(c).find("scales"), std::string::npos);
  c = RunConfig{};
  c.scales = {{200, 1}};
  EXPECT_NE(config_error(c).find("scales"), std::string::npos);
  c = RunConfig{};
  c.scoring.lambda = 1.5;
  EXPECT_NE(config_error(c).find("lambda"), std::string::npos);
  c = RunConfig{};
  c.tta.temperature = 0.0;
  EXPECT_NE(config_error(c).find("temperature"), std::string::npos);
}

TEST(Presets, TableValues) {
  const std::vector<std::tuple<std::string, std::size_t, std::size_t>> table{
      {"psm", 128, 256}, {"swat", 256, 256}, {"smap", 128, 128}, {"msl", 256, 128}, {"WADI", 32, 64}};
  for (const auto& [name, m, d] : table) {
    RunConfig c;
    apply_preset(c, name);
    EXPECT_EQ(c.codebook, m) << name;
    EXPECT_EQ(c.embed, d) << name;
  }
  RunConfig c;
  EXPECT_THROW(apply_preset(c, "kdd"), ConfigError);
}

TEST(ConfigJson, RoundTripAndOverrides) {
  RunConfig c;
  c.scales = {{6, 3}};
  c.scoring.local_scaling = false;
  c.scoring.selection.mode = SelectionMode::kBudget;
  c.scoring.selection.budget = 2;
  c.tta.enabled = true;
  c.tta.learning_rate = 3e-4;
  const nlohmann::json j = to_json(c);
  EXPECT_EQ(to_json(config_from_json(j)), j);

  const RunConfig p = config_from_json(nlohmann::json{{"preset", "msl"}, {"embed", 64}});
  EXPECT_EQ(p.codebook, 256u);
  EXPECT_EQ(p.embed, 64u);
  EXPECT_EQ(p.preset, "msl");
}

TEST(ConfigJson, UnknownKeysAndBadTypesRejected) {
  EXPECT_THROW(config_from_json(nlohmann::json{{"embedd", 8}}), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"train", {{"epoch", 3}}}}), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"embed", "big"}}), ConfigError);
}

TEST(ConfigJson, LoadFromFile) {
  comet::testing::TempDir dir;
  std::ofstream(dir.file("c.json")) << R"({"embed": 16, "scoring": {"neighbors": 3}})";
  const RunConfig c = load_config(dir.file("c.json"));
  EXPECT_EQ(c.embed, 16u);
  EXPECT_EQ(c.scoring.neighbors, 3u);
  std::ofstream(dir.file("bad.json")) << "{not json";
  EXPECT_THROW(load_config(dir.file("bad.json")), ConfigError);
  EXPECT_THROW(load_config(dir.file("missing.json")), Error);
}
