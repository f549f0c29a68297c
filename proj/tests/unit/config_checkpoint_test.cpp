/*
 * Copyright 2026 The DRANet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "../test_util.hpp"
#include "dranet/checkpoint.hpp"
#include "dranet/config.hpp"
#include "dranet/errors.hpp"
#include "dranet/heatmap.hpp"
#include "json.hpp"

namespace dranet {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- config ----------------------------------------------------------------

ExperimentConfig NonDefaultConfig() {
  ExperimentConfig c;
  c.generator.image_size = 32;
  c.generator.object_shapes = {"circle", "square", "bar"};
  c.generator.attribute_styles = {"red", "blue"};
  c.generator.noise_std = 0.01;
  c.generator.samples_per_pair = 4;
  c.generator.test_samples_per_pair = 3;
  c.split.unseen_fraction = 0.3;
  c.model.encoder = {{8, 2}, {16, 2}};
  c.model.num_attributes = 2;
  c.model.num_objects = 3;
  c.model.classifier_hidden = 0;
  c.model.attr_branch = BranchKind::kLocal;
  c.model.distill_mode = DistillMode::kLOriented;
  c.model.fusion_mode = FusionMode::kProductSum;
  c.model.channel_reduction = 2;
  c.model.seed = 17;
  c.weights.lambda1 = 0.25;
  c.fusion = {0.2, 0.6};
  c.epochs = 3;
  c.learning_rate = 1e-3;
  c.num_biases = 7;
  c.data_dir = "elsewhere";
  c.seed = 5;
  c.ablation.seeds = {4, 9};
  c.ablation.variants = {"base", "dranet"};
  return c;
}

TEST(ConfigTest, DefaultsValidate) {
  ExperimentConfig c;
  EXPECT_NO_THROW(c.Validate());
  EXPECT_EQ(c.learning_rate, kDefaultLearningRate);
  EXPECT_EQ(c.model.num_attributes, static_cast<int>(c.generator.attribute_styles.size()));
  EXPECT_EQ(c.model.num_objects, static_cast<int>(c.generator.object_shapes.size()));
}

TEST(ConfigTest, JsonRoundTrip) {
  const ExperimentConfig c = NonDefaultConfig();
  ASSERT_NO_THROW(c.Validate());
  const ExperimentConfig back = ExperimentConfigFromJson(json::parse(ToJson(c).dump()));
  EXPECT_EQ(back, c);

  const fs::path dir = testing::TempDir("config_rt");
  SaveExperimentConfig(dir / "c.json", c);
  EXPECT_EQ(LoadExperimentConfig(dir / "c.json"), c);
  fs::remove_all(dir);
}

TEST(ConfigTest, EmptyDocumentGivesDefaults) { EXPECT_EQ(ExperimentConfigFromJson(json::object()), ExperimentConfig()); }

TEST(ConfigTest, VocabularyFollowsGenerator) {
  const ExperimentConfig c =
      ExperimentConfigFromJson(json::parse(R"({"generator": {"object_shapes": ["circle", "bar"]}})"));
  EXPECT_EQ(c.model.num_objects, 2);
  EXPECT_EQ(c.model.num_attributes, 8);
}

TEST(ConfigTest, UnknownKeysAreRejected) {
  EXPECT_THROW(ExperimentConfigFromJson(json::parse(R"({"epoch": 3})")), ConfigError);
  EXPECT_THROW(ExperimentConfigFromJson(json::parse(R"({"model": {"hidden": 3}})")), ConfigError);
  EXPECT_THROW(ExperimentConfigFromJson(json::parse(R"({"model": {"num_objects": 3}})")), ConfigError);
  try {
    ExperimentConfigFromJson(json::parse(R"({"fusion": {"eta3": 0.1}})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("fusion.eta3"), std::string::npos) << e.what();
  }
}

TEST(ConfigTest, BadValuesAreRejected) {
  EXPECT_THROW(ExperimentConfigFromJson(json::parse(R"({"epochs": "many"})")), ConfigError);
  EXPECT_THROW(ExperimentConfigFromJson(json::parse(R"({"epochs": -1})")), ConfigError);
  EXPECT_THROW(ExperimentConfigFromJson(json::parse(R"({"batch_size": 0})")), ConfigError);
  EXPECT_THROW(ExperimentConfigFromJson(json::parse(R"({"fusion": {"eta1": 2}})")), ConfigError);
  EXPECT_THROW(ExperimentConfigFromJson(json::parse(R"({"model": {"attr_branch": "global"}})")), ConfigError);
  EXPECT_THROW(ExperimentConfigFromJson(json::parse(R"({"model": {"encoder": [[8]]}})")), ConfigError);
  EXPECT_THROW(ExperimentConfigFromJson(json::parse(R"({"generator": {"image_size": 60}})")), ConfigError);
  EXPECT_THROW(ExperimentConfigFromJson(json::parse(R"({"ablation": {"seeds": []}})")), ConfigError);
}

TEST(ConfigTest, MalformedFileIsConfigError) {
  const fs::path dir = testing::TempDir("config_bad");
  std::ofstream(dir / "bad.json") << "{\"epochs\": ";
  EXPECT_THROW(LoadExperimentConfig(dir / "bad.json"), ConfigError);
  EXPECT_THROW(LoadExperimentConfig(dir / "missing.json"), ConfigError);
  fs::remove_all(dir);
}

TEST(ConfigTest, OverrideSeedLeavesDataSeedsAlone) {
  ExperimentConfig c = NonDefaultConfig();
  const ExperimentConfig before = c;
  OverrideSeed(c, 42);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.model.seed, 42u);
  EXPECT_EQ(c.generator.seed, before.generator.seed);
  EXPECT_EQ(c.split.seed, before.split.seed);
}

// ---- checkpoint ------------------------------------------------------------

ModelConfig SmallModel() {
  ModelConfig c;
  c.encoder = {{4, 2}};
  c.num_attributes = 3;
  c.num_objects = 2;
  c.classifier_hidden = 5;
  c.seed = 8;
  return c;
}

// Independent 64-bit FNV-1a.
uint64_t Fnv(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string Reseal(std::string blob) {
  blob.resize(blob.size() - 8);
  const uint64_t h = Fnv(blob);
  for (int i = 0; i < 8; ++i) blob.push_back(static_cast<char>((h >> (8 * i)) & 0xff));
  return blob;
}

TEST(CheckpointTest, HashMatchesReference) {
  EXPECT_EQ(Fnv1a64("", 0), 0xcbf29ce484222325ULL);
  EXPECT_EQ(Fnv1a64("a", 1), 0xaf63dc4c8601ec8cULL);
  const std::string s = "dranet checkpoint";
  EXPECT_EQ(Fnv1a64(s.data(), s.size()), Fnv(s));
}

TEST(CheckpointTest, RoundTripIsFloatRounded) {
  const ModelConfig c = SmallModel();
  const ModelParams p = InitParams(c);
  const std::string blob = SerializeCheckpoint(p, c);
  EXPECT_EQ(blob.substr(0, 8), "DRANETCK");
  const Checkpoint ck = DeserializeCheckpoint(blob);
  EXPECT_EQ(ck.config, c);
  EXPECT_EQ(ck.params, RoundToFloat(p));
  for (const auto& e : ck.params.entries()) {
    const Tensor& orig = p.Get(e.name);
    for (int64_t i = 0; i < orig.size(); ++i)
      EXPECT_EQ(e.value[i], static_cast<double>(static_cast<float>(orig[i])));
  }
  EXPECT_EQ(SerializeCheckpoint(ck.params, ck.config), blob);

  const fs::path dir = testing::TempDir("ckpt_rt");
  SaveCheckpoint(dir / "a.bin", p, c);
  EXPECT_EQ(LoadCheckpoint(dir / "a.bin", c), RoundToFloat(p));
  fs::remove_all(dir);
}

TEST(CheckpointTest, CorruptionIsDataError) {
  const ModelConfig c = SmallModel();
  const std::string blob = SerializeCheckpoint(InitParams(c), c);

  std::string flipped = blob;
  flipped[blob.size() / 2] ^= 0x10;
  EXPECT_THROW(DeserializeCheckpoint(flipped), DataError);
  EXPECT_THROW(DeserializeCheckpoint(blob.substr(0, blob.size() - 3)), DataError);
  EXPECT_THROW(DeserializeCheckpoint("DRA"), DataError);

  std::string magic = blob;
  magic[0] = 'X';
  EXPECT_THROW(DeserializeCheckpoint(magic), DataError);
  EXPECT_THROW(DeserializeCheckpoint(Reseal(magic)), DataError);

  std::string version = blob;
  version[8] = 9;
  EXPECT_THROW(DeserializeCheckpoint(Reseal(version)), DataError);

  std::string trailing = blob.substr(0, blob.size() - 8) + "xyz" + blob.substr(blob.size() - 8);
  EXPECT_THROW(DeserializeCheckpoint(Reseal(trailing)), DataError);

  std::string truncated = blob.substr(0, blob.size() - 8 - 4) + blob.substr(blob.size() - 8);
  EXPECT_THROW(DeserializeCheckpoint(Reseal(truncated)), DataError);
}

TEST(CheckpointTest, MismatchedConfigIsConfigError) {
  const ModelConfig c = SmallModel();
  const fs::path dir = testing::TempDir("ckpt_cfg");
  SaveCheckpoint(dir / "a.bin", InitParams(c), c);
  ModelConfig other = c;
  other.classifier_hidden = 7;
  EXPECT_THROW(LoadCheckpoint(dir / "a.bin", other), ConfigError);
  EXPECT_THROW(LoadCheckpoint(dir / "missing.bin"), DataError);
  fs::remove_all(dir);
}

TEST(CheckpointTest, ParamsNotFittingEmbeddedConfigIsConfigError) {
  const ModelConfig c = SmallModel();
  ModelConfig other = c;
  other.num_objects = 4;
  EXPECT_THROW(DeserializeCheckpoint(SerializeCheckpoint(InitParams(other), c)), ConfigError);
}

TEST(CheckpointTest, RefusesNonFiniteValues) {
  const ModelConfig c = SmallModel();
  ModelParams p = InitParams(c);
  p.entries().front().value[0] = NAN;
  EXPECT_THROW(SerializeCheckpoint(p, c), NumericError);
}

// ---- heatmaps and raw arrays ----------------------------------------------

TEST(HeatmapTest, AbsoluteScaleClampsAndRounds) {
  const Tensor m({1, 4}, {-0.5, 0.0, 0.5, 2.0});
  const Image8 img = Heatmap(m, 1, 4, HeatmapScale::kAbsolute);
  EXPECT_EQ(img.channels, 1);
  EXPECT_EQ(img.pixels, (std::vector<uint8_t>{0, 0, 128, 255}));
}

TEST(HeatmapTest, NormalizedScaleAndNearestUpsampling) {
  const Tensor m({2, 2}, {1.0, 2.0, 3.0, 5.0});
  const Image8 img = Heatmap(m, 4, 4, HeatmapScale::kNormalized);
  ASSERT_EQ(img.pixels.size(), 16u);
  const uint8_t v00 = 0, v01 = 64, v10 = 128, v11 = 255;
  const std::vector<uint8_t> expected = {v00, v00, v01, v01, v00, v00, v01, v01,
                                         v10, v10, v11, v11, v10, v10, v11, v11};
  EXPECT_EQ(img.pixels, expected);
  const Image8 flat = Heatmap(Tensor({2, 3}, 0.7), 2, 3, HeatmapScale::kNormalized);
  for (uint8_t v : flat.pixels) EXPECT_EQ(v, 0);
}

TEST(HeatmapTest, RejectsBadInput) {
  EXPECT_THROW(Heatmap(Tensor({4}), 2, 2, HeatmapScale::kAbsolute), DomainError);
  EXPECT_THROW(Heatmap(Tensor({2, 2}), 0, 2, HeatmapScale::kAbsolute), DomainError);
  EXPECT_THROW(Heatmap(Tensor({1, 1}, NAN), 2, 2, HeatmapScale::kAbsolute), NumericError);
}

TEST(RawArrayTest, RoundTrip) {
  const fs::path dir = testing::TempDir("raw_array");
  const Tensor t({2, 3}, {0.5, -1.25, 3.0, 0.1, 7.0, -0.0});
  WriteRawArray(dir / "a.arr", t);
  const Tensor back = ReadRawArray(dir / "a.arr");
  ASSERT_EQ(back.shape(), t.shape());
  for (int64_t i = 0; i < t.size(); ++i) EXPECT_EQ(back[i], static_cast<double>(static_cast<float>(t[i])));
  EXPECT_EQ(fs::file_size(dir / "a.arr"), 4u + 4u + 8u + 24u);
  std::ofstream(dir / "bad.arr") << "ARR0";
  EXPECT_THROW(ReadRawArray(dir / "bad.arr"), DataError);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace dranet
