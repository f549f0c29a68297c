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

// Experiment configuration as a JSON document. Every section is optional and
// falls back to the defaults below; an unknown key anywhere is a ConfigError.
//
//   {
//     "generator": {"image_size": 64, "object_shapes": [...], "attribute_styles": [...],
//                   "noise_std": 0.03, "samples_per_pair": 20, "test_samples_per_pair": 10, "seed": 0},
//     "split":     {"unseen_fraction": 0.2, "min_seen_per_element": 1, "seed": 0},
//     "model":     {"encoder": [[32, 2], [48, 2], [64, 2]], "classifier_hidden": -1,
//                   "attr_branch": "nonlocal", "obj_branch": "local", "use_reverse": true,
//                   "distill_mode": "reversal_teacher", "detach_teacher": true,
//                   "fusion_mode": "weighted_sum_product", "channel_bins": 4,
//                   "channel_reduction": 4, "freeze_encoder": false, "seed": 0},
//     "weights":   {"lambda1": 1.0, "lambda2": 1.0},
//     "fusion":    {"eta1": 0.1, "eta2": 0.3},
//     "epochs": 30, "batch_size": 64, "learning_rate": 5e-5, "eval_every": 5,
//     "num_biases": 50, "data_dir": "data", "output_dir": "runs", "seed": 0,
//     "ablation":  {"seeds": [0, 1, 2], "variants": []}
//   }
//
// The model's num_attributes and num_objects always follow the generator's
// vocabulary and are not accepted as keys.

#ifndef DRANET_CONFIG_HPP_
#define DRANET_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dranet/evaluation.hpp"
#include "dranet/model.hpp"
#include "dranet/objectives.hpp"
#include "dranet/synthetic.hpp"
#include "json.hpp"

namespace dranet {

inline constexpr double kDefaultLearningRate = 5e-5;

struct AblationSettings {
  std::vector<uint64_t> seeds = {0, 1, 2};
  std::vector<std::string> variants;  // empty runs the whole ladder

  bool operator==(const AblationSettings&) const = default;
};

struct ExperimentConfig {
  GeneratorConfig generator;
  SplitSpec split;
  ModelConfig model;
  LossWeights weights;
  FusionWeights fusion;
  int epochs = 30;
  int batch_size = 64;
  double learning_rate = kDefaultLearningRate;
  int eval_every = 5;  // epochs between test evaluations; the last epoch is always evaluated
  int num_biases = 50;
  std::string data_dir = "data";
  std::string output_dir = "runs";
  uint64_t seed = 0;  // batch order
  AblationSettings ablation;

  // Throws ConfigError.
  void Validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::ordered_json ToJson(const ModelConfig& config);
ModelConfig ModelConfigFromJson(const nlohmann::json& j);
nlohmann::ordered_json ToJson(const ExperimentConfig& config);
ExperimentConfig ExperimentConfigFromJson(const nlohmann::json& j);

// Throws ConfigError on unreadable files, malformed JSON and unknown keys.
ExperimentConfig LoadExperimentConfig(const std::filesystem::path& path);
void SaveExperimentConfig(const std::filesystem::path& path, const ExperimentConfig& config);

// Replaces the training seed and the model initialization seed. Dataset
// seeds are left alone so every run sees the same data.
void OverrideSeed(ExperimentConfig& config, uint64_t seed);

}  // namespace dranet

#endif  // DRANET_CONFIG_HPP_
