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

// Commands behind the dranet CLI. Each takes a parsed ExperimentConfig and
// writes its artifacts under an output directory; identical inputs produce
// identical files, except for the timestamp line of the training log.

#ifndef DRANET_EXPERIMENT_HPP_
#define DRANET_EXPERIMENT_HPP_

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dranet/config.hpp"
#include "dranet/evaluation.hpp"
#include "dranet/model.hpp"
#include "dranet/synthetic.hpp"

namespace dranet {

inline constexpr const char* kTrainLogName = "train_log.tsv";
inline constexpr const char* kFinalCheckpointName = "checkpoint_final.bin";
inline constexpr const char* kBestCheckpointName = "checkpoint_best.bin";
inline constexpr const char* kReportName = "report.json";
inline constexpr const char* kCurveName = "curve.csv";

// Fusion weights actually used at inference. Without the reverse loss the
// reversal classifiers are never trained, so their share is forced to zero.
FusionWeights EffectiveFusion(const ExperimentConfig& config);

// ---- generate ---------------------------------------------------------------
LoadedDataset RunGenerate(const ExperimentConfig& config, const std::filesystem::path& data_dir,
                          std::ostream& log);
// Loads data_dir/manifest.tsv; DataError when it does not exist.
LoadedDataset OpenDataset(const std::filesystem::path& data_dir);

// ---- train ------------------------------------------------------------------
struct TrainOutcome {
  ModelParams final_params;
  ModelParams best_params;
  Evaluation final_eval;  // of final_params
  Evaluation best_eval;   // of best_params
  std::vector<double> epoch_attr_loss;  // mean L_a per epoch
  int64_t steps = 0;
};

// Writes checkpoint_final.bin, checkpoint_best.bin (best HM over the periodic
// evaluations) and train_log.tsv into out_dir. With epochs == 0 both
// checkpoints hold the initial parameters. `progress` may be null.
TrainOutcome RunTrain(const ExperimentConfig& config, const LoadedDataset& dataset,
                      const std::filesystem::path& out_dir, std::ostream* progress);

// ---- eval -------------------------------------------------------------------
// Writes report.json and curve.csv into out_dir.
Evaluation RunEval(const ExperimentConfig& config, const LoadedDataset& dataset,
                   const std::filesystem::path& checkpoint, const std::filesystem::path& out_dir);

// ---- ablate -----------------------------------------------------------------
struct AblationVariant {
  std::string name;
  std::string description;
  // Config keys (dotted paths) this variant may change relative to the full
  // network.
  std::vector<std::string> changed_keys;
};

// base, anet, ranet, dranet, both_local, both_nonlocal, swap_a, anet_with_lr,
// fusion_product_sum, distill_n_oriented, distill_l_oriented.
const std::vector<AblationVariant>& AblationLadder();
// Throws ConfigError for an unknown name.
ExperimentConfig ApplyVariant(const ExperimentConfig& full, const std::string& name);
// Dotted paths of leaves whose values differ.
std::vector<std::string> ConfigDiff(const ExperimentConfig& a, const ExperimentConfig& b);

struct AblationRun {
  std::string variant;
  uint64_t seed = 0;
  MetricsReport report;
};

struct AblationSummary {
  std::string variant;
  MetricsReport mean;
  int runs = 0;
};

struct AblationResult {
  std::vector<AblationRun> runs;           // variant-major, seeds in config order
  std::vector<AblationSummary> summaries;  // ladder order
};

// Trains every selected variant for every seed on a private copy of the
// parameters; up to `jobs` runs proceed concurrently. Writes ablation.csv
// (means) and ablation_runs.csv (one row per run) into out_dir.
AblationResult RunAblate(const ExperimentConfig& config, const LoadedDataset& dataset,
                         const std::filesystem::path& out_dir, int jobs, std::ostream* progress);

// ---- sweep ------------------------------------------------------------------
struct SweepRow {
  double value = 0.0;
  MetricsReport report;
};

bool IsSweepParameter(const std::string& name);
// Values used when the caller gives none: {0, 0.5, 1, 2} for lambdas and
// 0, 0.1, ..., 1 for etas.
std::vector<double> DefaultSweepValues(const std::string& parameter);

// lambda1/lambda2 retrain per value. eta1/eta2 score the test split once
// with `checkpoint` (trained first from the config when absent) and only
// re-fuse per value. Writes sweep_<parameter>.csv into out_dir.
std::vector<SweepRow> RunSweep(const ExperimentConfig& config, const LoadedDataset& dataset,
                               const std::string& parameter, const std::vector<double>& values,
                               const std::optional<std::filesystem::path>& checkpoint,
                               const std::filesystem::path& out_dir, std::ostream* progress);

// ---- visualize --------------------------------------------------------------
struct VisualizeResult {
  std::vector<std::filesystem::path> files;
  int query_position = 0;             // flat index of the peak local-mask pixel
  std::vector<int> top_nonlocal_channels;
  std::vector<int> top_local_channels;
};

// Needs one non-local and one local branch. Writes, at input resolution:
//   local_mask / local_mask_reverse         local spatial mask and 1 - mask
//   nonlocal_row / nonlocal_row_reverse     non-local spatial attention row at the peak mask pixel
//   nonlocal_overlay / activation           channel means of the block output and of z
//   channel_nonlocal_k<i>_c<ch>             top-k channels by mean non-local channel attention
//   channel_local_k<i>_c<ch>                top-k channels by local channel mask
// each as <name>.png plus the unscaled <name>.arr.
VisualizeResult RunVisualize(const ExperimentConfig& config, const std::filesystem::path& checkpoint,
                             const std::filesystem::path& image_path, const std::filesystem::path& out_dir,
                             int top_k = 3);

}  // namespace dranet

#endif  // DRANET_EXPERIMENT_HPP_
