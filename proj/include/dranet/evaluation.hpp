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

// Open-world scoring over every attribute-object pair and the calibrated
// seen/unseen evaluation.
//
// A bias b is added to the score of every seen pair. Sweeping b trades seen
// accuracy for unseen accuracy; S, U, HM and AUC summarize that curve.

#ifndef DRANET_EVALUATION_HPP_
#define DRANET_EVALUATION_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dranet/core_types.hpp"
#include "dranet/model.hpp"
#include "dranet/synthetic.hpp"

namespace dranet {

struct FusionWeights {
  double eta1 = 0.1;  // share of the attribute reversal classifier
  double eta2 = 0.3;  // share of the object reversal classifier

  void Validate() const;
  bool operator==(const FusionWeights&) const = default;
};

// Scores of one batch, (B, |A|*|O|) laid out by pair id.
//   weighted_sum_product: [(1-eta1) p_ac + eta1 p_rac](a) * [(1-eta2) p_oc + eta2 p_roc](o)
//   product_sum:          p_ac(a) p_oc(o) + p_rac(a) p_roc(o)
Tensor FusePredictions(const ModelOutputs& outputs, const FusionWeights& weights, FusionMode mode);

struct ScoreMatrix {
  int num_attributes = 0;
  int num_objects = 0;
  std::vector<double> scores;     // rows x num_pairs, row-major
  std::vector<uint8_t> seen_mask;  // per pair id
  std::vector<CompositionLabel> truth;

  int num_pairs() const { return num_attributes * num_objects; }
  int64_t rows() const { return static_cast<int64_t>(truth.size()); }
  double at(int64_t row, int pair) const { return scores[row * num_pairs() + pair]; }
  // Throws DomainError on inconsistent sizes, non-finite scores or labels
  // outside the vocabulary.
  void Validate() const;
};

ScoreMatrix MakeScoreMatrix(const Tensor& scores, const std::vector<CompositionLabel>& truth,
                            const DatasetSplit& split, int num_attributes, int num_objects);

// Everything the sweep and metrics need from one score row.
struct SampleSummary {
  int truth_pair = 0;
  bool truth_seen = false;
  CompositionLabel truth;
  double best_seen = 0.0;
  int best_seen_pair = -1;  // -1 when no pair is seen
  double best_unseen = 0.0;
  int best_unseen_pair = -1;
  int attr_pred = 0;  // argmax of the row summed over objects
  int obj_pred = 0;   // argmax of the row summed over attributes

  // Pair predicted under bias b; ties resolve to the lower pair id.
  int Predict(double bias) const;
};

std::vector<SampleSummary> Summarize(const ScoreMatrix& scores);

struct CurvePoint {
  double bias = 0.0;
  double seen_acc = 0.0;
  double unseen_acc = 0.0;
};

struct EvaluationCurve {
  std::vector<CurvePoint> points;  // ascending in bias
};

// Candidate biases are num_biases quantiles of the margin
// best_unseen - best_seen over unseen-truth samples, plus a low and a high
// sentinel. The sentinels are finite, one unit beyond the score range, so they
// force every prediction into unseen (low) or seen (high) pairs.
// Throws DomainError when either the seen-truth or the unseen-truth subset is
// empty, or num_biases < 1.
EvaluationCurve CalibrationSweep(const ScoreMatrix& scores, int num_biases);
EvaluationCurve CalibrationSweep(const std::vector<SampleSummary>& samples, int num_biases);

struct MetricsReport {
  double S = 0.0;
  double U = 0.0;
  double HM = 0.0;
  double AUC = 0.0;
  double attr_top1 = 0.0;
  double obj_top1 = 0.0;

  bool operator==(const MetricsReport&) const = default;
};

// S, U, HM from the curve alone.
MetricsReport CurveMetrics(const EvaluationCurve& curve);
// Trapezoidal area of unseen_acc over seen_acc. Points are sorted by seen_acc
// and a repeated seen_acc keeps its largest unseen_acc.
double CurveArea(const EvaluationCurve& curve);
MetricsReport ComputeMetrics(const EvaluationCurve& curve, const ScoreMatrix& scores);
MetricsReport ComputeMetrics(const EvaluationCurve& curve, const std::vector<SampleSummary>& samples);

struct Evaluation {
  MetricsReport report;
  EvaluationCurve curve;
};

// Scores the test split in batches of batch_size, so memory stays
// O(batch_size * |A| * |O|).
Evaluation EvaluateModel(const ModelParams& params, const ModelConfig& config, const LoadedDataset& dataset,
                         const FusionWeights& fusion, int num_biases, int batch_size = 64);

// Logits for the whole test split, concatenated in split order. Only the four
// logit arrays are filled. Fusion weights act after this step, so a sweep over
// eta reuses one call.
ModelOutputs ScoreTestSet(const ModelParams& params, const ModelConfig& config, const LoadedDataset& dataset,
                          int batch_size = 64);
Evaluation EvaluateOutputs(const ModelOutputs& outputs, const std::vector<CompositionLabel>& truth,
                           const DatasetSplit& split, const FusionWeights& fusion, FusionMode mode,
                           int num_biases);

std::string ReportToJson(const MetricsReport& report, int num_biases, const FusionWeights& fusion,
                         FusionMode mode);
std::string CurveToCsv(const EvaluationCurve& curve);

}  // namespace dranet

#endif  // DRANET_EVALUATION_HPP_
