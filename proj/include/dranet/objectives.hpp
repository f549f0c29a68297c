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

// Training objective:
//
//   L = L_a + L_o + lambda1 * L_r + lambda2 * L_d
//
// L_a, L_o   cross-entropy of f_ac(e_n) and f_oc(e_l)
// L_r        cross-entropy of f_roc(e_rn) on objects plus f_rac(e_rl) on attributes
// L_d        KL(student || teacher) summed over two classifier pairs; in the
//            default mode the reversal classifiers teach.
//
// Every term is a batch mean.

#ifndef DRANET_OBJECTIVES_HPP_
#define DRANET_OBJECTIVES_HPP_

#include <cstdint>
#include <span>

#include "dranet/autograd.hpp"
#include "dranet/core_types.hpp"
#include "dranet/model.hpp"

namespace dranet {

struct LossWeights {
  double lambda1 = 1.0;  // reverse loss
  double lambda2 = 1.0;  // distillation loss

  void Validate() const;
  bool operator==(const LossWeights&) const = default;
};

struct LossBreakdown {
  double attr = 0.0;
  double obj = 0.0;
  double reverse = 0.0;
  double distill = 0.0;
  double total = 0.0;
};

double AttrLoss(const ModelOutputs& outputs, std::span<const CompositionLabel> labels);
double ObjLoss(const ModelOutputs& outputs, std::span<const CompositionLabel> labels);
double ReverseLoss(const ModelOutputs& outputs, std::span<const CompositionLabel> labels);
// kOff yields 0.
double DistillLoss(const ModelOutputs& outputs, DistillMode mode);
// Terms disabled by the config (use_reverse, distill_mode) are reported as 0
// and left out of the total.
LossBreakdown TotalLoss(const ModelOutputs& outputs, std::span<const CompositionLabel> labels,
                        const LossWeights& weights, const ModelConfig& config);

namespace graph {

struct LossVars {
  ag::Var attr, obj, reverse, distill, total;  // reverse/distill unset when disabled
};

struct LogitVars {
  ag::Var attr, obj, rev_attr, rev_obj;
};

LossVars LossGraph(ag::Graph& g, const LogitVars& logits, std::span<const CompositionLabel> labels,
                   const LossWeights& weights, const ModelConfig& config);
ag::Var DistillGraph(ag::Graph& g, const LogitVars& logits, DistillMode mode, bool detach_teacher);

}  // namespace graph

struct AdamOptions {
  double learning_rate = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  int64_t step = 0;
  ParamStore first_moment;
  ParamStore second_moment;
};

struct Gradients {
  LossBreakdown losses;
  ParamStore grads;  // same names and shapes as the parameters
};

// Loss and its gradient with respect to every parameter.
Gradients ComputeGradients(const ModelParams& params, const ImageBatch& batch, const LossWeights& weights,
                           const ModelConfig& config);

// One Adam update of every trainable parameter (the encoder is skipped when
// config.freeze_encoder). Returns the loss at the pre-update parameters.
// Throws NumericError naming the first parameter with a non-finite gradient.
LossBreakdown TrainStep(ModelParams& params, const ImageBatch& batch, const LossWeights& weights,
                        const ModelConfig& config, const AdamOptions& options, OptimizerState& state);

}  // namespace dranet

#endif  // DRANET_OBJECTIVES_HPP_
