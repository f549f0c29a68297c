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

#ifndef DRANET_MODEL_HPP_
#define DRANET_MODEL_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "dranet/attention.hpp"
#include "dranet/autograd.hpp"
#include "dranet/core_types.hpp"
#include "dranet/params.hpp"

namespace dranet {

enum class BranchKind { kNonLocal, kLocal, kNone };
enum class DistillMode { kOff, kReversalTeacher, kNOriented, kLOriented };
enum class FusionMode { kWeightedSumProduct, kProductSum };

const char* ToString(BranchKind kind);
const char* ToString(DistillMode mode);
const char* ToString(FusionMode mode);
BranchKind ParseBranchKind(const std::string& s);
DistillMode ParseDistillMode(const std::string& s);
FusionMode ParseFusionMode(const std::string& s);

struct EncoderStage {
  int out_channels = 0;
  int stride = 1;

  bool operator==(const EncoderStage&) const = default;
};

// The defaults describe the full network. Base Model is attr_branch =
// obj_branch = kNone with use_reverse = false and distill_mode = kOff.
struct ModelConfig {
  std::vector<EncoderStage> encoder = {{32, 2}, {48, 2}, {64, 2}};
  int num_attributes = 8;
  int num_objects = 8;
  // Hidden width of the two-layer classifiers; 0 means a single affine layer
  // and -1 picks 2C.
  int classifier_hidden = -1;
  BranchKind attr_branch = BranchKind::kNonLocal;
  BranchKind obj_branch = BranchKind::kLocal;
  bool use_reverse = true;
  DistillMode distill_mode = DistillMode::kReversalTeacher;
  // Teachers of the distillation term receive no gradient from it.
  bool detach_teacher = true;
  FusionMode fusion_mode = FusionMode::kWeightedSumProduct;
  int channel_bins = 4;       // m, descriptor bins of the non-local channel block
  int channel_reduction = 4;  // r of the local channel block
  bool freeze_encoder = false;
  uint64_t seed = 0;

  int channels() const;  // C, width of the last encoder stage
  int hidden_width() const;
  int total_stride() const;
  void Validate() const;

  bool operator==(const ModelConfig&) const = default;
};

using ModelParams = ParamStore;

// Deterministic in config.seed. alpha and beta start at exactly zero; other
// weights are zero-mean Gaussians scaled by fan-in; biases are zero.
ModelParams InitParams(const ModelConfig& config);

// Throws ConfigError unless params has exactly the names and shapes that
// InitParams(config) produces.
void ValidateParams(const ModelParams& params, const ModelConfig& config);

// (B, 3, S, S) -> (B, C, S/stride, S/stride).
Tensor Encode(const ImageBatch& images, const ModelParams& params, const ModelConfig& config);

struct ModelOutputs {
  Tensor attr_logits;      // (B, |A|)  f_ac(e_n)
  Tensor obj_logits;       // (B, |O|)  f_oc(e_l)
  Tensor rev_attr_logits;  // (B, |A|)  f_rac(e_rl)
  Tensor rev_obj_logits;   // (B, |O|)  f_roc(e_rn)
  Tensor e_n, e_l, e_rn, e_rl;  // (B, 2C) each
};

ModelOutputs Forward(const ImageBatch& images, const ModelParams& params, const ModelConfig& config);
ModelOutputs Forward(const Tensor& images, const ModelParams& params, const ModelConfig& config);

namespace graph {

struct BranchVars {
  ag::Var embedding;           // (B, 2C)
  ag::Var reversed_embedding;  // (B, 2C)
  BlockVars spatial;           // unset for kNone
  BlockVars channel;
};

struct ForwardVars {
  ag::Var feature_map;
  BranchVars attr_branch, obj_branch;
  ag::Var attr_logits, obj_logits, rev_attr_logits, rev_obj_logits;
};

ag::Var EncodeGraph(ag::Graph& g, ag::Var images, const BoundParams& params, const ModelConfig& config);
ForwardVars ForwardGraph(ag::Graph& g, ag::Var images, const BoundParams& params, const ModelConfig& config);

}  // namespace graph
}  // namespace dranet

#endif  // DRANET_MODEL_HPP_
