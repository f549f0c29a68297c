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

#include "dranet/model.hpp"

#include "dranet/errors.hpp"
#include "dranet/random.hpp"

namespace dranet {
namespace {

using ag::Var;

std::string BranchPrefix(const char* branch, const char* block) {
  return std::string(branch) + "." + block + ".";
}

void AddBranch(ParamStore& store, const char* branch, BranchKind kind, const ModelConfig& config, Rng& rng) {
  const int c = config.channels();
  switch (kind) {
    case BranchKind::kNonLocal:
      NonLocalSpatialParams::Init(c, rng).AddTo(store, BranchPrefix(branch, "nsm"));
      NonLocalChannelParams::Init(c, config.channel_bins, rng).AddTo(store, BranchPrefix(branch, "ncm"));
      break;
    case BranchKind::kLocal:
      LocalSpatialParams::Init(c, rng).AddTo(store, BranchPrefix(branch, "lsm"));
      LocalChannelParams::Init(c, config.channel_reduction, rng).AddTo(store, BranchPrefix(branch, "lcm"));
      break;
    case BranchKind::kNone:
      store.Add(std::string(branch) + ".proj.weight", FanInNormal({c, c}, c, 1.0, rng));
      store.Add(std::string(branch) + ".proj.bias", Tensor({c}));
      break;
  }
}

void AddClassifier(ParamStore& store, const std::string& name, int classes, const ModelConfig& config, Rng& rng) {
  const int in = 2 * config.channels();
  const int hidden = config.hidden_width();
  if (hidden == 0) {
    store.Add(name + ".fc.weight", FanInNormal({classes, in}, in, 1.0, rng));
    store.Add(name + ".fc.bias", Tensor({classes}));
    return;
  }
  store.Add(name + ".fc1.weight", FanInNormal({hidden, in}, in, 2.0, rng));
  store.Add(name + ".fc1.bias", Tensor({hidden}));
  store.Add(name + ".fc2.weight", FanInNormal({classes, hidden}, hidden, 1.0, rng));
  store.Add(name + ".fc2.bias", Tensor({classes}));
}

Var Classify(ag::Graph& g, Var x, const BoundParams& params, const std::string& name, const ModelConfig& config) {
  if (config.hidden_width() == 0) return ag::Linear(g, x, params(name + ".fc.weight"), params(name + ".fc.bias"));
  const Var h = ag::Relu(g, ag::Linear(g, x, params(name + ".fc1.weight"), params(name + ".fc1.bias")));
  return ag::Linear(g, h, params(name + ".fc2.weight"), params(name + ".fc2.bias"));
}

graph::BranchVars Branch(ag::Graph& g, Var z, const BoundParams& params, const char* branch, BranchKind kind,
                         const ModelConfig& config) {
  graph::BranchVars out;
  switch (kind) {
    case BranchKind::kNonLocal: {
      out.spatial = graph::NonLocalSpatial(g, z, params, BranchPrefix(branch, "nsm"));
      int side = 1;
      while (side * side < config.channel_bins) ++side;
      out.channel = graph::NonLocalChannel(g, z, params, BranchPrefix(branch, "ncm"), side);
      break;
    }
    case BranchKind::kLocal:
      out.spatial = graph::LocalSpatial(g, z, params, BranchPrefix(branch, "lsm"));
      out.channel = graph::LocalChannel(g, z, params, BranchPrefix(branch, "lcm"));
      break;
    case BranchKind::kNone: {
      // Attention-free: [GAP(z); proj(GAP(z))] keeps the classifier input at 2C.
      const Var gap = ag::GlobalAvgPool(g, z);
      const Var proj = ag::Linear(g, gap, params(std::string(branch) + ".proj.weight"),
                                  params(std::string(branch) + ".proj.bias"));
      out.embedding = ag::ConcatLast(g, gap, proj);
      out.reversed_embedding = out.embedding;
      return out;
    }
  }
  out.embedding = ag::ConcatLast(g, out.spatial.embedding, out.channel.embedding);
  out.reversed_embedding = ag::ConcatLast(g, out.spatial.reversed_embedding, out.channel.reversed_embedding);
  return out;
}

}  // namespace

const char* ToString(BranchKind kind) {
  switch (kind) {
    case BranchKind::kNonLocal: return "nonlocal";
    case BranchKind::kLocal: return "local";
    case BranchKind::kNone: return "none";
  }
  return "?";
}

const char* ToString(DistillMode mode) {
  switch (mode) {
    case DistillMode::kOff: return "off";
    case DistillMode::kReversalTeacher: return "reversal_teacher";
    case DistillMode::kNOriented: return "n_oriented";
    case DistillMode::kLOriented: return "l_oriented";
  }
  return "?";
}

const char* ToString(FusionMode mode) {
  switch (mode) {
    case FusionMode::kWeightedSumProduct: return "weighted_sum_product";
    case FusionMode::kProductSum: return "product_sum";
  }
  return "?";
}

BranchKind ParseBranchKind(const std::string& s) {
  for (BranchKind k : {BranchKind::kNonLocal, BranchKind::kLocal, BranchKind::kNone}) {
    if (s == ToString(k)) return k;
  }
  throw ConfigError("unknown branch kind '" + s + "' (expected nonlocal, local or none)");
}

DistillMode ParseDistillMode(const std::string& s) {
  for (DistillMode m : {DistillMode::kOff, DistillMode::kReversalTeacher, DistillMode::kNOriented,
                        DistillMode::kLOriented}) {
    if (s == ToString(m)) return m;
  }
  throw ConfigError("unknown distill mode '" + s + "'");
}

FusionMode ParseFusionMode(const std::string& s) {
  for (FusionMode m : {FusionMode::kWeightedSumProduct, FusionMode::kProductSum}) {
    if (s == ToString(m)) return m;
  }
  throw ConfigError("unknown fusion mode '" + s + "'");
}

int ModelConfig::channels() const {
  if (encoder.empty()) throw ConfigError("model.encoder must have at least one stage");
  return encoder.back().out_channels;
}

int ModelConfig::hidden_width() const { return classifier_hidden < 0 ? 2 * channels() : classifier_hidden; }

int ModelConfig::total_stride() const {
  int s = 1;
  for (const auto& st : encoder) s *= st.stride;
  return s;
}

void ModelConfig::Validate() const {
  if (encoder.empty()) throw ConfigError("model.encoder must have at least one stage");
  for (const auto& st : encoder) {
    if (st.out_channels < 1 || st.stride < 1) throw ConfigError("encoder stages need positive width and stride");
  }
  if (num_attributes < 1 || num_objects < 1) throw ConfigError("vocabulary sizes must be positive");
  if (classifier_hidden < -1) throw ConfigError("model.classifier_hidden must be >= -1");
  if (channel_reduction < 1 || channels() / channel_reduction < 1) {
    throw ConfigError("model.channel_reduction must satisfy C/r >= 1");
  }
  int side = 1;
  while (side * side < channel_bins) ++side;
  if (channel_bins < 1 || side * side != channel_bins) throw ConfigError("model.channel_bins must be a square number");
}

ModelParams InitParams(const ModelConfig& config) {
  config.Validate();
  Rng rng(DeriveSeed({config.seed, 0x696e6974ULL}));
  ParamStore store;
  int in = 3;
  for (size_t i = 0; i < config.encoder.size(); ++i) {
    const int out = config.encoder[i].out_channels;
    const std::string name = "encoder." + std::to_string(i);
    store.Add(name + ".weight", FanInNormal({out, in, 3, 3}, in * 9, 2.0, rng));
    store.Add(name + ".bias", Tensor({out}));
    in = out;
  }
  AddBranch(store, "attr", config.attr_branch, config, rng);
  AddBranch(store, "obj", config.obj_branch, config, rng);
  AddClassifier(store, "cls.attr", config.num_attributes, config, rng);
  AddClassifier(store, "cls.obj", config.num_objects, config, rng);
  AddClassifier(store, "cls.rev_attr", config.num_attributes, config, rng);
  AddClassifier(store, "cls.rev_obj", config.num_objects, config, rng);
  return store;
}

void ValidateParams(const ModelParams& params, const ModelConfig& config) {
  const ModelParams expected = InitParams(config);
  if (params.size() != expected.size()) {
    throw ConfigError("parameter count " + std::to_string(params.size()) + " does not match config (" +
                      std::to_string(expected.size()) + ")");
  }
  for (size_t i = 0; i < expected.size(); ++i) {
    const auto& e = expected.entries()[i];
    const auto& p = params.entries()[i];
    if (p.name != e.name) throw ConfigError("parameter '" + p.name + "' where config expects '" + e.name + "'");
    if (p.value.shape() != e.value.shape()) {
      throw ConfigError("parameter '" + p.name + "' has shape " + ShapeToString(p.value.shape()) +
                        ", config expects " + ShapeToString(e.value.shape()));
    }
  }
}

namespace graph {

Var EncodeGraph(ag::Graph& g, Var images, const BoundParams& params, const ModelConfig& config) {
  if (images.value().rank() != 4 || images.value().dim(1) != 3) {
    throw DomainError("encoder expects (B, 3, H, W) images, got " + ShapeToString(images.shape()));
  }
  int64_t h = images.value().dim(2), w = images.value().dim(3);
  Var x = images;
  for (size_t i = 0; i < config.encoder.size(); ++i) {
    const int stride = config.encoder[i].stride;
    if (h % stride != 0 || w % stride != 0) {
      throw DomainError("image size " + std::to_string(images.value().dim(2)) + "x" +
                        std::to_string(images.value().dim(3)) + " is not divisible by the encoder strides");
    }
    const std::string name = "encoder." + std::to_string(i);
    x = ag::Relu(g, ag::Conv2d(g, x, params(name + ".weight"), params(name + ".bias"), stride, 1));
    h /= stride;
    w /= stride;
  }
  return x;
}

ForwardVars ForwardGraph(ag::Graph& g, Var images, const BoundParams& params, const ModelConfig& config) {
  ForwardVars out;
  out.feature_map = EncodeGraph(g, images, params, config);
  out.attr_branch = Branch(g, out.feature_map, params, "attr", config.attr_branch, config);
  out.obj_branch = Branch(g, out.feature_map, params, "obj", config.obj_branch, config);
  out.attr_logits = Classify(g, out.attr_branch.embedding, params, "cls.attr", config);
  out.obj_logits = Classify(g, out.obj_branch.embedding, params, "cls.obj", config);
  // Reversals are swapped: the attribute branch's reversal feeds the object
  // classifier and vice versa.
  out.rev_obj_logits = Classify(g, out.attr_branch.reversed_embedding, params, "cls.rev_obj", config);
  out.rev_attr_logits = Classify(g, out.obj_branch.reversed_embedding, params, "cls.rev_attr", config);
  return out;
}

}  // namespace graph

Tensor Encode(const ImageBatch& images, const ModelParams& params, const ModelConfig& config) {
  ag::Graph g;
  const BoundParams bound(g, params, false);
  return graph::EncodeGraph(g, g.Constant(images.data()), bound, config).value();
}

ModelOutputs Forward(const Tensor& images, const ModelParams& params, const ModelConfig& config) {
  ag::Graph g;
  const BoundParams bound(g, params, false);
  const graph::ForwardVars v = graph::ForwardGraph(g, g.Constant(images), bound, config);
  return ModelOutputs{v.attr_logits.value(),
                      v.obj_logits.value(),
                      v.rev_attr_logits.value(),
                      v.rev_obj_logits.value(),
                      v.attr_branch.embedding.value(),
                      v.obj_branch.embedding.value(),
                      v.attr_branch.reversed_embedding.value(),
                      v.obj_branch.reversed_embedding.value()};
}

ModelOutputs Forward(const ImageBatch& images, const ModelParams& params, const ModelConfig& config) {
  return Forward(images.data(), params, config);
}

}  // namespace dranet
