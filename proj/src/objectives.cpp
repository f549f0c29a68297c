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

#include "dranet/objectives.hpp"

#include <cmath>
#include <vector>

#include "dranet/errors.hpp"

namespace dranet {
namespace {

using ag::Var;

std::vector<int> AttributeIds(std::span<const CompositionLabel> labels) {
  std::vector<int> ids;
  ids.reserve(labels.size());
  for (const auto& l : labels) ids.push_back(l.attribute_id);
  return ids;
}

std::vector<int> ObjectIds(std::span<const CompositionLabel> labels) {
  std::vector<int> ids;
  ids.reserve(labels.size());
  for (const auto& l : labels) ids.push_back(l.object_id);
  return ids;
}

graph::LogitVars ConstantLogits(ag::Graph& g, const ModelOutputs& o) {
  return {g.Constant(o.attr_logits), g.Constant(o.obj_logits), g.Constant(o.rev_attr_logits),
          g.Constant(o.rev_obj_logits)};
}

void RequireBatch(std::span<const CompositionLabel> labels) {
  if (labels.empty()) throw DomainError("loss requires a non-empty batch");
}

}  // namespace

void LossWeights::Validate() const {
  if (!(lambda1 >= 0.0) || !std::isfinite(lambda1) || !(lambda2 >= 0.0) || !std::isfinite(lambda2)) {
    throw ConfigError("loss weights must be finite and non-negative");
  }
}

namespace graph {

Var DistillGraph(ag::Graph& g, const LogitVars& logits, DistillMode mode, bool detach_teacher) {
  auto teach = [&](const Var& v) { return detach_teacher ? ag::Detach(g, v) : v; };
  Var first, second;
  switch (mode) {
    case DistillMode::kOff:
      throw DomainError("distillation requested with distill_mode = off");
    case DistillMode::kReversalTeacher:
      // Both reversal classifiers teach.
      first = ag::KlDivergence(g, logits.obj, teach(logits.rev_obj));
      second = ag::KlDivergence(g, logits.attr, teach(logits.rev_attr));
      break;
    case DistillMode::kNOriented:
      // f_ac and f_roc sit on the non-local branch and teach.
      first = ag::KlDivergence(g, logits.obj, teach(logits.rev_obj));
      second = ag::KlDivergence(g, logits.rev_attr, teach(logits.attr));
      break;
    case DistillMode::kLOriented:
      // f_oc and f_rac sit on the local branch and teach.
      first = ag::KlDivergence(g, logits.rev_obj, teach(logits.obj));
      second = ag::KlDivergence(g, logits.attr, teach(logits.rev_attr));
      break;
  }
  const Var terms[] = {first, second};
  const double ones[] = {1.0, 1.0};
  return ag::WeightedSum(g, terms, ones);
}

LossVars LossGraph(ag::Graph& g, const LogitVars& logits, std::span<const CompositionLabel> labels,
                   const LossWeights& weights, const ModelConfig& config) {
  RequireBatch(labels);
  const std::vector<int> attrs = AttributeIds(labels);
  const std::vector<int> objs = ObjectIds(labels);
  LossVars out;
  out.attr = ag::CrossEntropy(g, logits.attr, attrs);
  out.obj = ag::CrossEntropy(g, logits.obj, objs);
  std::vector<Var> terms = {out.attr, out.obj};
  std::vector<double> coeffs = {1.0, 1.0};
  if (config.use_reverse) {
    const Var parts[] = {ag::CrossEntropy(g, logits.rev_obj, objs), ag::CrossEntropy(g, logits.rev_attr, attrs)};
    const double ones[] = {1.0, 1.0};
    out.reverse = ag::WeightedSum(g, parts, ones);
    terms.push_back(out.reverse);
    coeffs.push_back(weights.lambda1);
  }
  if (config.distill_mode != DistillMode::kOff) {
    out.distill = DistillGraph(g, logits, config.distill_mode, config.detach_teacher);
    terms.push_back(out.distill);
    coeffs.push_back(weights.lambda2);
  }
  out.total = ag::WeightedSum(g, terms, coeffs);
  return out;
}

}  // namespace graph

double AttrLoss(const ModelOutputs& outputs, std::span<const CompositionLabel> labels) {
  RequireBatch(labels);
  ag::Graph g;
  return ag::CrossEntropy(g, g.Constant(outputs.attr_logits), AttributeIds(labels)).value()[0];
}

double ObjLoss(const ModelOutputs& outputs, std::span<const CompositionLabel> labels) {
  RequireBatch(labels);
  ag::Graph g;
  return ag::CrossEntropy(g, g.Constant(outputs.obj_logits), ObjectIds(labels)).value()[0];
}

double ReverseLoss(const ModelOutputs& outputs, std::span<const CompositionLabel> labels) {
  RequireBatch(labels);
  ag::Graph g;
  const double obj = ag::CrossEntropy(g, g.Constant(outputs.rev_obj_logits), ObjectIds(labels)).value()[0];
  const double attr = ag::CrossEntropy(g, g.Constant(outputs.rev_attr_logits), AttributeIds(labels)).value()[0];
  return obj + attr;
}

double DistillLoss(const ModelOutputs& outputs, DistillMode mode) {
  if (mode == DistillMode::kOff) return 0.0;
  if (outputs.attr_logits.dim(0) == 0) throw DomainError("loss requires a non-empty batch");
  ag::Graph g;
  return graph::DistillGraph(g, ConstantLogits(g, outputs), mode, true).value()[0];
}

LossBreakdown TotalLoss(const ModelOutputs& outputs, std::span<const CompositionLabel> labels,
                        const LossWeights& weights, const ModelConfig& config) {
  weights.Validate();
  ag::Graph g;
  const graph::LossVars v = graph::LossGraph(g, ConstantLogits(g, outputs), labels, weights, config);
  LossBreakdown b;
  b.attr = v.attr.value()[0];
  b.obj = v.obj.value()[0];
  b.reverse = v.reverse.valid() ? v.reverse.value()[0] : 0.0;
  b.distill = v.distill.valid() ? v.distill.value()[0] : 0.0;
  b.total = v.total.value()[0];
  return b;
}

Gradients ComputeGradients(const ModelParams& params, const ImageBatch& batch, const LossWeights& weights,
                           const ModelConfig& config) {
  weights.Validate();
  ag::Graph g;
  const BoundParams bound(g, params, /*trainable=*/true);
  const graph::ForwardVars f = graph::ForwardGraph(g, g.Constant(batch.data()), bound, config);
  const graph::LogitVars logits{f.attr_logits, f.obj_logits, f.rev_attr_logits, f.rev_obj_logits};
  const graph::LossVars loss = graph::LossGraph(g, logits, batch.labels(), weights, config);
  g.Backward(loss.total);

  Gradients out;
  out.losses.attr = loss.attr.value()[0];
  out.losses.obj = loss.obj.value()[0];
  out.losses.reverse = loss.reverse.valid() ? loss.reverse.value()[0] : 0.0;
  out.losses.distill = loss.distill.valid() ? loss.distill.value()[0] : 0.0;
  out.losses.total = loss.total.value()[0];
  for (const auto& e : params.entries()) {
    const ag::Var v = bound(e.name);
    out.grads.Add(e.name, v.grad().empty() ? Tensor(e.value.shape(), 0.0) : v.grad());
  }
  return out;
}

LossBreakdown TrainStep(ModelParams& params, const ImageBatch& batch, const LossWeights& weights,
                        const ModelConfig& config, const AdamOptions& options, OptimizerState& state) {
  Gradients grads = ComputeGradients(params, batch, weights, config);
  for (const auto& e : grads.grads.entries()) {
    if (!e.value.AllFinite()) throw NumericError("non-finite gradient for parameter '" + e.name + "'");
  }
  if (!std::isfinite(grads.losses.total)) throw NumericError("non-finite training loss");
  if (state.first_moment.size() == 0) {
    for (const auto& e : params.entries()) {
      state.first_moment.Add(e.name, Tensor(e.value.shape(), 0.0));
      state.second_moment.Add(e.name, Tensor(e.value.shape(), 0.0));
    }
  }
  ++state.step;
  const double correction1 = 1.0 - std::pow(options.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(options.beta2, static_cast<double>(state.step));
  for (auto& e : params.entries()) {
    if (config.freeze_encoder && e.name.rfind("encoder.", 0) == 0) continue;
    const Tensor& grad = grads.grads.Get(e.name);
    Tensor& m = state.first_moment.Get(e.name);
    Tensor& v = state.second_moment.Get(e.name);
    for (int64_t i = 0; i < e.value.size(); ++i) {
      m[i] = options.beta1 * m[i] + (1.0 - options.beta1) * grad[i];
      v[i] = options.beta2 * v[i] + (1.0 - options.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      e.value[i] -= options.learning_rate * m_hat / (std::sqrt(v_hat) + options.epsilon);
    }
  }
  return grads.losses;
}

}  // namespace dranet
