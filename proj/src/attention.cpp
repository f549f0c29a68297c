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

#include "dranet/attention.hpp"

#include <cmath>

#include "dranet/errors.hpp"

namespace dranet {
namespace {

using ag::Var;

void RequireChannels(const Var& z, int64_t channels, const char* block) {
  if (z.value().rank() != 4 || z.value().dim(1) != channels) {
    throw DomainError(std::string(block) + ": feature map " + ShapeToString(z.shape()) +
                      " does not match block width " + std::to_string(channels));
  }
}

// Drops the leading batch axis of a (1, ...) array.
Tensor Unbatch(const Tensor& t) {
  Shape s(t.shape().begin() + 1, t.shape().end());
  return t.Reshaped(std::move(s));
}

Tensor Batched(const FeatureMap& z) {
  const Tensor& d = z.data();
  return d.Reshaped(Shape{1, d.dim(0), d.dim(1), d.dim(2)});
}

BlockOutput Collect(const graph::BlockVars& v) {
  return BlockOutput{Unbatch(v.embedding.value()), Unbatch(v.reversed_embedding.value()),
                     Unbatch(v.attention.value()), Unbatch(v.reversed_attention.value())};
}

const std::string kStandalone = "block.";

}  // namespace

// ---- Parameter structs -----------------------------------------------------

NonLocalSpatialParams NonLocalSpatialParams::Init(int channels, Rng& rng) {
  if (channels < 1) throw DomainError("non-local spatial block needs at least one channel");
  const int reduced = ReducedChannels(channels);
  NonLocalSpatialParams p;
  p.query_weight = FanInNormal({reduced, channels, 1, 1}, channels, 1.0, rng);
  p.query_bias = Tensor({reduced});
  p.key_weight = FanInNormal({reduced, channels, 1, 1}, channels, 1.0, rng);
  p.key_bias = Tensor({reduced});
  p.value_weight = FanInNormal({channels, channels, 1, 1}, channels, 1.0, rng);
  p.value_bias = Tensor({channels});
  p.alpha = Tensor::Scalar(0.0);
  return p;
}

void NonLocalSpatialParams::AddTo(ParamStore& store, const std::string& prefix) const {
  store.Add(prefix + "query.weight", query_weight);
  store.Add(prefix + "query.bias", query_bias);
  store.Add(prefix + "key.weight", key_weight);
  store.Add(prefix + "key.bias", key_bias);
  store.Add(prefix + "value.weight", value_weight);
  store.Add(prefix + "value.bias", value_bias);
  store.Add(prefix + "alpha", alpha);
}

NonLocalSpatialParams NonLocalSpatialParams::From(const ParamStore& store, const std::string& prefix) {
  NonLocalSpatialParams p;
  p.query_weight = store.Get(prefix + "query.weight");
  p.query_bias = store.Get(prefix + "query.bias");
  p.key_weight = store.Get(prefix + "key.weight");
  p.key_bias = store.Get(prefix + "key.bias");
  p.value_weight = store.Get(prefix + "value.weight");
  p.value_bias = store.Get(prefix + "value.bias");
  p.alpha = store.Get(prefix + "alpha");
  return p;
}

NonLocalChannelParams NonLocalChannelParams::Init(int channels, int descriptor_bins, Rng& rng) {
  if (channels < 1) throw DomainError("non-local channel block needs at least one channel");
  const int root = static_cast<int>(std::lround(std::sqrt(static_cast<double>(descriptor_bins))));
  if (descriptor_bins < 1 || root * root != descriptor_bins) {
    throw DomainError("descriptor bins must be a positive square number, got " + std::to_string(descriptor_bins));
  }
  const int d = QueryWidth(channels);
  NonLocalChannelParams p;
  p.bins = root;
  p.query_weight = FanInNormal({d, descriptor_bins}, descriptor_bins, 1.0, rng);
  p.query_bias = Tensor({d});
  p.key_weight = FanInNormal({d, descriptor_bins}, descriptor_bins, 1.0, rng);
  p.key_bias = Tensor({d});
  p.value_weight = FanInNormal({1, descriptor_bins}, descriptor_bins, 1.0, rng);
  p.value_bias = Tensor({1});
  p.beta = Tensor::Scalar(0.0);
  return p;
}

void NonLocalChannelParams::AddTo(ParamStore& store, const std::string& prefix) const {
  store.Add(prefix + "query.weight", query_weight);
  store.Add(prefix + "query.bias", query_bias);
  store.Add(prefix + "key.weight", key_weight);
  store.Add(prefix + "key.bias", key_bias);
  store.Add(prefix + "value.weight", value_weight);
  store.Add(prefix + "value.bias", value_bias);
  store.Add(prefix + "beta", beta);
}

NonLocalChannelParams NonLocalChannelParams::From(const ParamStore& store, const std::string& prefix, int bins) {
  NonLocalChannelParams p;
  p.bins = bins;
  p.query_weight = store.Get(prefix + "query.weight");
  p.query_bias = store.Get(prefix + "query.bias");
  p.key_weight = store.Get(prefix + "key.weight");
  p.key_bias = store.Get(prefix + "key.bias");
  p.value_weight = store.Get(prefix + "value.weight");
  p.value_bias = store.Get(prefix + "value.bias");
  p.beta = store.Get(prefix + "beta");
  return p;
}

LocalSpatialParams LocalSpatialParams::Init(int channels, Rng& rng) {
  if (channels < 1) throw DomainError("local spatial block needs at least one channel");
  LocalSpatialParams p;
  p.mask_weight = FanInNormal({1, channels, 3, 3}, channels * 9, 1.0, rng);
  p.mask_bias = Tensor({1});
  return p;
}

void LocalSpatialParams::AddTo(ParamStore& store, const std::string& prefix) const {
  store.Add(prefix + "mask.weight", mask_weight);
  store.Add(prefix + "mask.bias", mask_bias);
}

LocalSpatialParams LocalSpatialParams::From(const ParamStore& store, const std::string& prefix) {
  return LocalSpatialParams{store.Get(prefix + "mask.weight"), store.Get(prefix + "mask.bias")};
}

LocalChannelParams LocalChannelParams::Init(int channels, int reduction, Rng& rng) {
  if (reduction < 1 || channels / reduction < 1) {
    throw DomainError("local channel block needs C/r >= 1 (C=" + std::to_string(channels) +
                      ", r=" + std::to_string(reduction) + ")");
  }
  const int hidden = channels / reduction;
  LocalChannelParams p;
  p.squeeze_weight = FanInNormal({hidden, channels}, channels, 2.0, rng);
  p.squeeze_bias = Tensor({hidden});
  p.excite_weight = FanInNormal({channels, hidden}, hidden, 1.0, rng);
  p.excite_bias = Tensor({channels});
  return p;
}

void LocalChannelParams::AddTo(ParamStore& store, const std::string& prefix) const {
  store.Add(prefix + "squeeze.weight", squeeze_weight);
  store.Add(prefix + "squeeze.bias", squeeze_bias);
  store.Add(prefix + "excite.weight", excite_weight);
  store.Add(prefix + "excite.bias", excite_bias);
}

LocalChannelParams LocalChannelParams::From(const ParamStore& store, const std::string& prefix) {
  return LocalChannelParams{store.Get(prefix + "squeeze.weight"), store.Get(prefix + "squeeze.bias"),
                            store.Get(prefix + "excite.weight"), store.Get(prefix + "excite.bias")};
}

// ---- Graph blocks ----------------------------------------------------------

namespace graph {

BlockVars NonLocalSpatial(ag::Graph& g, Var z, const BoundParams& params, const std::string& prefix) {
  const Var value_w = params(prefix + "value.weight");
  const int64_t channels = value_w.value().dim(0);
  RequireChannels(z, channels, "non-local spatial block");
  const int64_t batch = z.value().dim(0);
  const int64_t positions = z.value().dim(2) * z.value().dim(3);

  auto project = [&](const std::string& name) {
    const Var y = ag::Conv2d(g, z, params(prefix + name + ".weight"), params(prefix + name + ".bias"), 1, 0);
    return ag::Reshape(g, y, Shape{batch, y.value().dim(1), positions});
  };
  const Var query = project("query");  // (B, c, N)
  const Var key = project("key");      // (B, c, N)
  const Var value = project("value");  // (B, C, N)
  const Var affinity = ag::BatchMatMul(g, query, key, /*transpose_a=*/true, /*transpose_b=*/false);  // (B, N, N)
  const Var attention = ag::SoftmaxLast(g, affinity);
  const Var reversed_attention = ag::SoftmaxLast(g, ag::OneMinus(g, ag::Sigmoid(g, affinity)));

  const Var alpha = params(prefix + "alpha");
  const Var flat_z = ag::Reshape(g, z, Shape{batch, channels, positions});
  auto pooled = [&](const Var& att, Var* map_out) {
    const Var context = ag::BatchMatMul(g, value, att, false, /*transpose_b=*/true);  // (B, C, N)
    const Var residual = ag::Add(g, ag::ScaleBy(g, context, alpha), flat_z);
    if (map_out) *map_out = residual;
    return ag::MeanLast(g, residual);
  };
  BlockVars out;
  out.embedding = pooled(attention, &out.output_map);
  out.reversed_embedding = pooled(reversed_attention, nullptr);
  out.attention = attention;
  out.reversed_attention = reversed_attention;
  return out;
}

BlockVars NonLocalChannel(ag::Graph& g, Var z, const BoundParams& params, const std::string& prefix, int bins) {
  const Var query_w = params(prefix + "query.weight");
  if (query_w.value().dim(1) != static_cast<int64_t>(bins) * bins) {
    throw DomainError("non-local channel block: descriptor width does not match " + std::to_string(bins) + "x" +
                      std::to_string(bins) + " bins");
  }
  if (z.value().rank() != 4) throw DomainError("non-local channel block expects (B, C, H, W)");
  const int64_t batch = z.value().dim(0), channels = z.value().dim(1);

  const Var descriptors = ag::AdaptiveAvgPool(g, z, bins);  // (B, C, m)
  const Var query = ag::Linear(g, descriptors, query_w, params(prefix + "query.bias"));
  const Var key = ag::Linear(g, descriptors, params(prefix + "key.weight"), params(prefix + "key.bias"));
  const Var value = ag::Linear(g, descriptors, params(prefix + "value.weight"), params(prefix + "value.bias"));
  const Var affinity = ag::BatchMatMul(g, query, key, false, /*transpose_b=*/true);  // (B, C, C)
  const Var attention = ag::SoftmaxLast(g, affinity);
  const Var reversed_attention = ag::SoftmaxLast(g, ag::OneMinus(g, ag::Sigmoid(g, affinity)));

  const Var beta = params(prefix + "beta");
  const Var gap = ag::GlobalAvgPool(g, z);
  auto mix = [&](const Var& att) {
    const Var mixed = ag::Reshape(g, ag::BatchMatMul(g, att, value, false, false), Shape{batch, channels});
    return ag::Add(g, ag::ScaleBy(g, mixed, beta), gap);
  };
  BlockVars out;
  out.embedding = mix(attention);
  out.reversed_embedding = mix(reversed_attention);
  out.attention = attention;
  out.reversed_attention = reversed_attention;
  return out;
}

BlockVars LocalSpatial(ag::Graph& g, Var z, const BoundParams& params, const std::string& prefix) {
  const Var mask_w = params(prefix + "mask.weight");
  RequireChannels(z, mask_w.value().dim(1), "local spatial block");
  const Var mask = ag::Sigmoid(g, ag::Conv2d(g, z, mask_w, params(prefix + "mask.bias"), 1, 1));  // (B, 1, H, W)
  const Var reversed_mask = ag::OneMinus(g, mask);
  BlockVars out;
  out.embedding = ag::GlobalAvgPool(g, ag::MulSpatialMask(g, z, mask));
  out.reversed_embedding = ag::GlobalAvgPool(g, ag::MulSpatialMask(g, z, reversed_mask));
  out.attention = mask;
  out.reversed_attention = reversed_mask;
  return out;
}

BlockVars LocalChannel(ag::Graph& g, Var z, const BoundParams& params, const std::string& prefix) {
  const Var squeeze_w = params(prefix + "squeeze.weight");
  RequireChannels(z, squeeze_w.value().dim(1), "local channel block");
  const Var pooled = ag::GlobalAvgPool(g, z);  // (B, C)
  const Var hidden = ag::Relu(g, ag::Linear(g, pooled, squeeze_w, params(prefix + "squeeze.bias")));
  const Var mask = ag::Sigmoid(
      g, ag::Linear(g, hidden, params(prefix + "excite.weight"), params(prefix + "excite.bias")));
  const Var reversed_mask = ag::OneMinus(g, mask);
  BlockVars out;
  out.embedding = ag::Mul(g, pooled, mask);
  out.reversed_embedding = ag::Mul(g, pooled, reversed_mask);
  out.attention = mask;
  out.reversed_attention = reversed_mask;
  return out;
}

}  // namespace graph

// ---- Single-sample entry points -------------------------------------------

BlockOutput NsmForward(const FeatureMap& z, const NonLocalSpatialParams& p) {
  ParamStore store;
  p.AddTo(store, kStandalone);
  ag::Graph g;
  const BoundParams bound(g, store, /*trainable=*/false);
  return Collect(graph::NonLocalSpatial(g, g.Constant(Batched(z)), bound, kStandalone));
}

BlockOutput NcmForward(const FeatureMap& z, const NonLocalChannelParams& p) {
  ParamStore store;
  p.AddTo(store, kStandalone);
  ag::Graph g;
  const BoundParams bound(g, store, false);
  return Collect(graph::NonLocalChannel(g, g.Constant(Batched(z)), bound, kStandalone, p.bins));
}

BlockOutput LsmForward(const FeatureMap& z, const LocalSpatialParams& p) {
  ParamStore store;
  p.AddTo(store, kStandalone);
  ag::Graph g;
  const BoundParams bound(g, store, false);
  return Collect(graph::LocalSpatial(g, g.Constant(Batched(z)), bound, kStandalone));
}

BlockOutput LcmForward(const FeatureMap& z, const LocalChannelParams& p) {
  ParamStore store;
  p.AddTo(store, kStandalone);
  ag::Graph g;
  const BoundParams bound(g, store, false);
  return Collect(graph::LocalChannel(g, g.Constant(Batched(z)), bound, kStandalone));
}

}  // namespace dranet
