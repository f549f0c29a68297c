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

// The four attention blocks. Each maps a feature map z (C, H, W) to a pooled
// embedding and a reversed embedding computed from the complementary
// attention:
//
//   non-local spatial  A = softmax(w_s), A_r = softmax(1 - sigmoid(w_s)),
//                      w_s = q^T k over N = H*W positions,
//                      e = mean_N(alpha * v A^T + z)
//   non-local channel  same over channels, on m-bin pooled descriptors,
//                      e = beta * softmax(w_c) v + GAP(z)
//   local spatial      m = sigmoid(conv3x3(z)), e = GAP(z * m), e_r = GAP(z * (1 - m))
//   local channel      m = sigmoid(W2 relu(W1 GAP(z))), e = GAP(z) * m, e_r = GAP(z) * (1 - m)
//
// Softmax runs over the key index. alpha and beta start at zero and are shared
// by the forward and reversed paths.

#ifndef DRANET_ATTENTION_HPP_
#define DRANET_ATTENTION_HPP_

#include <algorithm>
#include <string>

#include "dranet/autograd.hpp"
#include "dranet/core_types.hpp"
#include "dranet/params.hpp"
#include "dranet/random.hpp"

namespace dranet {

struct NonLocalSpatialParams {
  Tensor query_weight;  // (c, C, 1, 1), c = max(1, C/8)
  Tensor query_bias;    // (c)
  Tensor key_weight;    // (c, C, 1, 1)
  Tensor key_bias;      // (c)
  Tensor value_weight;  // (C, C, 1, 1)
  Tensor value_bias;    // (C)
  Tensor alpha = Tensor::Scalar(0.0);

  static NonLocalSpatialParams Init(int channels, Rng& rng);
  static int ReducedChannels(int channels) { return std::max(1, channels / 8); }
  int channels() const { return static_cast<int>(value_weight.dim(0)); }

  void AddTo(ParamStore& store, const std::string& prefix) const;
  static NonLocalSpatialParams From(const ParamStore& store, const std::string& prefix);
};

struct NonLocalChannelParams {
  int bins = 2;          // pooling grid side; descriptor width m = bins^2
  Tensor query_weight;   // (d, m), d = max(1, C/4)
  Tensor query_bias;     // (d)
  Tensor key_weight;     // (d, m)
  Tensor key_bias;       // (d)
  Tensor value_weight;   // (1, m)
  Tensor value_bias;     // (1)
  Tensor beta = Tensor::Scalar(0.0);

  static NonLocalChannelParams Init(int channels, int descriptor_bins, Rng& rng);
  static int QueryWidth(int channels) { return std::max(1, channels / 4); }
  int descriptor_width() const { return bins * bins; }

  void AddTo(ParamStore& store, const std::string& prefix) const;
  static NonLocalChannelParams From(const ParamStore& store, const std::string& prefix, int bins);
};

struct LocalSpatialParams {
  Tensor mask_weight;  // (1, C, 3, 3)
  Tensor mask_bias;    // (1)

  static LocalSpatialParams Init(int channels, Rng& rng);
  void AddTo(ParamStore& store, const std::string& prefix) const;
  static LocalSpatialParams From(const ParamStore& store, const std::string& prefix);
};

struct LocalChannelParams {
  Tensor squeeze_weight;  // (C/r, C)
  Tensor squeeze_bias;    // (C/r)
  Tensor excite_weight;   // (C, C/r)
  Tensor excite_bias;     // (C)

  static LocalChannelParams Init(int channels, int reduction, Rng& rng);
  void AddTo(ParamStore& store, const std::string& prefix) const;
  static LocalChannelParams From(const ParamStore& store, const std::string& prefix);
};

// Result of one block on one sample.
struct BlockOutput {
  Tensor embedding;           // (C)
  Tensor reversed_embedding;  // (C)
  // N x N (non-local spatial), C x C (non-local channel), 1 x H x W (local
  // spatial) or C (local channel).
  Tensor attention;
  Tensor reversed_attention;
};

BlockOutput NsmForward(const FeatureMap& z, const NonLocalSpatialParams& p);
BlockOutput NcmForward(const FeatureMap& z, const NonLocalChannelParams& p);
BlockOutput LsmForward(const FeatureMap& z, const LocalSpatialParams& p);
BlockOutput LcmForward(const FeatureMap& z, const LocalChannelParams& p);

namespace graph {

// Batched, differentiable versions used by the model. z is (B, C, H, W);
// parameters are looked up in `params` under `prefix`.
struct BlockVars {
  ag::Var embedding;           // (B, C)
  ag::Var reversed_embedding;  // (B, C)
  ag::Var attention;           // per-sample attention artifact, batched
  ag::Var reversed_attention;
  ag::Var output_map;          // NSM only: (B, C, N) pre-pool residual sum
};

BlockVars NonLocalSpatial(ag::Graph& g, ag::Var z, const BoundParams& params, const std::string& prefix);
BlockVars NonLocalChannel(ag::Graph& g, ag::Var z, const BoundParams& params, const std::string& prefix,
                          int bins);
BlockVars LocalSpatial(ag::Graph& g, ag::Var z, const BoundParams& params, const std::string& prefix);
BlockVars LocalChannel(ag::Graph& g, ag::Var z, const BoundParams& params, const std::string& prefix);

}  // namespace graph
}  // namespace dranet

#endif  // DRANET_ATTENTION_HPP_
