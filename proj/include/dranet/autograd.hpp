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

// Minimal reverse-mode automatic differentiation over dense tensors.
//
// A Graph records every operation in creation order, which is already a
// topological order, so Backward() simply walks the nodes in reverse. Nodes
// that do not depend on any parameter carry no gradient and are skipped.

#ifndef DRANET_AUTOGRAD_HPP_
#define DRANET_AUTOGRAD_HPP_

#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "dranet/tensor.hpp"

namespace dranet::ag {

struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily, only when requires_grad
  bool requires_grad = false;
  std::function<void(Node&)> backward;
};

class Graph;

// Handle to a node inside a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  Node* node() const { return node_; }
  bool valid() const { return node_ != nullptr; }

 private:
  friend class Graph;
  explicit Var(Node* node) : node_(node) {}
  Node* node_ = nullptr;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var Constant(Tensor value);
  Var Parameter(Tensor value);

  // Creates an op node. `inputs` decide whether the result needs a gradient;
  // `backward` runs with the node's accumulated gradient.
  Var MakeOp(Tensor value, std::span<const Var> inputs, std::function<void(Node&)> backward);

  // Seeds d(root)/d(root) = 1 for a scalar root and propagates.
  void Backward(Var root);

  size_t size() const { return nodes_.size(); }

 private:
  std::deque<Node> nodes_;
};

// Accumulates `delta` into the gradient of `v`, allocating on first use.
void Accumulate(const Var& v, const Tensor& delta);
Tensor& GradBuffer(const Var& v);

// ---- Elementwise ---------------------------------------------------------
Var Add(Graph& g, Var a, Var b);
Var Mul(Graph& g, Var a, Var b);
Var Relu(Graph& g, Var x);
Var Sigmoid(Graph& g, Var x);
Var OneMinus(Graph& g, Var x);
// x * s for a scalar (rank-0) variable s.
Var ScaleBy(Graph& g, Var x, Var s);
// Stops gradient flow; the result is a constant copy of x.
Var Detach(Graph& g, Var x);

// ---- Shape ---------------------------------------------------------------
Var Reshape(Graph& g, Var x, Shape shape);
// Concatenates two rank-2 (batch, k) arrays along the last axis.
Var ConcatLast(Graph& g, Var a, Var b);

// ---- Reductions and normalization ---------------------------------------
// Mean over the last axis.
Var MeanLast(Graph& g, Var x);
// (B, C, H, W) -> (B, C) arithmetic mean over space.
Var GlobalAvgPool(Graph& g, Var x);
// (B, C, H, W) -> (B, C, bins*bins) adaptive average pooling on a square grid.
Var AdaptiveAvgPool(Graph& g, Var x, int bins);
Var SoftmaxLast(Graph& g, Var x);
Var LogSoftmaxLast(Graph& g, Var x);

// ---- Linear algebra -------------------------------------------------------
// y = x W^T + b applied over the last axis; W has shape (out, in).
Var Linear(Graph& g, Var x, Var weight, Var bias);
// Batched matrix product of rank-3 arrays with optional transposes.
Var BatchMatMul(Graph& g, Var a, Var b, bool transpose_a, bool transpose_b);
// 2-D convolution, x (B, Cin, H, W), weight (Cout, Cin, k, k), bias (Cout).
Var Conv2d(Graph& g, Var x, Var weight, Var bias, int stride, int padding);
// z (B, C, H, W) times mask (B, 1, H, W) broadcast over channels.
Var MulSpatialMask(Graph& g, Var z, Var mask);

// ---- Losses (scalar outputs, batch mean) ----------------------------------
Var CrossEntropy(Graph& g, Var logits, std::span<const int> targets);
// Mean over the batch of KL(softmax(student) || softmax(teacher)).
Var KlDivergence(Graph& g, Var student_logits, Var teacher_logits);
// sum_i weights[i] * terms[i] for scalar terms.
Var WeightedSum(Graph& g, std::span<const Var> terms, std::span<const double> weights);

}  // namespace dranet::ag

#endif  // DRANET_AUTOGRAD_HPP_
