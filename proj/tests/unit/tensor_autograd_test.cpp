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

#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "../test_util.hpp"
#include "dranet/autograd.hpp"
#include "dranet/errors.hpp"
#include "dranet/params.hpp"
#include "dranet/tensor.hpp"

namespace dranet {
namespace {

using testing::FiniteDifferenceError;
using testing::RandomTensor;

using OpFn = std::function<ag::Var(ag::Graph&, const BoundParams&)>;

// Contracts the op output with a fixed random tensor R, giving the scalar
// sum(out * R), so every output entry contributes to the gradient.
ag::Var Contract(ag::Graph& g, ag::Var out, const Tensor& r) {
  const int64_t n = out.value().size();
  ag::Var flat = ag::Reshape(g, out, {1, n});
  ag::Var w = g.Constant(r.Reshaped({1, n}));
  ag::Var b = g.Constant(Tensor({1}));
  return ag::Reshape(g, ag::Linear(g, flat, w, b), {});
}

double OpGradientError(const OpFn& op, const ParamStore& inputs, uint64_t seed) {
  Rng rng(seed);
  Tensor r;
  {
    ag::Graph g;
    BoundParams bp(g, inputs, false);
    r = RandomTensor(op(g, bp).shape(), rng);
  }
  ParamStore analytic;
  {
    ag::Graph g;
    BoundParams bp(g, inputs, true);
    ag::Var loss = Contract(g, op(g, bp), r);
    g.Backward(loss);
    for (const auto& e : inputs.entries()) {
      const ag::Var v = bp(e.name);
      analytic.Add(e.name, v.grad().empty() ? Tensor(e.value.shape()) : v.grad());
    }
  }
  auto f = [&](const ParamStore& p) {
    ag::Graph g;
    BoundParams bp(g, p, false);
    return Contract(g, op(g, bp), r).value()[0];
  };
  return FiniteDifferenceError(f, inputs, analytic, 1e-6);
}

ParamStore Inputs(std::initializer_list<std::pair<const char*, Shape>> specs, uint64_t seed) {
  Rng rng(seed);
  ParamStore p;
  for (const auto& [name, shape] : specs) p.Add(name, RandomTensor(shape, rng));
  return p;
}

constexpr double kTol = 1e-6;

TEST(TensorTest, ShapeAndIndexing) {
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.size(), 24);
  EXPECT_EQ(t.rank(), 3);
  t.at({1, 2, 3}) = 5.0;
  EXPECT_EQ(t[23], 5.0);
  EXPECT_EQ(t.Reshaped({6, 4}).at({5, 3}), 5.0);
  EXPECT_THROW(t.Reshaped({5, 5}), DomainError);
  EXPECT_THROW(Tensor({2}, std::vector<double>{1.0}), DomainError);
  EXPECT_TRUE(t.AllFinite());
  t[0] = NAN;
  EXPECT_FALSE(t.AllFinite());
}

TEST(AutogradTest, ElementwiseGradients) {
  const ParamStore in = Inputs({{"a", {2, 5}}, {"b", {2, 5}}}, 1);
  EXPECT_LT(OpGradientError([](auto& g, auto& p) { return ag::Add(g, p("a"), p("b")); }, in, 2), kTol);
  EXPECT_LT(OpGradientError([](auto& g, auto& p) { return ag::Mul(g, p("a"), p("b")); }, in, 3), kTol);
  EXPECT_LT(OpGradientError([](auto& g, auto& p) { return ag::Relu(g, p("a")); }, in, 4), kTol);
  EXPECT_LT(OpGradientError([](auto& g, auto& p) { return ag::Sigmoid(g, p("a")); }, in, 5), kTol);
  EXPECT_LT(OpGradientError([](auto& g, auto& p) { return ag::OneMinus(g, p("a")); }, in, 6), kTol);
  const ParamStore scaled = Inputs({{"x", {3, 4}}, {"s", {}}}, 7);
  EXPECT_LT(OpGradientError([](auto& g, auto& p) { return ag::ScaleBy(g, p("x"), p("s")); }, scaled, 8), kTol);
}

TEST(AutogradTest, ShapeAndReductionGradients) {
  const ParamStore in = Inputs({{"a", {3, 4}}, {"b", {3, 2}}}, 11);
  EXPECT_LT(OpGradientError([](auto& g, auto& p) { return ag::ConcatLast(g, p("a"), p("b")); }, in, 12), kTol);
  EXPECT_LT(OpGradientError([](auto& g, auto& p) { return ag::MeanLast(g, p("a")); }, in, 13), kTol);
  EXPECT_LT(OpGradientError([](auto& g, auto& p) { return ag::SoftmaxLast(g, p("a")); }, in, 14), kTol);
  EXPECT_LT(OpGradientError([](auto& g, auto& p) { return ag::LogSoftmaxLast(g, p("a")); }, in, 15), kTol);
  EXPECT_LT(OpGradientError([](auto& g, auto& p) { return ag::Reshape(g, p("a"), {2, 6}); }, in, 16), kTol);
  const ParamStore maps = Inputs({{"x", {2, 3, 5, 5}}}, 17);
  EXPECT_LT(OpGradientError([](auto& g, auto& p) { return ag::GlobalAvgPool(g, p("x")); }, maps, 18), kTol);
  EXPECT_LT(OpGradientError([](auto& g, auto& p) { return ag::AdaptiveAvgPool(g, p("x"), 2); }, maps, 19),
            kTol);
  EXPECT_LT(OpGradientError([](auto& g, auto& p) { return ag::AdaptiveAvgPool(g, p("x"), 3); }, maps, 20),
            kTol);
}

TEST(AutogradTest, LinearAlgebraGradients) {
  const ParamStore lin = Inputs({{"x", {3, 4}}, {"w", {5, 4}}, {"b", {5}}}, 21);
  EXPECT_LT(OpGradientError([](auto& g, auto& p) { return ag::Linear(g, p("x"), p("w"), p("b")); }, lin, 22),
            kTol);
  for (int ta = 0; ta < 2; ++ta) {
    for (int tb = 0; tb < 2; ++tb) {
      const Shape sa = ta ? Shape{2, 4, 3} : Shape{2, 3, 4};
      const Shape sb = tb ? Shape{2, 5, 4} : Shape{2, 4, 5};
      const ParamStore mm = Inputs({{"a", sa}, {"b", sb}}, 23 + ta * 2 + tb);
      auto op = [ta, tb](ag::Graph& g, const BoundParams& p) {
        return ag::BatchMatMul(g, p("a"), p("b"), ta != 0, tb != 0);
      };
      EXPECT_LT(OpGradientError(op, mm, 30), kTol) << "transpose " << ta << tb;
    }
  }
  const ParamStore conv = Inputs({{"x", {2, 3, 5, 5}}, {"w", {4, 3, 3, 3}}, {"b", {4}}}, 31);
  for (int stride : {1, 2}) {
    for (int padding : {0, 1}) {
      auto op = [stride, padding](ag::Graph& g, const BoundParams& p) {
        return ag::Conv2d(g, p("x"), p("w"), p("b"), stride, padding);
      };
      EXPECT_LT(OpGradientError(op, conv, 32), kTol) << "stride " << stride << " padding " << padding;
    }
  }
  const ParamStore mask = Inputs({{"z", {2, 3, 4, 4}}, {"m", {2, 1, 4, 4}}}, 33);
  EXPECT_LT(OpGradientError([](auto& g, auto& p) { return ag::MulSpatialMask(g, p("z"), p("m")); }, mask, 34),
            kTol);
}

TEST(AutogradTest, LossGradients) {
  const ParamStore in = Inputs({{"s", {4, 5}}, {"t", {4, 5}}}, 41);
  const std::vector<int> targets = {0, 4, 2, 2};
  EXPECT_LT(OpGradientError([&](auto& g, auto& p) { return ag::CrossEntropy(g, p("s"), targets); }, in, 42),
            kTol);
  EXPECT_LT(OpGradientError([](auto& g, auto& p) { return ag::KlDivergence(g, p("s"), p("t")); }, in, 43), kTol);
  const ParamStore scalars = Inputs({{"a", {}}, {"b", {}}}, 44);
  auto sum = [](ag::Graph& g, const BoundParams& p) {
    const ag::Var terms[] = {p("a"), p("b")};
    const double w[] = {0.5, -2.0};
    return ag::WeightedSum(g, terms, w);
  };
  EXPECT_LT(OpGradientError(sum, scalars, 45), kTol);
}

// Direct nested-loop convolution with zero padding.
Tensor NaiveConv(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  const int64_t B = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t Co = w.dim(0), K = w.dim(2);
  const int64_t Ho = (H + 2 * pad - K) / stride + 1, Wo = (W + 2 * pad - K) / stride + 1;
  Tensor out({B, Co, Ho, Wo});
  for (int64_t n = 0; n < B; ++n)
    for (int64_t co = 0; co < Co; ++co)
      for (int64_t oy = 0; oy < Ho; ++oy)
        for (int64_t ox = 0; ox < Wo; ++ox) {
          double acc = b[co];
          for (int64_t ci = 0; ci < Ci; ++ci)
            for (int64_t ky = 0; ky < K; ++ky)
              for (int64_t kx = 0; kx < K; ++kx) {
                const int64_t iy = oy * stride - pad + ky, ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += x.at({n, ci, iy, ix}) * w.at({co, ci, ky, kx});
              }
          out.at({n, co, oy, ox}) = acc;
        }
  return out;
}

TEST(AutogradTest, ConvMatchesNaiveLoops) {
  Rng rng(51);
  const Tensor x = RandomTensor({2, 3, 7, 6}, rng);
  const Tensor w = RandomTensor({5, 3, 3, 3}, rng);
  const Tensor b = RandomTensor({5}, rng);
  for (int stride : {1, 2}) {
    for (int pad : {0, 1}) {
      ag::Graph g;
      ag::Var y = ag::Conv2d(g, g.Constant(x), g.Constant(w), g.Constant(b), stride, pad);
      EXPECT_LT(testing::MaxAbsDiff(y.value(), NaiveConv(x, w, b, stride, pad)), 1e-12);
    }
  }
}

TEST(AutogradTest, SoftmaxRowsSumToOne) {
  Rng rng(52);
  ag::Graph g;
  ag::Var s = ag::SoftmaxLast(g, g.Constant(RandomTensor({6, 9}, rng, 30.0)));
  for (int64_t i = 0; i < 6; ++i) {
    double sum = 0.0;
    for (int64_t j = 0; j < 9; ++j) sum += s.value().at({i, j});
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(AutogradTest, DetachBlocksGradient) {
  ag::Graph g;
  ag::Var x = g.Parameter(Tensor({3}, {1.0, 2.0, 3.0}));
  ag::Var y = ag::Mul(g, ag::Detach(g, x), x);
  ag::Var loss = ag::MeanLast(g, ag::Reshape(g, y, {1, 3}));
  g.Backward(ag::Reshape(g, loss, {}));
  // d/dx mean(stop(x) * x) = stop(x) / 3; the detached factor adds nothing.
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(x.grad()[i], (i + 1) / 3.0, 1e-15);
}

TEST(AutogradTest, BackwardRejectsNonScalarRoot) {
  ag::Graph g;
  ag::Var x = g.Parameter(Tensor({2}, 1.0));
  EXPECT_THROW(g.Backward(x), DomainError);
}

TEST(AutogradTest, CrossEntropyValidatesLabels) {
  ag::Graph g;
  ag::Var x = g.Constant(Tensor({2, 3}));
  const std::vector<int> bad = {0, 3};
  EXPECT_THROW(ag::CrossEntropy(g, x, bad), DomainError);
  const std::vector<int> short_labels = {0};
  EXPECT_THROW(ag::CrossEntropy(g, x, short_labels), DomainError);
}

}  // namespace
}  // namespace dranet
