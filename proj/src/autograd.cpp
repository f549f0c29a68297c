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

#include "dranet/autograd.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>

#include "dranet/errors.hpp"

namespace dranet::ag {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

void RequireSameShape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DomainError(std::string(op) + ": shape mismatch " + ShapeToString(a.shape()) + " vs " +
                      ShapeToString(b.shape()));
  }
}

void RequireRank(const Var& a, int64_t rank, const char* op) {
  if (a.value().rank() != rank) {
    throw DomainError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                      ShapeToString(a.shape()));
  }
}

// Splits a shape into (rows, last) where last is the trailing axis length.
std::pair<int64_t, int64_t> RowsAndLast(const Shape& s) {
  if (s.empty()) throw DomainError("operation requires rank >= 1");
  const int64_t last = s.back();
  return {last == 0 ? 0 : NumElements(s) / last, last};
}

}  // namespace

Var Graph::Constant(Tensor value) {
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  return Var(&n);
}

Var Graph::Parameter(Tensor value) {
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.requires_grad = true;
  return Var(&n);
}

Var Graph::MakeOp(Tensor value, std::span<const Var> inputs,
                  std::function<void(Node&)> backward) {
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                [](const Var& v) { return v.requires_grad(); });
  if (n.requires_grad) n.backward = std::move(backward);
  return Var(&n);
}

void Graph::Backward(Var root) {
  if (root.value().size() != 1) throw DomainError("Backward requires a scalar root");
  if (!root.requires_grad()) return;
  GradBuffer(root)[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->requires_grad && it->backward && !it->grad.empty()) it->backward(*it);
  }
}

Tensor& GradBuffer(const Var& v) {
  Node* n = v.node();
  if (n->grad.empty() && n->value.size() > 0) n->grad = Tensor(n->value.shape(), 0.0);
  if (n->grad.shape() != n->value.shape()) n->grad = Tensor(n->value.shape(), 0.0);
  return n->grad;
}

void Accumulate(const Var& v, const Tensor& delta) {
  if (!v.requires_grad()) return;
  Tensor& g = GradBuffer(v);
  double* gp = g.data();
  const double* dp = delta.data();
  for (int64_t i = 0; i < g.size(); ++i) gp[i] += dp[i];
}

// ---- Elementwise ---------------------------------------------------------

Var Add(Graph& g, Var a, Var b) {
  RequireSameShape(a, b, "Add");
  Tensor out = a.value();
  for (int64_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  const Var inputs[] = {a, b};
  return g.MakeOp(std::move(out), inputs, [a, b](Node& n) {
    Accumulate(a, n.grad);
    Accumulate(b, n.grad);
  });
}

Var Mul(Graph& g, Var a, Var b) {
  RequireSameShape(a, b, "Mul");
  Tensor out = a.value();
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const Var inputs[] = {a, b};
  return g.MakeOp(std::move(out), inputs, [a, b](Node& n) {
    if (a.requires_grad()) {
      Tensor& ga = GradBuffer(a);
      for (int64_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i] * b.value()[i];
    }
    if (b.requires_grad()) {
      Tensor& gb = GradBuffer(b);
      for (int64_t i = 0; i < gb.size(); ++i) gb[i] += n.grad[i] * a.value()[i];
    }
  });
}

Var Relu(Graph& g, Var x) {
  Tensor out = x.value();
  for (double& v : out.storage()) v = v > 0.0 ? v : 0.0;
  const Var inputs[] = {x};
  return g.MakeOp(std::move(out), inputs, [x](Node& n) {
    Tensor& gx = GradBuffer(x);
    for (int64_t i = 0; i < gx.size(); ++i) {
      if (x.value()[i] > 0.0) gx[i] += n.grad[i];
    }
  });
}

Var Sigmoid(Graph& g, Var x) {
  Tensor out = x.value();
  for (double& v : out.storage()) {
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  const Var inputs[] = {x};
  return g.MakeOp(std::move(out), inputs, [x](Node& n) {
    Tensor& gx = GradBuffer(x);
    for (int64_t i = 0; i < gx.size(); ++i) {
      const double y = n.value[i];
      gx[i] += n.grad[i] * y * (1.0 - y);
    }
  });
}

Var OneMinus(Graph& g, Var x) {
  Tensor out = x.value();
  for (double& v : out.storage()) v = 1.0 - v;
  const Var inputs[] = {x};
  return g.MakeOp(std::move(out), inputs, [x](Node& n) {
    Tensor& gx = GradBuffer(x);
    for (int64_t i = 0; i < gx.size(); ++i) gx[i] -= n.grad[i];
  });
}

Var ScaleBy(Graph& g, Var x, Var s) {
  if (s.value().size() != 1) throw DomainError("ScaleBy: scale must hold a single value");
  const double k = s.value()[0];
  Tensor out = x.value();
  for (double& v : out.storage()) v *= k;
  const Var inputs[] = {x, s};
  return g.MakeOp(std::move(out), inputs, [x, s](Node& n) {
    if (x.requires_grad()) {
      Tensor& gx = GradBuffer(x);
      const double k = s.value()[0];
      for (int64_t i = 0; i < gx.size(); ++i) gx[i] += n.grad[i] * k;
    }
    if (s.requires_grad()) {
      double acc = 0.0;
      for (int64_t i = 0; i < n.grad.size(); ++i) acc += n.grad[i] * x.value()[i];
      GradBuffer(s)[0] += acc;
    }
  });
}

Var Detach(Graph& g, Var x) { return g.Constant(x.value()); }

// ---- Shape ---------------------------------------------------------------

Var Reshape(Graph& g, Var x, Shape shape) {
  Tensor out = x.value().Reshaped(std::move(shape));
  const Var inputs[] = {x};
  return g.MakeOp(std::move(out), inputs, [x](Node& n) {
    Tensor& gx = GradBuffer(x);
    for (int64_t i = 0; i < gx.size(); ++i) gx[i] += n.grad[i];
  });
}

Var ConcatLast(Graph& g, Var a, Var b) {
  RequireRank(a, 2, "ConcatLast");
  RequireRank(b, 2, "ConcatLast");
  const int64_t rows = a.value().dim(0);
  if (b.value().dim(0) != rows) throw DomainError("ConcatLast: batch mismatch");
  const int64_t ka = a.value().dim(1), kb = b.value().dim(1);
  Tensor out(Shape{rows, ka + kb});
  for (int64_t r = 0; r < rows; ++r) {
    std::copy_n(a.value().data() + r * ka, ka, out.data() + r * (ka + kb));
    std::copy_n(b.value().data() + r * kb, kb, out.data() + r * (ka + kb) + ka);
  }
  const Var inputs[] = {a, b};
  return g.MakeOp(std::move(out), inputs, [a, b, rows, ka, kb](Node& n) {
    if (a.requires_grad()) {
      Tensor& ga = GradBuffer(a);
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < ka; ++j) ga[r * ka + j] += n.grad[r * (ka + kb) + j];
    }
    if (b.requires_grad()) {
      Tensor& gb = GradBuffer(b);
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < kb; ++j) gb[r * kb + j] += n.grad[r * (ka + kb) + ka + j];
    }
  });
}

// ---- Reductions and normalization ---------------------------------------

Var MeanLast(Graph& g, Var x) {
  const auto [rows, last] = RowsAndLast(x.shape());
  if (last == 0) throw DomainError("MeanLast: empty axis");
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  Tensor out(out_shape);
  for (int64_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (int64_t j = 0; j < last; ++j) acc += x.value()[r * last + j];
    out[r] = acc / static_cast<double>(last);
  }
  const Var inputs[] = {x};
  return g.MakeOp(std::move(out), inputs, [x, rows, last](Node& n) {
    Tensor& gx = GradBuffer(x);
    const double inv = 1.0 / static_cast<double>(last);
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t j = 0; j < last; ++j) gx[r * last + j] += n.grad[r] * inv;
  });
}

Var GlobalAvgPool(Graph& g, Var x) {
  RequireRank(x, 4, "GlobalAvgPool");
  const Shape& s = x.shape();
  return MeanLast(g, Reshape(g, x, Shape{s[0], s[1], s[2] * s[3]}));
}

Var AdaptiveAvgPool(Graph& g, Var x, int bins) {
  RequireRank(x, 4, "AdaptiveAvgPool");
  if (bins < 1) throw DomainError("AdaptiveAvgPool: bins must be >= 1");
  const int64_t batch = x.value().dim(0), channels = x.value().dim(1);
  const int64_t height = x.value().dim(2), width = x.value().dim(3);
  // Bin i covers [floor(i*H/bins), ceil((i+1)*H/bins)), as in common frameworks.
  auto start = [](int64_t i, int64_t len, int64_t n) { return (i * len) / n; };
  auto stop = [](int64_t i, int64_t len, int64_t n) { return ((i + 1) * len + n - 1) / n; };
  const int64_t m = static_cast<int64_t>(bins) * bins;
  Tensor out(Shape{batch, channels, m});
  const double* xv = x.value().data();
  for (int64_t bc = 0; bc < batch * channels; ++bc) {
    for (int64_t bi = 0; bi < bins; ++bi) {
      for (int64_t bj = 0; bj < bins; ++bj) {
        const int64_t y0 = start(bi, height, bins), y1 = stop(bi, height, bins);
        const int64_t x0 = start(bj, width, bins), x1 = stop(bj, width, bins);
        double acc = 0.0;
        for (int64_t yy = y0; yy < y1; ++yy)
          for (int64_t xx = x0; xx < x1; ++xx) acc += xv[(bc * height + yy) * width + xx];
        out[bc * m + bi * bins + bj] = acc / static_cast<double>((y1 - y0) * (x1 - x0));
      }
    }
  }
  const Var inputs[] = {x};
  return g.MakeOp(std::move(out), inputs,
                  [x, batch, channels, height, width, bins, m, start, stop](Node& n) {
                    Tensor& gx = GradBuffer(x);
                    for (int64_t bc = 0; bc < batch * channels; ++bc) {
                      for (int64_t bi = 0; bi < bins; ++bi) {
                        for (int64_t bj = 0; bj < bins; ++bj) {
                          const int64_t y0 = start(bi, height, bins), y1 = stop(bi, height, bins);
                          const int64_t x0 = start(bj, width, bins), x1 = stop(bj, width, bins);
                          const double gv = n.grad[bc * m + bi * bins + bj] /
                                            static_cast<double>((y1 - y0) * (x1 - x0));
                          for (int64_t yy = y0; yy < y1; ++yy)
                            for (int64_t xx = x0; xx < x1; ++xx)
                              gx[(bc * height + yy) * width + xx] += gv;
                        }
                      }
                    }
                  });
}

Var SoftmaxLast(Graph& g, Var x) {
  const auto [rows, last] = RowsAndLast(x.shape());
  Tensor out = x.value();
  for (int64_t r = 0; r < rows; ++r) {
    double* row = out.data() + r * last;
    const double mx = *std::max_element(row, row + last);
    double sum = 0.0;
    for (int64_t j = 0; j < last; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (int64_t j = 0; j < last; ++j) row[j] /= sum;
  }
  const Var inputs[] = {x};
  return g.MakeOp(std::move(out), inputs, [x, rows, last](Node& n) {
    Tensor& gx = GradBuffer(x);
    for (int64_t r = 0; r < rows; ++r) {
      const double* y = n.value.data() + r * last;
      const double* gy = n.grad.data() + r * last;
      double dot = 0.0;
      for (int64_t j = 0; j < last; ++j) dot += gy[j] * y[j];
      for (int64_t j = 0; j < last; ++j) gx[r * last + j] += y[j] * (gy[j] - dot);
    }
  });
}

Var LogSoftmaxLast(Graph& g, Var x) {
  const auto [rows, last] = RowsAndLast(x.shape());
  Tensor out = x.value();
  for (int64_t r = 0; r < rows; ++r) {
    double* row = out.data() + r * last;
    const double mx = *std::max_element(row, row + last);
    double sum = 0.0;
    for (int64_t j = 0; j < last; ++j) sum += std::exp(row[j] - mx);
    const double lse = mx + std::log(sum);
    for (int64_t j = 0; j < last; ++j) row[j] -= lse;
  }
  const Var inputs[] = {x};
  return g.MakeOp(std::move(out), inputs, [x, rows, last](Node& n) {
    Tensor& gx = GradBuffer(x);
    for (int64_t r = 0; r < rows; ++r) {
      const double* ly = n.value.data() + r * last;
      const double* gy = n.grad.data() + r * last;
      double total = 0.0;
      for (int64_t j = 0; j < last; ++j) total += gy[j];
      for (int64_t j = 0; j < last; ++j) gx[r * last + j] += gy[j] - std::exp(ly[j]) * total;
    }
  });
}

// ---- Linear algebra -------------------------------------------------------

Var Linear(Graph& g, Var x, Var weight, Var bias) {
  RequireRank(weight, 2, "Linear");
  const int64_t out_dim = weight.value().dim(0), in_dim = weight.value().dim(1);
  const auto [rows, last] = RowsAndLast(x.shape());
  if (last != in_dim) {
    throw DomainError("Linear: input width " + std::to_string(last) + " does not match weight " +
                      ShapeToString(weight.shape()));
  }
  if (bias.valid() && bias.value().size() != out_dim) throw DomainError("Linear: bias size");
  Shape out_shape = x.shape();
  out_shape.back() = out_dim;
  Tensor out(out_shape);
  ConstMatMap xm(x.value().data(), rows, in_dim);
  ConstMatMap wm(weight.value().data(), out_dim, in_dim);
  MatMap om(out.data(), rows, out_dim);
  om.noalias() = xm * wm.transpose();
  if (bias.valid()) {
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t j = 0; j < out_dim; ++j) om(r, j) += bias.value()[j];
  }
  std::vector<Var> inputs = {x, weight};
  if (bias.valid()) inputs.push_back(bias);
  return g.MakeOp(std::move(out), inputs, [x, weight, bias, rows, in_dim, out_dim](Node& n) {
    ConstMatMap gm(n.grad.data(), rows, out_dim);
    if (x.requires_grad()) {
      MatMap gx(GradBuffer(x).data(), rows, in_dim);
      gx.noalias() += gm * ConstMatMap(weight.value().data(), out_dim, in_dim);
    }
    if (weight.requires_grad()) {
      MatMap gw(GradBuffer(weight).data(), out_dim, in_dim);
      gw.noalias() += gm.transpose() * ConstMatMap(x.value().data(), rows, in_dim);
    }
    if (bias.valid() && bias.requires_grad()) {
      Tensor& gb = GradBuffer(bias);
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < out_dim; ++j) gb[j] += gm(r, j);
    }
  });
}

Var BatchMatMul(Graph& g, Var a, Var b, bool transpose_a, bool transpose_b) {
  RequireRank(a, 3, "BatchMatMul");
  RequireRank(b, 3, "BatchMatMul");
  const int64_t batch = a.value().dim(0);
  if (b.value().dim(0) != batch) throw DomainError("BatchMatMul: batch mismatch");
  const int64_t ar = a.value().dim(1), ac = a.value().dim(2);
  const int64_t br = b.value().dim(1), bc = b.value().dim(2);
  const int64_t m = transpose_a ? ac : ar, k = transpose_a ? ar : ac;
  const int64_t k2 = transpose_b ? bc : br, p = transpose_b ? br : bc;
  if (k != k2) {
    throw DomainError("BatchMatMul: inner dimensions differ for " + ShapeToString(a.shape()) +
                      " and " + ShapeToString(b.shape()));
  }
  Tensor out(Shape{batch, m, p});
  for (int64_t i = 0; i < batch; ++i) {
    ConstMatMap am(a.value().data() + i * ar * ac, ar, ac);
    ConstMatMap bm(b.value().data() + i * br * bc, br, bc);
    MatMap om(out.data() + i * m * p, m, p);
    if (transpose_a && transpose_b) om.noalias() = am.transpose() * bm.transpose();
    else if (transpose_a) om.noalias() = am.transpose() * bm;
    else if (transpose_b) om.noalias() = am * bm.transpose();
    else om.noalias() = am * bm;
  }
  const Var inputs[] = {a, b};
  return g.MakeOp(std::move(out), inputs,
                  [a, b, batch, ar, ac, br, bc, m, p, transpose_a, transpose_b](Node& n) {
                    for (int64_t i = 0; i < batch; ++i) {
                      ConstMatMap gm(n.grad.data() + i * m * p, m, p);
                      ConstMatMap am(a.value().data() + i * ar * ac, ar, ac);
                      ConstMatMap bm(b.value().data() + i * br * bc, br, bc);
                      // op(A) = A or A^T; d op(A) = G op(B)^T, d op(B) = op(A)^T G.
                      if (a.requires_grad()) {
                        MatMap ga(GradBuffer(a).data() + i * ar * ac, ar, ac);
                        RowMatrix dop_a = transpose_b ? RowMatrix(gm * bm) : RowMatrix(gm * bm.transpose());
                        if (transpose_a) ga.noalias() += dop_a.transpose();
                        else ga.noalias() += dop_a;
                      }
                      if (b.requires_grad()) {
                        MatMap gb(GradBuffer(b).data() + i * br * bc, br, bc);
                        RowMatrix dop_b = transpose_a ? RowMatrix(am * gm) : RowMatrix(am.transpose() * gm);
                        if (transpose_b) gb.noalias() += dop_b.transpose();
                        else gb.noalias() += dop_b;
                      }
                    }
                  });
}

Var Conv2d(Graph& g, Var x, Var weight, Var bias, int stride, int padding) {
  RequireRank(x, 4, "Conv2d");
  RequireRank(weight, 4, "Conv2d");
  if (stride < 1 || padding < 0) throw DomainError("Conv2d: invalid stride/padding");
  const int64_t batch = x.value().dim(0), cin = x.value().dim(1);
  const int64_t height = x.value().dim(2), width = x.value().dim(3);
  const int64_t cout = weight.value().dim(0), ksize = weight.value().dim(2);
  if (weight.value().dim(1) != cin || weight.value().dim(3) != ksize) {
    throw DomainError("Conv2d: weight " + ShapeToString(weight.shape()) +
                      " incompatible with input " + ShapeToString(x.shape()));
  }
  if (bias.valid() && bias.value().size() != cout) throw DomainError("Conv2d: bias size");
  const int64_t out_h = (height + 2 * padding - ksize) / stride + 1;
  const int64_t out_w = (width + 2 * padding - ksize) / stride + 1;
  if (out_h < 1 || out_w < 1) throw DomainError("Conv2d: input smaller than kernel");
  const int64_t positions = out_h * out_w;
  const int64_t patch = cin * ksize * ksize;
  const int64_t cols_width = batch * positions;

  // im2col: row = (ci, ky, kx), column = (b, oy, ox).
  auto cols = std::make_shared<std::vector<double>>(static_cast<size_t>(patch * cols_width), 0.0);
  const double* xv = x.value().data();
  for (int64_t ci = 0; ci < cin; ++ci) {
    for (int64_t ky = 0; ky < ksize; ++ky) {
      for (int64_t kx = 0; kx < ksize; ++kx) {
        double* row = cols->data() + ((ci * ksize + ky) * ksize + kx) * cols_width;
        for (int64_t b = 0; b < batch; ++b) {
          const double* plane = xv + (b * cin + ci) * height * width;
          for (int64_t oy = 0; oy < out_h; ++oy) {
            const int64_t iy = oy * stride - padding + ky;
            if (iy < 0 || iy >= height) continue;
            for (int64_t ox = 0; ox < out_w; ++ox) {
              const int64_t ix = ox * stride - padding + kx;
              if (ix < 0 || ix >= width) continue;
              row[b * positions + oy * out_w + ox] = plane[iy * width + ix];
            }
          }
        }
      }
    }
  }
  RowMatrix result = ConstMatMap(weight.value().data(), cout, patch) *
                     ConstMatMap(cols->data(), patch, cols_width);
  Tensor out(Shape{batch, cout, out_h, out_w});
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t co = 0; co < cout; ++co) {
      const double bv = bias.valid() ? bias.value()[co] : 0.0;
      double* dst = out.data() + (b * cout + co) * positions;
      const double* src = result.data() + co * cols_width + b * positions;
      for (int64_t q = 0; q < positions; ++q) dst[q] = src[q] + bv;
    }
  }
  std::vector<Var> inputs = {x, weight};
  if (bias.valid()) inputs.push_back(bias);
  return g.MakeOp(
      std::move(out), inputs,
      [x, weight, bias, cols, batch, cin, height, width, cout, ksize, out_h, out_w, positions,
       patch, cols_width, stride, padding](Node& n) {
        RowMatrix grad_mat(cout, cols_width);
        for (int64_t b = 0; b < batch; ++b)
          for (int64_t co = 0; co < cout; ++co)
            std::copy_n(n.grad.data() + (b * cout + co) * positions, positions,
                        grad_mat.data() + co * cols_width + b * positions);
        if (weight.requires_grad()) {
          MatMap gw(GradBuffer(weight).data(), cout, patch);
          gw.noalias() += grad_mat * ConstMatMap(cols->data(), patch, cols_width).transpose();
        }
        if (bias.valid() && bias.requires_grad()) {
          Tensor& gb = GradBuffer(bias);
          for (int64_t co = 0; co < cout; ++co) gb[co] += grad_mat.row(co).sum();
        }
        if (x.requires_grad()) {
          RowMatrix dcols = ConstMatMap(weight.value().data(), cout, patch).transpose() * grad_mat;
          double* gx = GradBuffer(x).data();
          for (int64_t ci = 0; ci < cin; ++ci) {
            for (int64_t ky = 0; ky < ksize; ++ky) {
              for (int64_t kx = 0; kx < ksize; ++kx) {
                const double* row = dcols.data() + ((ci * ksize + ky) * ksize + kx) * cols_width;
                for (int64_t b = 0; b < batch; ++b) {
                  double* plane = gx + (b * cin + ci) * height * width;
                  for (int64_t oy = 0; oy < out_h; ++oy) {
                    const int64_t iy = oy * stride - padding + ky;
                    if (iy < 0 || iy >= height) continue;
                    for (int64_t ox = 0; ox < out_w; ++ox) {
                      const int64_t ix = ox * stride - padding + kx;
                      if (ix < 0 || ix >= width) continue;
                      plane[iy * width + ix] += row[b * positions + oy * out_w + ox];
                    }
                  }
                }
              }
            }
          }
        }
      });
}

Var MulSpatialMask(Graph& g, Var z, Var mask) {
  RequireRank(z, 4, "MulSpatialMask");
  RequireRank(mask, 4, "MulSpatialMask");
  const int64_t batch = z.value().dim(0), channels = z.value().dim(1);
  const int64_t plane = z.value().dim(2) * z.value().dim(3);
  if (mask.value().dim(0) != batch || mask.value().dim(1) != 1 ||
      mask.value().dim(2) != z.value().dim(2) || mask.value().dim(3) != z.value().dim(3)) {
    throw DomainError("MulSpatialMask: mask " + ShapeToString(mask.shape()) +
                      " does not broadcast over " + ShapeToString(z.shape()));
  }
  Tensor out = z.value();
  for (int64_t b = 0; b < batch; ++b)
    for (int64_t c = 0; c < channels; ++c)
      for (int64_t q = 0; q < plane; ++q) out[(b * channels + c) * plane + q] *= mask.value()[b * plane + q];
  const Var inputs[] = {z, mask};
  return g.MakeOp(std::move(out), inputs, [z, mask, batch, channels, plane](Node& n) {
    if (z.requires_grad()) {
      Tensor& gz = GradBuffer(z);
      for (int64_t b = 0; b < batch; ++b)
        for (int64_t c = 0; c < channels; ++c)
          for (int64_t q = 0; q < plane; ++q) {
            const int64_t i = (b * channels + c) * plane + q;
            gz[i] += n.grad[i] * mask.value()[b * plane + q];
          }
    }
    if (mask.requires_grad()) {
      Tensor& gm = GradBuffer(mask);
      for (int64_t b = 0; b < batch; ++b)
        for (int64_t c = 0; c < channels; ++c)
          for (int64_t q = 0; q < plane; ++q) {
            const int64_t i = (b * channels + c) * plane + q;
            gm[b * plane + q] += n.grad[i] * z.value()[i];
          }
    }
  });
}

// ---- Losses ----------------------------------------------------------------

namespace {

// Row-wise log-softmax of a (rows, k) array.
std::vector<double> LogSoftmaxRows(const Tensor& logits, int64_t rows, int64_t k) {
  std::vector<double> out(logits.storage());
  for (int64_t r = 0; r < rows; ++r) {
    double* row = out.data() + r * k;
    const double mx = *std::max_element(row, row + k);
    double sum = 0.0;
    for (int64_t j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
    const double lse = mx + std::log(sum);
    for (int64_t j = 0; j < k; ++j) row[j] -= lse;
  }
  return out;
}

}  // namespace

Var CrossEntropy(Graph& g, Var logits, std::span<const int> targets) {
  RequireRank(logits, 2, "CrossEntropy");
  const int64_t rows = logits.value().dim(0), k = logits.value().dim(1);
  if (rows == 0) throw DomainError("CrossEntropy: empty batch");
  if (static_cast<int64_t>(targets.size()) != rows) throw DomainError("CrossEntropy: label count");
  for (int t : targets) {
    if (t < 0 || t >= k) throw DomainError("CrossEntropy: label out of range");
  }
  auto log_probs = std::make_shared<std::vector<double>>(LogSoftmaxRows(logits.value(), rows, k));
  double loss = 0.0;
  for (int64_t r = 0; r < rows; ++r) loss -= (*log_probs)[r * k + targets[r]];
  loss /= static_cast<double>(rows);
  std::vector<int> labels(targets.begin(), targets.end());
  const Var inputs[] = {logits};
  return g.MakeOp(Tensor::Scalar(loss), inputs, [logits, log_probs, labels, rows, k](Node& n) {
    Tensor& gl = GradBuffer(logits);
    const double scale = n.grad[0] / static_cast<double>(rows);
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t j = 0; j < k; ++j) {
        const double p = std::exp((*log_probs)[r * k + j]);
        gl[r * k + j] += scale * (p - (j == labels[r] ? 1.0 : 0.0));
      }
    }
  });
}

Var KlDivergence(Graph& g, Var student_logits, Var teacher_logits) {
  RequireSameShape(student_logits, teacher_logits, "KlDivergence");
  RequireRank(student_logits, 2, "KlDivergence");
  const int64_t rows = student_logits.value().dim(0), k = student_logits.value().dim(1);
  if (rows == 0) throw DomainError("KlDivergence: empty batch");
  auto log_p = std::make_shared<std::vector<double>>(LogSoftmaxRows(student_logits.value(), rows, k));
  auto log_q = std::make_shared<std::vector<double>>(LogSoftmaxRows(teacher_logits.value(), rows, k));
  auto per_row = std::make_shared<std::vector<double>>(static_cast<size_t>(rows), 0.0);
  double loss = 0.0;
  for (int64_t r = 0; r < rows; ++r) {
    double kl = 0.0;
    for (int64_t j = 0; j < k; ++j) {
      const double lp = (*log_p)[r * k + j];
      kl += std::exp(lp) * (lp - (*log_q)[r * k + j]);
    }
    (*per_row)[r] = kl;
    loss += kl;
  }
  loss /= static_cast<double>(rows);
  const Var inputs[] = {student_logits, teacher_logits};
  return g.MakeOp(Tensor::Scalar(loss), inputs,
                  [student_logits, teacher_logits, log_p, log_q, per_row, rows, k](Node& n) {
                    const double scale = n.grad[0] / static_cast<double>(rows);
                    for (int64_t r = 0; r < rows; ++r) {
                      for (int64_t j = 0; j < k; ++j) {
                        const int64_t i = r * k + j;
                        const double p = std::exp((*log_p)[i]);
                        const double q = std::exp((*log_q)[i]);
                        if (student_logits.requires_grad())
                          GradBuffer(student_logits)[i] += scale * p * ((*log_p)[i] - (*log_q)[i] - (*per_row)[r]);
                        if (teacher_logits.requires_grad())
                          GradBuffer(teacher_logits)[i] += scale * (q - p);
                      }
                    }
                  });
}

Var WeightedSum(Graph& g, std::span<const Var> terms, std::span<const double> weights) {
  if (terms.size() != weights.size()) throw DomainError("WeightedSum: size mismatch");
  double total = 0.0;
  for (size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].value().size() != 1) throw DomainError("WeightedSum: terms must be scalars");
    total += weights[i] * terms[i].value()[0];
  }
  std::vector<Var> inputs(terms.begin(), terms.end());
  std::vector<double> w(weights.begin(), weights.end());
  return g.MakeOp(Tensor::Scalar(total), inputs, [inputs, w](Node& n) {
    for (size_t i = 0; i < inputs.size(); ++i) {
      if (inputs[i].requires_grad()) GradBuffer(inputs[i])[0] += w[i] * n.grad[0];
    }
  });
}

}  // namespace dranet::ag
