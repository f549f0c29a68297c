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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <gtest/gtest.h>

#include "../oracles.hpp"
#include "../test_util.hpp"
#include "dranet/errors.hpp"
#include "dranet/evaluation.hpp"
#include "dranet/synthetic.hpp"
#include "json.hpp"

namespace dranet {
namespace {

namespace fs = std::filesystem;
using testing::RandomTensor;

ModelOutputs LogitsFromProbs(const std::vector<double>& pa, const std::vector<double>& po,
                             const std::vector<double>& pra, const std::vector<double>& pro) {
  auto logits = [](const std::vector<double>& p) {
    std::vector<double> l;
    for (double v : p) l.push_back(v > 0 ? std::log(v) : -800.0);
    return Tensor({1, static_cast<int64_t>(p.size())}, l);
  };
  ModelOutputs o;
  o.attr_logits = logits(pa);
  o.obj_logits = logits(po);
  o.rev_attr_logits = logits(pra);
  o.rev_obj_logits = logits(pro);
  return o;
}

ModelOutputs RandomOutputs(int batch, int na, int no, Rng& rng) {
  ModelOutputs o;
  o.attr_logits = RandomTensor({batch, na}, rng, 2.0);
  o.obj_logits = RandomTensor({batch, no}, rng, 2.0);
  o.rev_attr_logits = RandomTensor({batch, na}, rng, 2.0);
  o.rev_obj_logits = RandomTensor({batch, no}, rng, 2.0);
  return o;
}

ScoreMatrix Matrix(int na, int no, std::vector<double> scores, std::set<int> seen,
                   std::vector<std::pair<int, int>> truth) {
  ScoreMatrix m;
  m.num_attributes = na;
  m.num_objects = no;
  m.scores = std::move(scores);
  m.seen_mask.assign(static_cast<size_t>(na * no), 0);
  for (int p : seen) m.seen_mask[p] = 1;
  for (const auto& [a, o] : truth) m.truth.push_back({a, o});
  return m;
}

std::vector<std::pair<int, int>> Truth(const ScoreMatrix& m) {
  std::vector<std::pair<int, int>> t;
  for (const auto& l : m.truth) t.emplace_back(l.attribute_id, l.object_id);
  return t;
}

// Random instance with at least one seen-truth and one unseen-truth sample.
ScoreMatrix RandomMatrix(Rng& rng, bool dyadic) {
  const int na = 2 + static_cast<int>(rng.Below(3));
  const int no = 2 + static_cast<int>(rng.Below(3));
  const int np = na * no;
  const int rows = 2 + static_cast<int>(rng.Below(9));
  std::vector<int> ids(np);
  for (int i = 0; i < np; ++i) ids[i] = i;
  rng.Shuffle(ids);
  const int num_seen = 1 + static_cast<int>(rng.Below(np - 1));
  std::set<int> seen(ids.begin(), ids.begin() + num_seen);
  std::vector<double> scores(static_cast<size_t>(rows * np));
  for (double& s : scores) s = dyadic ? static_cast<double>(rng.Below(64)) / 64.0 : rng.Uniform();
  std::vector<std::pair<int, int>> truth;
  for (int r = 0; r < rows; ++r) {
    int pair = static_cast<int>(rng.Below(np));
    if (r == 0) pair = ids[0];
    if (r == 1) pair = ids[num_seen];
    truth.emplace_back(pair / no, pair % no);
  }
  return Matrix(na, no, std::move(scores), seen, std::move(truth));
}

// ---- fusion ----------------------------------------------------------------

TEST(FusionTest, HandExample) {
  const ModelOutputs o = LogitsFromProbs({0.6, 0.4}, {1.0, 0.0}, {0.2, 0.8}, {0.5, 0.5});
  const Tensor s = FusePredictions(o, {0.5, 0.0}, FusionMode::kWeightedSumProduct);
  ASSERT_EQ(s.shape(), (Shape{1, 4}));
  const double expected[] = {0.4, 0.0, 0.6, 0.0};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(s[i], expected[i], 1e-12) << i;
}

TEST(FusionTest, ZeroEtaIsOuterProduct) {
  Rng rng(3);
  const ModelOutputs o = RandomOutputs(5, 3, 4, rng);
  const Tensor s = FusePredictions(o, {0.0, 0.0}, FusionMode::kWeightedSumProduct);
  for (int r = 0; r < 5; ++r) {
    const auto pa = oracle::Probabilities(o.attr_logits, r);
    const auto po = oracle::Probabilities(o.obj_logits, r);
    double sum = 0.0;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 4; ++b) {
        EXPECT_NEAR(s.at({r, a * 4 + b}), pa[a] * po[b], 1e-15);
        sum += s.at({r, a * 4 + b});
      }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(FusionTest, WeightedRowsSumToOne) {
  Rng rng(4);
  const ModelOutputs o = RandomOutputs(6, 4, 3, rng);
  const Tensor s = FusePredictions(o, {0.1, 0.3}, FusionMode::kWeightedSumProduct);
  for (int r = 0; r < 6; ++r) {
    double sum = 0.0;
    for (int p = 0; p < 12; ++p) sum += s.at({r, p});
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(FusionTest, ProductSumMatchesDefinition) {
  Rng rng(5);
  const ModelOutputs o = RandomOutputs(3, 2, 3, rng);
  const Tensor s = FusePredictions(o, {0.7, 0.7}, FusionMode::kProductSum);
  for (int r = 0; r < 3; ++r) {
    const auto pa = oracle::Probabilities(o.attr_logits, r), po = oracle::Probabilities(o.obj_logits, r);
    const auto pra = oracle::Probabilities(o.rev_attr_logits, r), pro = oracle::Probabilities(o.rev_obj_logits, r);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 3; ++b) EXPECT_NEAR(s.at({r, a * 3 + b}), pa[a] * po[b] + pra[a] * pro[b], 1e-15);
  }
}

TEST(FusionTest, ModesAgreeUpToFactorTwo) {
  Rng rng(6);
  ModelOutputs o = RandomOutputs(8, 3, 3, rng);
  o.rev_attr_logits = o.attr_logits;
  o.rev_obj_logits = o.obj_logits;
  const Tensor w = FusePredictions(o, {0.5, 0.5}, FusionMode::kWeightedSumProduct);
  const Tensor p = FusePredictions(o, {0.5, 0.5}, FusionMode::kProductSum);
  for (int64_t i = 0; i < w.size(); ++i) EXPECT_NEAR(p[i], 2.0 * w[i], 1e-15);

  std::vector<CompositionLabel> truth;
  for (int r = 0; r < 8; ++r) truth.push_back({r % 3, (r * 2) % 3});
  DatasetSplit split;
  split.seen_pairs = {0, 1, 2, 4, 7, 8};
  split.unseen_pairs = {3, 5, 6};
  const Evaluation ew = EvaluateOutputs(o, truth, split, {0.5, 0.5}, FusionMode::kWeightedSumProduct, 10);
  const Evaluation ep = EvaluateOutputs(o, truth, split, {0.5, 0.5}, FusionMode::kProductSum, 10);
  EXPECT_EQ(ew.report, ep.report);
}

TEST(FusionTest, RejectsBadWeightsAndShapes) {
  Rng rng(7);
  const ModelOutputs o = RandomOutputs(2, 2, 2, rng);
  EXPECT_THROW(FusePredictions(o, {1.5, 0.0}, FusionMode::kWeightedSumProduct), ConfigError);
  EXPECT_THROW(FusePredictions(o, {0.0, -0.1}, FusionMode::kWeightedSumProduct), ConfigError);
  ModelOutputs bad = o;
  bad.rev_obj_logits = RandomTensor({3, 2}, rng);
  EXPECT_THROW(FusePredictions(bad, {0.1, 0.3}, FusionMode::kWeightedSumProduct), DomainError);
}

// ---- calibration sweep -----------------------------------------------------

TEST(CalibrationSweepTest, HandToyMatchesBruteForce) {
  // 2 x 2 vocabulary, pairs 0 and 3 seen.
  const ScoreMatrix m = Matrix(2, 2,
                               {0.9, 0.5, 0.1, 0.2,   // truth (0,0) seen
                                0.4, 0.6, 0.3, 0.1,   // truth (0,1) unseen, margin 0.2
                                0.2, 0.3, 0.35, 0.5}, // truth (1,0) unseen, margin -0.15
                               {0, 3}, {{0, 0}, {0, 1}, {1, 0}});
  const EvaluationCurve c = CalibrationSweep(m, 2);
  const oracle::SweepReference ref = oracle::BruteForceSweep(m.scores, m.seen_mask, Truth(m), 2, 2, 2);
  ASSERT_EQ(c.points.size(), ref.points.size());
  for (size_t i = 0; i < c.points.size(); ++i) {
    EXPECT_EQ(c.points[i].bias, ref.points[i].bias);
    EXPECT_EQ(c.points[i].seen_acc, ref.points[i].seen_acc);
    EXPECT_EQ(c.points[i].unseen_acc, ref.points[i].unseen_acc);
  }
  // Biases: -sentinel, -0.15, 0.2, +sentinel with best scores spanning 0.35 to 0.9.
  ASSERT_EQ(c.points.size(), 4u);
  EXPECT_NEAR(c.points[0].bias, -1.55, 1e-12);
  EXPECT_NEAR(c.points[1].bias, -0.15, 1e-12);
  EXPECT_NEAR(c.points[2].bias, 0.2, 1e-12);
  EXPECT_NEAR(c.points[3].bias, 1.55, 1e-12);
  EXPECT_EQ(c.points[3].seen_acc, 1.0);
  EXPECT_EQ(c.points[0].unseen_acc, 1.0);
}

TEST(CalibrationSweepTest, RandomInstancesMatchBruteForceExactly) {
  for (int inst = 0; inst < 20; ++inst) {
    Rng rng(DeriveSeed({11, static_cast<uint64_t>(inst)}));
    const ScoreMatrix m = RandomMatrix(rng, false);
    const int nb = 1 + static_cast<int>(rng.Below(6));
    const EvaluationCurve c = CalibrationSweep(m, nb);
    const MetricsReport r = ComputeMetrics(c, m);
    const oracle::SweepReference ref =
        oracle::BruteForceSweep(m.scores, m.seen_mask, Truth(m), m.num_attributes, m.num_objects, nb);
    ASSERT_EQ(c.points.size(), ref.points.size()) << inst;
    for (size_t i = 0; i < c.points.size(); ++i) {
      EXPECT_EQ(c.points[i].bias, ref.points[i].bias) << inst;
      EXPECT_EQ(c.points[i].seen_acc, ref.points[i].seen_acc) << inst;
      EXPECT_EQ(c.points[i].unseen_acc, ref.points[i].unseen_acc) << inst;
    }
    EXPECT_EQ(r.S, ref.S) << inst;
    EXPECT_EQ(r.U, ref.U) << inst;
    EXPECT_EQ(r.HM, ref.HM) << inst;
    EXPECT_EQ(r.AUC, ref.AUC) << inst;
    EXPECT_EQ(r.attr_top1, ref.attr_top1) << inst;
    EXPECT_EQ(r.obj_top1, ref.obj_top1) << inst;
  }
}

TEST(CalibrationSweepTest, SentinelEndpoints) {
  for (int inst = 0; inst < 10; ++inst) {
    Rng rng(DeriveSeed({12, static_cast<uint64_t>(inst)}));
    const ScoreMatrix m = RandomMatrix(rng, false);
    const EvaluationCurve c = CalibrationSweep(m, 5);
    EXPECT_EQ(c.points.front().seen_acc, 0.0);
    EXPECT_EQ(c.points.back().unseen_acc, 0.0);
    for (const SampleSummary& s : Summarize(m)) {
      EXPECT_FALSE(m.seen_mask[s.Predict(c.points.front().bias)]);
      EXPECT_TRUE(m.seen_mask[s.Predict(c.points.back().bias)]);
    }
  }
}

TEST(CalibrationSweepTest, MonotoneInBias) {
  for (int inst = 0; inst < 20; ++inst) {
    Rng rng(DeriveSeed({13, static_cast<uint64_t>(inst)}));
    const ScoreMatrix m = RandomMatrix(rng, false);
    const EvaluationCurve c = CalibrationSweep(m, 8);
    for (size_t i = 1; i < c.points.size(); ++i) {
      EXPECT_LE(c.points[i - 1].bias, c.points[i].bias);
      EXPECT_LE(c.points[i - 1].seen_acc, c.points[i].seen_acc);
      EXPECT_GE(c.points[i - 1].unseen_acc, c.points[i].unseen_acc);
    }
  }
}

TEST(CalibrationSweepTest, MetricBounds) {
  for (int inst = 0; inst < 20; ++inst) {
    Rng rng(DeriveSeed({14, static_cast<uint64_t>(inst)}));
    const ScoreMatrix m = RandomMatrix(rng, false);
    const EvaluationCurve c = CalibrationSweep(m, 6);
    const MetricsReport r = ComputeMetrics(c, m);
    EXPECT_LE(r.AUC, r.S * r.U + 1e-15);
    for (const CurvePoint& p : c.points) {
      if (p.seen_acc + p.unseen_acc == 0) continue;
      EXPECT_LE(2 * p.seen_acc * p.unseen_acc / (p.seen_acc + p.unseen_acc),
                2 * std::min(p.seen_acc, p.unseen_acc) + 1e-15);
    }
  }
}

TEST(CalibrationSweepTest, ConstantShiftLeavesReportUnchanged) {
  for (int inst = 0; inst < 20; ++inst) {
    Rng rng(DeriveSeed({15, static_cast<uint64_t>(inst)}));
    const ScoreMatrix m = RandomMatrix(rng, true);
    ScoreMatrix shifted = m;
    for (double& s : shifted.scores) s += 1.0;
    const MetricsReport a = ComputeMetrics(CalibrationSweep(m, 7), m);
    const MetricsReport b = ComputeMetrics(CalibrationSweep(shifted, 7), shifted);
    EXPECT_EQ(a, b) << inst;
  }
}

TEST(CalibrationSweepTest, TiesGoToLowerPairId) {
  const ScoreMatrix m = Matrix(1, 3, {0.5, 0.5, 0.5, 0.2, 0.7, 0.7}, {0}, {{0, 0}, {0, 1}});
  const auto s = Summarize(m);
  EXPECT_EQ(s[0].best_unseen_pair, 1);
  EXPECT_EQ(s[0].Predict(0.0), 0);
  EXPECT_EQ(s[1].Predict(0.0), 1);
  EXPECT_EQ(s[1].Predict(0.5), 0);
}

TEST(CalibrationSweepTest, EmptySubsetsAndBadCountsThrow) {
  const ScoreMatrix only_seen = Matrix(2, 2, {0.1, 0.2, 0.3, 0.4}, {0, 1}, {{0, 0}});
  EXPECT_THROW(CalibrationSweep(only_seen, 5), DomainError);
  const ScoreMatrix only_unseen = Matrix(2, 2, {0.1, 0.2, 0.3, 0.4}, {0, 1}, {{1, 1}});
  EXPECT_THROW(CalibrationSweep(only_unseen, 5), DomainError);
  const ScoreMatrix ok = Matrix(2, 2, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8}, {0, 1}, {{0, 0}, {1, 1}});
  EXPECT_THROW(CalibrationSweep(ok, 0), DomainError);
  EXPECT_NO_THROW(CalibrationSweep(ok, 1));
}

TEST(ScoreMatrixTest, Validation) {
  ScoreMatrix m = Matrix(2, 2, {0.1, 0.2, 0.3, 0.4}, {0}, {{0, 0}});
  EXPECT_NO_THROW(m.Validate());
  m.scores[2] = NAN;
  EXPECT_THROW(m.Validate(), DomainError);
  m = Matrix(2, 2, {0.1, 0.2, 0.3}, {0}, {{0, 0}});
  EXPECT_THROW(m.Validate(), DomainError);
  m = Matrix(2, 2, {0.1, 0.2, 0.3, 0.4}, {0}, {{2, 0}});
  EXPECT_THROW(m.Validate(), DomainError);
}

// ---- metrics ---------------------------------------------------------------

// Piecewise-linear interpolation through the sorted points, integrated with a
// fine midpoint rule.
double NumericArea(std::vector<std::pair<double, double>> pts, int steps) {
  std::sort(pts.begin(), pts.end());
  double area = 0.0;
  const double lo = pts.front().first, hi = pts.back().first;
  const double h = (hi - lo) / steps;
  for (int i = 0; i < steps; ++i) {
    const double x = lo + (i + 0.5) * h;
    size_t k = 0;
    while (k + 2 < pts.size() && pts[k + 1].first < x) ++k;
    const auto [x0, y0] = pts[k];
    const auto [x1, y1] = pts[k + 1];
    area += h * (y0 + (y1 - y0) * (x - x0) / (x1 - x0));
  }
  return area;
}

TEST(MetricsTest, HandCurveAreaMatchesNumericIntegration) {
  EvaluationCurve c;
  c.points = {{0.0, 0.0, 1.0}, {1.0, 1.0, 0.0}, {0.5, 0.5, 0.5}};
  const MetricsReport r = CurveMetrics(c);
  EXPECT_EQ(r.S, 1.0);
  EXPECT_EQ(r.U, 1.0);
  EXPECT_DOUBLE_EQ(r.HM, 0.5);
  const double numeric = NumericArea({{0.0, 1.0}, {0.5, 0.5}, {1.0, 0.0}}, 200000);
  EXPECT_NEAR(numeric, 0.5, 1e-9);
  EXPECT_NEAR(r.AUC, numeric, 1e-9);
}

TEST(MetricsTest, FlatCurveHasZeroArea) {
  EvaluationCurve c;
  c.points = {{-1.0, 0.0, 0.0}, {0.0, 0.3, 0.0}, {1.0, 0.8, 0.0}};
  const MetricsReport r = CurveMetrics(c);
  EXPECT_EQ(r.U, 0.0);
  EXPECT_EQ(r.HM, 0.0);
  EXPECT_EQ(r.AUC, 0.0);
  EXPECT_EQ(r.S, 0.8);
}

TEST(MetricsTest, DuplicateSeenKeepsMaxUnseen) {
  EvaluationCurve c;
  c.points = {{0.0, 0.0, 0.6}, {1.0, 0.0, 0.8}, {2.0, 1.0, 0.0}};
  EXPECT_DOUBLE_EQ(CurveArea(c), 0.4);
}

// ---- model evaluation ------------------------------------------------------

class EvaluateModelTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(testing::TempDir("eval_model"));
    GeneratorConfig g;
    g.image_size = 32;
    g.object_shapes = {"circle", "square", "triangle"};
    g.attribute_styles = {"red", "green", "blue"};
    g.samples_per_pair = 1;
    g.test_samples_per_pair = 2;
    SplitSpec spec;
    spec.unseen_fraction = 0.3;
    dataset_ = new LoadedDataset(GenerateDataset(g, spec, *dir_));
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete dataset_;
    delete dir_;
  }

  static ModelConfig Config() {
    ModelConfig c;
    c.encoder = {{8, 2}, {8, 2}};
    c.num_attributes = 3;
    c.num_objects = 3;
    c.classifier_hidden = 6;
    c.seed = 9;
    return c;
  }

  static ModelParams Params(const ModelConfig& c) {
    ModelParams p = InitParams(c);
    Rng rng(21);
    for (auto& e : p.entries())
      if (e.value.size() == 1 || e.name.find("bias") != std::string::npos)
        for (int64_t i = 0; i < e.value.size(); ++i) e.value[i] = 0.5 * rng.Normal();
    return p;
  }

  static fs::path* dir_;
  static LoadedDataset* dataset_;
};

fs::path* EvaluateModelTest::dir_ = nullptr;
LoadedDataset* EvaluateModelTest::dataset_ = nullptr;

TEST_F(EvaluateModelTest, BatchedMatchesMonolithicReference) {
  const ModelConfig c = Config();
  const ModelParams p = Params(c);
  const FusionWeights fusion{0.1, 0.3};
  const Evaluation e = EvaluateModel(p, c, *dataset_, fusion, 9, 3);

  const auto& test = dataset_->split.test;
  const int64_t n = static_cast<int64_t>(test.size());
  Tensor images({n, 3, 32, 32});
  std::vector<std::pair<int, int>> truth;
  for (int64_t i = 0; i < n; ++i) {
    const Tensor img = LoadSampleImage(*dataset_, test[i]);
    std::copy(img.data(), img.data() + img.size(), images.data() + i * img.size());
    truth.emplace_back(test[i].label.attribute_id, test[i].label.object_id);
  }
  const Tensor scores = FusePredictions(Forward(images, p, c), fusion, c.fusion_mode);
  std::vector<uint8_t> seen(9, 0);
  for (int s : dataset_->split.seen_pairs) seen[s] = 1;
  const oracle::SweepReference ref = oracle::BruteForceSweep(
      std::vector<double>(scores.data(), scores.data() + scores.size()), seen, truth, 3, 3, 9);
  EXPECT_NEAR(e.report.S, ref.S, 1e-9);
  EXPECT_NEAR(e.report.U, ref.U, 1e-9);
  EXPECT_NEAR(e.report.HM, ref.HM, 1e-9);
  EXPECT_NEAR(e.report.AUC, ref.AUC, 1e-9);
  EXPECT_NEAR(e.report.attr_top1, ref.attr_top1, 1e-9);
  EXPECT_NEAR(e.report.obj_top1, ref.obj_top1, 1e-9);
  ASSERT_EQ(e.curve.points.size(), ref.points.size());
  for (size_t i = 0; i < ref.points.size(); ++i) EXPECT_NEAR(e.curve.points[i].bias, ref.points[i].bias, 1e-9);

  const Evaluation again = EvaluateModel(p, c, *dataset_, fusion, 9, 5);
  EXPECT_EQ(again.report, e.report);
}

TEST_F(EvaluateModelTest, ScoreTestSetFeedsSameEvaluation) {
  const ModelConfig c = Config();
  const ModelParams p = Params(c);
  const ModelOutputs out = ScoreTestSet(p, c, *dataset_, 4);
  std::vector<CompositionLabel> truth;
  for (const auto& s : dataset_->split.test) truth.push_back(s.label);
  const Evaluation a = EvaluateOutputs(out, truth, dataset_->split, {0.1, 0.3}, c.fusion_mode, 9);
  const Evaluation b = EvaluateModel(p, c, *dataset_, {0.1, 0.3}, 9, 4);
  EXPECT_EQ(a.report, b.report);
}

TEST_F(EvaluateModelTest, UniformLogitsGiveChanceAttributeAccuracy) {
  const ModelConfig c = Config();
  ModelParams p = Params(c);
  for (auto& e : p.entries())
    if (e.name.rfind("cls.", 0) == 0 && e.name.find("fc2") != std::string::npos) e.value = Tensor(e.value.shape());
  const Evaluation e = EvaluateModel(p, c, *dataset_, {0.1, 0.3}, 5);
  EXPECT_DOUBLE_EQ(e.report.attr_top1, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(e.report.obj_top1, 1.0 / 3.0);
}

TEST_F(EvaluateModelTest, RejectsBadBatchSizeAndParams) {
  const ModelConfig c = Config();
  const ModelParams p = Params(c);
  EXPECT_THROW(EvaluateModel(p, c, *dataset_, {0.1, 0.3}, 5, 0), ConfigError);
  ModelConfig other = c;
  other.classifier_hidden = 4;
  EXPECT_THROW(EvaluateModel(p, other, *dataset_, {0.1, 0.3}, 5), ConfigError);
}

// ---- serialization ---------------------------------------------------------

TEST(SerializationTest, ReportJsonAndCurveCsv) {
  MetricsReport r;
  r.S = 0.5;
  r.U = 0.25;
  r.HM = 1.0 / 3.0;
  r.AUC = 0.1;
  r.attr_top1 = 0.75;
  r.obj_top1 = 0.875;
  const std::string json = ReportToJson(r, 50, {0.1, 0.3}, FusionMode::kWeightedSumProduct);
  for (const char* key : {"\"S\"", "\"U\"", "\"HM\"", "\"AUC\"", "\"attr_top1\"", "\"obj_top1\"", "\"num_biases\"",
                          "\"fusion\"", "\"eta1\"", "\"eta2\"", "\"mode\"", "weighted_sum_product"})
    EXPECT_NE(json.find(key), std::string::npos) << key;
  const nlohmann::json parsed = nlohmann::json::parse(json);
  EXPECT_EQ(parsed["HM"].get<double>(), 1.0 / 3.0);
  EXPECT_EQ(parsed["num_biases"].get<int>(), 50);
  EXPECT_EQ(parsed["fusion"]["eta2"].get<double>(), 0.3);

  EvaluationCurve c;
  c.points = {{-1.5, 0.0, 1.0}, {0.25, 0.5, 0.5}};
  EXPECT_EQ(CurveToCsv(c), "bias,seen_acc,unseen_acc\n-1.5,0,1\n0.25,0.5,0.5\n");
}

}  // namespace
}  // namespace dranet
