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

#include "dranet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "dranet/errors.hpp"
#include "json.hpp"

namespace dranet {
namespace {

// Row-wise softmax of a (B, K) logit array.
std::vector<double> Softmax(const Tensor& logits) {
  const int64_t rows = logits.dim(0), k = logits.dim(1);
  std::vector<double> out(static_cast<size_t>(rows * k));
  for (int64_t r = 0; r < rows; ++r) {
    const double* x = logits.data() + r * k;
    double* y = out.data() + r * k;
    const double mx = *std::max_element(x, x + k);
    double sum = 0.0;
    for (int64_t j = 0; j < k; ++j) sum += (y[j] = std::exp(x[j] - mx));
    for (int64_t j = 0; j < k; ++j) y[j] /= sum;
  }
  return out;
}

void CheckLogits(const Tensor& t, int64_t batch, const char* name) {
  if (t.rank() != 2 || t.dim(0) != batch) {
    throw DomainError(std::string("fusion: bad shape for ") + name + ": " + ShapeToString(t.shape()));
  }
  if (!t.AllFinite()) throw DomainError(std::string("fusion: non-finite ") + name);
}

double Ratio(int64_t num, int64_t den) { return den == 0 ? 0.0 : static_cast<double>(num) / den; }

}  // namespace

void FusionWeights::Validate() const {
  if (!(eta1 >= 0.0 && eta1 <= 1.0) || !(eta2 >= 0.0 && eta2 <= 1.0)) {
    throw ConfigError("fusion weights must lie in [0, 1]");
  }
}

Tensor FusePredictions(const ModelOutputs& outputs, const FusionWeights& weights, FusionMode mode) {
  weights.Validate();
  const int64_t batch = outputs.attr_logits.dim(0);
  CheckLogits(outputs.attr_logits, batch, "attr_logits");
  CheckLogits(outputs.obj_logits, batch, "obj_logits");
  CheckLogits(outputs.rev_attr_logits, batch, "rev_attr_logits");
  CheckLogits(outputs.rev_obj_logits, batch, "rev_obj_logits");
  const int64_t na = outputs.attr_logits.dim(1), no = outputs.obj_logits.dim(1);
  if (outputs.rev_attr_logits.dim(1) != na || outputs.rev_obj_logits.dim(1) != no) {
    throw DomainError("fusion: reversal classifier widths disagree");
  }
  const std::vector<double> pa = Softmax(outputs.attr_logits);
  const std::vector<double> po = Softmax(outputs.obj_logits);
  const std::vector<double> pra = Softmax(outputs.rev_attr_logits);
  const std::vector<double> pro = Softmax(outputs.rev_obj_logits);

  Tensor scores({batch, na * no});
  std::vector<double> fa(static_cast<size_t>(na)), fo(static_cast<size_t>(no));
  for (int64_t b = 0; b < batch; ++b) {
    double* row = scores.data() + b * na * no;
    const double* a = pa.data() + b * na;
    const double* ra = pra.data() + b * na;
    const double* o = po.data() + b * no;
    const double* ro = pro.data() + b * no;
    if (mode == FusionMode::kWeightedSumProduct) {
      for (int64_t i = 0; i < na; ++i) fa[i] = (1.0 - weights.eta1) * a[i] + weights.eta1 * ra[i];
      for (int64_t j = 0; j < no; ++j) fo[j] = (1.0 - weights.eta2) * o[j] + weights.eta2 * ro[j];
      for (int64_t i = 0; i < na; ++i) {
        for (int64_t j = 0; j < no; ++j) row[i * no + j] = fa[i] * fo[j];
      }
    } else {
      for (int64_t i = 0; i < na; ++i) {
        for (int64_t j = 0; j < no; ++j) row[i * no + j] = a[i] * o[j] + ra[i] * ro[j];
      }
    }
  }
  return scores;
}

void ScoreMatrix::Validate() const {
  if (num_attributes < 1 || num_objects < 1) throw DomainError("score matrix: empty vocabulary");
  if (static_cast<int64_t>(scores.size()) != rows() * num_pairs()) {
    throw DomainError("score matrix: expected " + std::to_string(rows() * num_pairs()) + " scores, got " +
                      std::to_string(scores.size()));
  }
  if (static_cast<int>(seen_mask.size()) != num_pairs()) throw DomainError("score matrix: seen_mask size mismatch");
  for (double s : scores) {
    if (!std::isfinite(s)) throw DomainError("score matrix: non-finite score");
  }
  for (const auto& t : truth) {
    if (t.attribute_id < 0 || t.attribute_id >= num_attributes || t.object_id < 0 || t.object_id >= num_objects) {
      throw DomainError("score matrix: truth label outside the vocabulary");
    }
  }
}

ScoreMatrix MakeScoreMatrix(const Tensor& scores, const std::vector<CompositionLabel>& truth,
                            const DatasetSplit& split, int num_attributes, int num_objects) {
  ScoreMatrix m;
  m.num_attributes = num_attributes;
  m.num_objects = num_objects;
  m.scores = scores.storage();
  m.truth = truth;
  m.seen_mask.assign(static_cast<size_t>(num_attributes * num_objects), 0);
  for (int p : split.seen_pairs) {
    if (p < 0 || p >= m.num_pairs()) throw DomainError("score matrix: seen pair outside the vocabulary");
    m.seen_mask[p] = 1;
  }
  m.Validate();
  return m;
}

int SampleSummary::Predict(double bias) const {
  if (best_seen_pair < 0) return best_unseen_pair;
  if (best_unseen_pair < 0) return best_seen_pair;
  const double shifted = best_seen + bias;
  if (shifted > best_unseen) return best_seen_pair;
  if (shifted < best_unseen) return best_unseen_pair;
  return std::min(best_seen_pair, best_unseen_pair);
}

std::vector<SampleSummary> Summarize(const ScoreMatrix& scores) {
  scores.Validate();
  const int na = scores.num_attributes, no = scores.num_objects;
  std::vector<SampleSummary> out;
  out.reserve(scores.truth.size());
  std::vector<double> attr_mass(static_cast<size_t>(na)), obj_mass(static_cast<size_t>(no));
  for (int64_t r = 0; r < scores.rows(); ++r) {
    SampleSummary s;
    s.truth = scores.truth[r];
    s.truth_pair = EncodePair(s.truth, no);
    s.truth_seen = scores.seen_mask[s.truth_pair] != 0;
    std::fill(attr_mass.begin(), attr_mass.end(), 0.0);
    std::fill(obj_mass.begin(), obj_mass.end(), 0.0);
    for (int p = 0; p < scores.num_pairs(); ++p) {
      const double v = scores.at(r, p);
      attr_mass[p / no] += v;
      obj_mass[p % no] += v;
      if (scores.seen_mask[p]) {
        if (s.best_seen_pair < 0 || v > s.best_seen) {
          s.best_seen = v;
          s.best_seen_pair = p;
        }
      } else if (s.best_unseen_pair < 0 || v > s.best_unseen) {
        s.best_unseen = v;
        s.best_unseen_pair = p;
      }
    }
    s.attr_pred = static_cast<int>(std::max_element(attr_mass.begin(), attr_mass.end()) - attr_mass.begin());
    s.obj_pred = static_cast<int>(std::max_element(obj_mass.begin(), obj_mass.end()) - obj_mass.begin());
    out.push_back(s);
  }
  return out;
}

EvaluationCurve CalibrationSweep(const ScoreMatrix& scores, int num_biases) {
  return CalibrationSweep(Summarize(scores), num_biases);
}

EvaluationCurve CalibrationSweep(const std::vector<SampleSummary>& samples, int num_biases) {
  if (num_biases < 1) throw DomainError("calibration sweep: num_biases must be at least 1");
  int64_t num_seen = 0, num_unseen = 0;
  double lo = 0.0, hi = 0.0;
  bool first = true;
  std::vector<double> margins;
  for (const auto& s : samples) {
    (s.truth_seen ? num_seen : num_unseen) += 1;
    for (int k = 0; k < 2; ++k) {
      const bool seen_side = k == 0;
      if ((seen_side ? s.best_seen_pair : s.best_unseen_pair) < 0) continue;
      const double v = seen_side ? s.best_seen : s.best_unseen;
      lo = first ? v : std::min(lo, v);
      hi = first ? v : std::max(hi, v);
      first = false;
    }
    if (!s.truth_seen && s.best_seen_pair >= 0 && s.best_unseen_pair >= 0) {
      margins.push_back(s.best_unseen - s.best_seen);
    }
  }
  if (num_seen == 0) throw DomainError("calibration sweep: no test sample has a seen pair as truth");
  if (num_unseen == 0) throw DomainError("calibration sweep: no test sample has an unseen pair as truth");

  std::sort(margins.begin(), margins.end());
  const double sentinel = (hi - lo) + 1.0;
  std::vector<double> biases = {-sentinel};
  const int64_t n = static_cast<int64_t>(margins.size());
  for (int k = 0; k < num_biases && n > 0; ++k) {
    const int64_t idx = num_biases == 1 ? (n - 1) / 2
                                        : std::llround(static_cast<double>(k) * (n - 1) / (num_biases - 1));
    biases.push_back(margins[idx]);
  }
  biases.push_back(sentinel);
  std::sort(biases.begin(), biases.end());

  EvaluationCurve curve;
  curve.points.reserve(biases.size());
  for (double b : biases) {
    int64_t seen_hits = 0, unseen_hits = 0;
    for (const auto& s : samples) {
      if (s.Predict(b) != s.truth_pair) continue;
      (s.truth_seen ? seen_hits : unseen_hits) += 1;
    }
    curve.points.push_back({b, Ratio(seen_hits, num_seen), Ratio(unseen_hits, num_unseen)});
  }
  return curve;
}

MetricsReport CurveMetrics(const EvaluationCurve& curve) {
  if (curve.points.empty()) throw DomainError("metrics: empty curve");
  MetricsReport r;
  for (const auto& p : curve.points) {
    r.S = std::max(r.S, p.seen_acc);
    r.U = std::max(r.U, p.unseen_acc);
    const double denom = p.seen_acc + p.unseen_acc;
    if (denom > 0.0) r.HM = std::max(r.HM, 2.0 * p.seen_acc * p.unseen_acc / denom);
  }
  r.AUC = CurveArea(curve);
  return r;
}

double CurveArea(const EvaluationCurve& curve) {
  std::vector<std::pair<double, double>> pts;
  pts.reserve(curve.points.size());
  for (const auto& p : curve.points) pts.emplace_back(p.seen_acc, p.unseen_acc);
  std::sort(pts.begin(), pts.end());
  std::vector<std::pair<double, double>> unique;
  for (const auto& p : pts) {
    if (!unique.empty() && unique.back().first == p.first) {
      unique.back().second = std::max(unique.back().second, p.second);
    } else {
      unique.push_back(p);
    }
  }
  double area = 0.0;
  for (size_t i = 1; i < unique.size(); ++i) {
    area += (unique[i].first - unique[i - 1].first) * (unique[i].second + unique[i - 1].second) / 2.0;
  }
  return area;
}

MetricsReport ComputeMetrics(const EvaluationCurve& curve, const ScoreMatrix& scores) {
  return ComputeMetrics(curve, Summarize(scores));
}

MetricsReport ComputeMetrics(const EvaluationCurve& curve, const std::vector<SampleSummary>& samples) {
  MetricsReport r = CurveMetrics(curve);
  int64_t attr_hits = 0, obj_hits = 0;
  for (const auto& s : samples) {
    attr_hits += s.attr_pred == s.truth.attribute_id;
    obj_hits += s.obj_pred == s.truth.object_id;
  }
  const int64_t n = static_cast<int64_t>(samples.size());
  r.attr_top1 = Ratio(attr_hits, n);
  r.obj_top1 = Ratio(obj_hits, n);
  return r;
}

namespace {

// Calls fn(batch_outputs, batch_labels) for consecutive test batches.
template <typename Fn>
void ForEachTestBatch(const ModelParams& params, const ModelConfig& config, const LoadedDataset& dataset,
                      int batch_size, Fn fn) {
  if (batch_size < 1) throw ConfigError("evaluation batch size must be positive");
  config.Validate();
  ValidateParams(params, config);
  const auto& test = dataset.split.test;
  if (test.empty()) throw DataError("evaluation: the test split is empty");
  for (size_t start = 0; start < test.size(); start += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(test.size(), start + static_cast<size_t>(batch_size));
    std::vector<Tensor> images;
    std::vector<CompositionLabel> labels;
    for (size_t i = start; i < end; ++i) {
      images.push_back(LoadSampleImage(dataset, test[i]));
      labels.push_back(test[i].label);
    }
    const Shape& s = images.front().shape();
    Tensor data({static_cast<int64_t>(images.size()), s[0], s[1], s[2]});
    for (size_t i = 0; i < images.size(); ++i) {
      if (images[i].shape() != s) throw DataError("evaluation: test images differ in size");
      std::copy(images[i].data(), images[i].data() + images[i].size(), data.data() + i * images[i].size());
    }
    fn(Forward(ImageBatch(std::move(data), labels), params, config), labels);
  }
}

void AppendRows(Tensor& dst, const Tensor& src) {
  if (dst.empty()) {
    dst = src;
    return;
  }
  Shape shape = dst.shape();
  shape[0] += src.dim(0);
  std::vector<double> values = dst.storage();
  values.insert(values.end(), src.storage().begin(), src.storage().end());
  dst = Tensor(shape, std::move(values));
}

}  // namespace

Evaluation EvaluateModel(const ModelParams& params, const ModelConfig& config, const LoadedDataset& dataset,
                         const FusionWeights& fusion, int num_biases, int batch_size) {
  std::vector<SampleSummary> summaries;
  summaries.reserve(dataset.split.test.size());
  ForEachTestBatch(params, config, dataset, batch_size,
                   [&](const ModelOutputs& out, const std::vector<CompositionLabel>& labels) {
                     const ScoreMatrix m =
                         MakeScoreMatrix(FusePredictions(out, fusion, config.fusion_mode), labels, dataset.split,
                                         config.num_attributes, config.num_objects);
                     const std::vector<SampleSummary> part = Summarize(m);
                     summaries.insert(summaries.end(), part.begin(), part.end());
                   });
  Evaluation e;
  e.curve = CalibrationSweep(summaries, num_biases);
  e.report = ComputeMetrics(e.curve, summaries);
  return e;
}

ModelOutputs ScoreTestSet(const ModelParams& params, const ModelConfig& config, const LoadedDataset& dataset,
                          int batch_size) {
  ModelOutputs all;
  ForEachTestBatch(params, config, dataset, batch_size,
                   [&](const ModelOutputs& out, const std::vector<CompositionLabel>&) {
                     AppendRows(all.attr_logits, out.attr_logits);
                     AppendRows(all.obj_logits, out.obj_logits);
                     AppendRows(all.rev_attr_logits, out.rev_attr_logits);
                     AppendRows(all.rev_obj_logits, out.rev_obj_logits);
                   });
  return all;
}

Evaluation EvaluateOutputs(const ModelOutputs& outputs, const std::vector<CompositionLabel>& truth,
                           const DatasetSplit& split, const FusionWeights& fusion, FusionMode mode,
                           int num_biases) {
  const Tensor scores = FusePredictions(outputs, fusion, mode);
  const ScoreMatrix m = MakeScoreMatrix(scores, truth, split, static_cast<int>(outputs.attr_logits.dim(1)),
                                        static_cast<int>(outputs.obj_logits.dim(1)));
  const std::vector<SampleSummary> summaries = Summarize(m);
  Evaluation e;
  e.curve = CalibrationSweep(summaries, num_biases);
  e.report = ComputeMetrics(e.curve, summaries);
  return e;
}

std::string ReportToJson(const MetricsReport& report, int num_biases, const FusionWeights& fusion,
                         FusionMode mode) {
  nlohmann::ordered_json j;
  j["S"] = report.S;
  j["U"] = report.U;
  j["HM"] = report.HM;
  j["AUC"] = report.AUC;
  j["attr_top1"] = report.attr_top1;
  j["obj_top1"] = report.obj_top1;
  j["num_biases"] = num_biases;
  j["fusion"] = {{"eta1", fusion.eta1}, {"eta2", fusion.eta2}, {"mode", ToString(mode)}};
  return j.dump(2) + "\n";
}

std::string CurveToCsv(const EvaluationCurve& curve) {
  std::ostringstream os;
  os << "bias,seen_acc,unseen_acc\n";
  char buf[96];
  for (const auto& p : curve.points) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", p.bias, p.seen_acc, p.unseen_acc);
    os << buf;
  }
  return os.str();
}

}  // namespace dranet
