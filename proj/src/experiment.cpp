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

#include "dranet/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "dranet/checkpoint.hpp"
#include "dranet/errors.hpp"
#include "dranet/heatmap.hpp"
#include "dranet/image_io.hpp"
#include "dranet/objectives.hpp"
#include "dranet/random.hpp"

namespace dranet {
namespace fs = std::filesystem;

namespace {

std::string Format(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

void MakeDirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string Timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void CheckDatasetFits(const ExperimentConfig& config, const LoadedDataset& dataset) {
  if (dataset.vocab.num_attributes() != config.model.num_attributes ||
      dataset.vocab.num_objects() != config.model.num_objects) {
    throw ConfigError("dataset vocabulary (" + std::to_string(dataset.vocab.num_attributes()) + " x " +
                      std::to_string(dataset.vocab.num_objects()) + ") does not match the config");
  }
  if (dataset.split.train.empty()) throw DataError("the training split is empty");
}

// Training images stay 8-bit in memory and are widened per batch.
std::vector<Image8> LoadTrainImages(const LoadedDataset& dataset, int image_size) {
  std::vector<Image8> images;
  images.reserve(dataset.split.train.size());
  for (const auto& s : dataset.split.train) {
    Image8 img = ReadPng(dataset.root / s.sample_ref);
    if (img.channels != 3) throw DataError(s.sample_ref + ": expected an RGB image");
    if (img.width != image_size || img.height != image_size) {
      throw DataError(s.sample_ref + ": image is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                      ", config expects " + std::to_string(image_size));
    }
    images.push_back(std::move(img));
  }
  return images;
}

ImageBatch MakeBatch(const std::vector<Image8>& images, const std::vector<LabeledSample>& samples,
                     const std::vector<size_t>& order, size_t start, size_t end) {
  const int64_t h = images[order[start]].height, w = images[order[start]].width;
  const int64_t plane = 3 * h * w;
  Tensor data({static_cast<int64_t>(end - start), 3, h, w});
  std::vector<CompositionLabel> labels;
  for (size_t i = start; i < end; ++i) {
    const Tensor t = ToTensor(images[order[i]]);
    std::copy(t.data(), t.data() + plane, data.data() + static_cast<int64_t>(i - start) * plane);
    labels.push_back(samples[order[i]].label);
  }
  return ImageBatch(std::move(data), std::move(labels));
}

std::string LossLine(int64_t step, const LossBreakdown& l) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%lld\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\n", static_cast<long long>(step), l.attr, l.obj,
                l.reverse, l.distill, l.total);
  return buf;
}

std::vector<CompositionLabel> TestLabels(const LoadedDataset& dataset) {
  std::vector<CompositionLabel> out;
  out.reserve(dataset.split.test.size());
  for (const auto& s : dataset.split.test) out.push_back(s.label);
  return out;
}

void Flatten(const nlohmann::json& j, const std::string& prefix, std::map<std::string, nlohmann::json>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      Flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    }
  } else {
    out[prefix] = j;
  }
}

std::string MetricsCsvFields(const MetricsReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", r.S, r.U, r.HM, r.AUC, r.attr_top1, r.obj_top1);
  return buf;
}

}  // namespace

FusionWeights EffectiveFusion(const ExperimentConfig& config) {
  if (!config.model.use_reverse) return FusionWeights{0.0, 0.0};
  return config.fusion;
}

// ---- generate ---------------------------------------------------------------

LoadedDataset RunGenerate(const ExperimentConfig& config, const fs::path& data_dir, std::ostream& log) {
  config.Validate();
  LoadedDataset ds = GenerateDataset(config.generator, config.split, data_dir);
  const int pairs = ds.vocab.num_attributes() * ds.vocab.num_objects();
  log << "manifest: " << (data_dir / kManifestFileName).string() << "\n"
      << "pairs: " << pairs << " seen: " << ds.split.seen_pairs.size() << " unseen: " << ds.split.unseen_pairs.size()
      << "\n"
      << "train images: " << ds.split.train.size() << " test images: " << ds.split.test.size() << "\n";
  return ds;
}

LoadedDataset OpenDataset(const fs::path& data_dir) {
  const fs::path manifest = data_dir / kManifestFileName;
  if (!fs::exists(manifest)) {
    throw DataError("no dataset at " + manifest.string() + " (run the generate command first)");
  }
  return LoadExternalSplit(manifest);
}

// ---- train ------------------------------------------------------------------

TrainOutcome RunTrain(const ExperimentConfig& config, const LoadedDataset& dataset, const fs::path& out_dir,
                      std::ostream* progress) {
  config.Validate();
  CheckDatasetFits(config, dataset);
  MakeDirs(out_dir);
  const FusionWeights fusion = EffectiveFusion(config);
  const std::vector<Image8> images = LoadTrainImages(dataset, config.generator.image_size);

  TrainOutcome outcome;
  ModelParams params = InitParams(config.model);
  AdamOptions adam;
  adam.learning_rate = config.learning_rate;
  OptimizerState state;

  std::ostringstream log;
  log << "# dranet training log\n"
      << "# started " << Timestamp() << "\n"
      << "# learning_rate " << Format("%g", config.learning_rate) << " (default "
      << Format("%g", kDefaultLearningRate) << ")\n"
      << "# epochs " << config.epochs << " batch_size " << config.batch_size
      << " (desk defaults 30 and 64 are choices of this implementation, not published values)\n"
      << "# lambda1 " << Format("%g", config.weights.lambda1) << " lambda2 " << Format("%g", config.weights.lambda2)
      << " seed " << config.seed << " model_seed " << config.model.seed << "\n"
      << "step\tL_a\tL_o\tL_r\tL_d\tL_total\n";
  const fs::path log_path = out_dir / kTrainLogName;

  const size_t n = images.size();
  const size_t batch = static_cast<size_t>(config.batch_size);
  bool have_best = false;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng(DeriveSeed({config.seed, 0x62617463ULL, static_cast<uint64_t>(epoch)}));
    rng.Shuffle(order);
    double attr_sum = 0.0;
    for (size_t start = 0; start < n; start += batch) {
      const size_t end = std::min(n, start + batch);
      const ImageBatch b = MakeBatch(images, dataset.split.train, order, start, end);
      LossBreakdown l;
      try {
        l = TrainStep(params, b, config.weights, config.model, adam, state);
      } catch (const NumericError& e) {
        WriteText(log_path, log.str());
        throw NumericError("training diverged at epoch " + std::to_string(epoch + 1) + ", step " +
                           std::to_string(outcome.steps + 1) + ": " + e.what());
      }
      ++outcome.steps;
      log << LossLine(outcome.steps, l);
      attr_sum += l.attr * static_cast<double>(end - start);
    }
    outcome.epoch_attr_loss.push_back(attr_sum / static_cast<double>(n));
    const bool last = epoch + 1 == config.epochs;
    if ((epoch + 1) % config.eval_every == 0 || last) {
      Evaluation e = EvaluateModel(params, config.model, dataset, fusion, config.num_biases, config.batch_size);
      if (progress) {
        *progress << "epoch " << epoch + 1 << "/" << config.epochs << " L_a " << Format("%.4f", outcome.epoch_attr_loss.back())
                  << " S " << Format("%.4f", e.report.S) << " U " << Format("%.4f", e.report.U) << " HM "
                  << Format("%.4f", e.report.HM) << " AUC " << Format("%.4f", e.report.AUC) << "\n";
      }
      if (!have_best || e.report.HM > outcome.best_eval.report.HM) {
        outcome.best_params = params;
        outcome.best_eval = e;
        have_best = true;
      }
      if (last) outcome.final_eval = std::move(e);
    }
  }
  if (config.epochs == 0) {
    outcome.final_eval = EvaluateModel(params, config.model, dataset, fusion, config.num_biases, config.batch_size);
    outcome.best_eval = outcome.final_eval;
    outcome.best_params = params;
  }
  outcome.final_params = std::move(params);
  WriteText(log_path, log.str());
  SaveCheckpoint(out_dir / kFinalCheckpointName, outcome.final_params, config.model);
  SaveCheckpoint(out_dir / kBestCheckpointName, outcome.best_params, config.model);
  return outcome;
}

// ---- eval -------------------------------------------------------------------

Evaluation RunEval(const ExperimentConfig& config, const LoadedDataset& dataset, const fs::path& checkpoint,
                   const fs::path& out_dir) {
  config.Validate();
  CheckDatasetFits(config, dataset);
  const ModelParams params = LoadCheckpoint(checkpoint, config.model);
  const FusionWeights fusion = EffectiveFusion(config);
  Evaluation e = EvaluateModel(params, config.model, dataset, fusion, config.num_biases, config.batch_size);
  MakeDirs(out_dir);
  WriteText(out_dir / kReportName, ReportToJson(e.report, config.num_biases, fusion, config.model.fusion_mode));
  WriteText(out_dir / kCurveName, CurveToCsv(e.curve));
  return e;
}

// ---- ablate -----------------------------------------------------------------

const std::vector<AblationVariant>& AblationLadder() {
  static const std::vector<AblationVariant> ladder = {
      {"base", "no attention, no reverse loss, no distillation",
       {"model.attr_branch", "model.obj_branch", "model.use_reverse", "model.distill_mode"}},
      {"anet", "non-local attribute branch and local object branch", {"model.use_reverse", "model.distill_mode"}},
      {"ranet", "anet plus the reverse loss and fused inference", {"model.distill_mode"}},
      {"dranet", "ranet plus reversal-teacher distillation", {}},
      {"both_local", "anet with a local attribute branch",
       {"model.attr_branch", "model.use_reverse", "model.distill_mode"}},
      {"both_nonlocal", "anet with a non-local object branch",
       {"model.obj_branch", "model.use_reverse", "model.distill_mode"}},
      {"swap_a", "anet with the branch kinds exchanged",
       {"model.attr_branch", "model.obj_branch", "model.use_reverse", "model.distill_mode"}},
      {"anet_with_lr", "anet trained with the reverse loss, inference without fusion",
       {"model.distill_mode", "fusion.eta1", "fusion.eta2"}},
      {"fusion_product_sum", "ranet with product-sum fusion", {"model.distill_mode", "model.fusion_mode"}},
      {"distill_n_oriented", "dranet with non-local-branch teachers", {"model.distill_mode"}},
      {"distill_l_oriented", "dranet with local-branch teachers", {"model.distill_mode"}},
  };
  return ladder;
}

ExperimentConfig ApplyVariant(const ExperimentConfig& full, const std::string& name) {
  ExperimentConfig c = full;
  ModelConfig& m = c.model;
  auto ablate_reverse = [&m] {
    m.use_reverse = false;
    m.distill_mode = DistillMode::kOff;
  };
  if (name == "base") {
    m.attr_branch = BranchKind::kNone;
    m.obj_branch = BranchKind::kNone;
    ablate_reverse();
  } else if (name == "anet") {
    ablate_reverse();
  } else if (name == "ranet") {
    m.distill_mode = DistillMode::kOff;
  } else if (name == "dranet") {
  } else if (name == "both_local") {
    m.attr_branch = BranchKind::kLocal;
    ablate_reverse();
  } else if (name == "both_nonlocal") {
    m.obj_branch = BranchKind::kNonLocal;
    ablate_reverse();
  } else if (name == "swap_a") {
    m.attr_branch = BranchKind::kLocal;
    m.obj_branch = BranchKind::kNonLocal;
    ablate_reverse();
  } else if (name == "anet_with_lr") {
    m.distill_mode = DistillMode::kOff;
    c.fusion = FusionWeights{0.0, 0.0};
  } else if (name == "fusion_product_sum") {
    m.distill_mode = DistillMode::kOff;
    m.fusion_mode = FusionMode::kProductSum;
  } else if (name == "distill_n_oriented") {
    m.distill_mode = DistillMode::kNOriented;
  } else if (name == "distill_l_oriented") {
    m.distill_mode = DistillMode::kLOriented;
  } else {
    throw ConfigError("unknown ablation variant '" + name + "'");
  }
  return c;
}

std::vector<std::string> ConfigDiff(const ExperimentConfig& a, const ExperimentConfig& b) {
  std::map<std::string, nlohmann::json> fa, fb;
  Flatten(nlohmann::json::parse(ToJson(a).dump()), "", fa);
  Flatten(nlohmann::json::parse(ToJson(b).dump()), "", fb);
  std::vector<std::string> diff;
  for (const auto& [key, value] : fa) {
    auto it = fb.find(key);
    if (it == fb.end() || it->second != value) diff.push_back(key);
  }
  for (const auto& [key, value] : fb) {
    if (!fa.count(key)) diff.push_back(key);
  }
  std::sort(diff.begin(), diff.end());
  return diff;
}

AblationResult RunAblate(const ExperimentConfig& config, const LoadedDataset& dataset, const fs::path& out_dir,
                         int jobs, std::ostream* progress) {
  config.Validate();
  CheckDatasetFits(config, dataset);
  if (jobs < 1) throw ConfigError("--jobs must be >= 1");
  std::vector<std::string> names;
  for (const auto& v : AblationLadder()) {
    const auto& wanted = config.ablation.variants;
    if (wanted.empty() || std::find(wanted.begin(), wanted.end(), v.name) != wanted.end()) names.push_back(v.name);
  }
  for (const auto& w : config.ablation.variants) {
    if (std::find(names.begin(), names.end(), w) == names.end()) {
      throw ConfigError("unknown ablation variant '" + w + "'");
    }
  }
  MakeDirs(out_dir);

  AblationResult result;
  for (const auto& name : names) {
    for (uint64_t seed : config.ablation.seeds) result.runs.push_back({name, seed, {}});
  }
  std::atomic<size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= result.runs.size()) return;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (failure) return;
      }
      AblationRun& run = result.runs[i];
      try {
        ExperimentConfig c = ApplyVariant(config, run.variant);
        OverrideSeed(c, run.seed);
        const fs::path dir = out_dir / run.variant / ("seed_" + std::to_string(run.seed));
        const TrainOutcome t = RunTrain(c, dataset, dir, nullptr);
        run.report = t.final_eval.report;
        std::lock_guard<std::mutex> lock(mu);
        if (progress) {
          *progress << run.variant << " seed " << run.seed << " S " << Format("%.4f", run.report.S) << " U "
                    << Format("%.4f", run.report.U) << " HM " << Format("%.4f", run.report.HM) << " AUC "
                    << Format("%.4f", run.report.AUC) << std::endl;
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int threads = std::min<int>(jobs, static_cast<int>(result.runs.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::ostringstream runs_csv, mean_csv;
  runs_csv << "variant,seed,S,U,HM,AUC,attr_top1,obj_top1\n";
  mean_csv << "variant,runs,S,U,HM,AUC,attr_top1,obj_top1\n";
  for (const auto& r : result.runs) runs_csv << r.variant << "," << r.seed << "," << MetricsCsvFields(r.report) << "\n";
  for (const auto& name : names) {
    AblationSummary s;
    s.variant = name;
    for (const auto& r : result.runs) {
      if (r.variant != name) continue;
      ++s.runs;
      s.mean.S += r.report.S;
      s.mean.U += r.report.U;
      s.mean.HM += r.report.HM;
      s.mean.AUC += r.report.AUC;
      s.mean.attr_top1 += r.report.attr_top1;
      s.mean.obj_top1 += r.report.obj_top1;
    }
    const double k = s.runs;
    s.mean.S /= k;
    s.mean.U /= k;
    s.mean.HM /= k;
    s.mean.AUC /= k;
    s.mean.attr_top1 /= k;
    s.mean.obj_top1 /= k;
    mean_csv << name << "," << s.runs << "," << MetricsCsvFields(s.mean) << "\n";
    result.summaries.push_back(s);
  }
  WriteText(out_dir / "ablation_runs.csv", runs_csv.str());
  WriteText(out_dir / "ablation.csv", mean_csv.str());
  return result;
}

// ---- sweep ------------------------------------------------------------------

bool IsSweepParameter(const std::string& name) {
  return name == "lambda1" || name == "lambda2" || name == "eta1" || name == "eta2";
}

std::vector<double> DefaultSweepValues(const std::string& parameter) {
  if (!IsSweepParameter(parameter)) throw ConfigError("unknown sweep parameter '" + parameter + "'");
  if (parameter[0] == 'l') return {0.0, 0.5, 1.0, 2.0};
  std::vector<double> v;
  for (int i = 0; i <= 10; ++i) v.push_back(i / 10.0);
  return v;
}

std::vector<SweepRow> RunSweep(const ExperimentConfig& config, const LoadedDataset& dataset,
                               const std::string& parameter, const std::vector<double>& values,
                               const std::optional<fs::path>& checkpoint, const fs::path& out_dir,
                               std::ostream* progress) {
  if (!IsSweepParameter(parameter)) {
    throw ConfigError("unknown sweep parameter '" + parameter + "' (expected lambda1, lambda2, eta1 or eta2)");
  }
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  config.Validate();
  CheckDatasetFits(config, dataset);
  MakeDirs(out_dir);
  const fs::path dir = out_dir / ("sweep_" + parameter);
  std::vector<SweepRow> rows;

  if (parameter[0] == 'l') {
    for (size_t i = 0; i < values.size(); ++i) {
      ExperimentConfig c = config;
      (parameter == "lambda1" ? c.weights.lambda1 : c.weights.lambda2) = values[i];
      const TrainOutcome t = RunTrain(c, dataset, dir / ("value_" + std::to_string(i)), nullptr);
      rows.push_back({values[i], t.final_eval.report});
      if (progress) *progress << parameter << " = " << values[i] << " HM " << Format("%.4f", t.final_eval.report.HM) << "\n";
    }
  } else {
    ModelParams params = checkpoint ? LoadCheckpoint(*checkpoint, config.model)
                                    : RunTrain(config, dataset, dir / "model", progress).final_params;
    const ModelOutputs outputs = ScoreTestSet(params, config.model, dataset, config.batch_size);
    const std::vector<CompositionLabel> truth = TestLabels(dataset);
    for (double v : values) {
      FusionWeights f = config.fusion;
      (parameter == "eta1" ? f.eta1 : f.eta2) = v;
      const Evaluation e = EvaluateOutputs(outputs, truth, dataset.split, f, config.model.fusion_mode,
                                           config.num_biases);
      rows.push_back({v, e.report});
    }
  }

  std::ostringstream csv;
  csv << "value,S,U,HM,AUC\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%g,%.6f,%.6f,%.6f,%.6f\n", r.value, r.report.S, r.report.U, r.report.HM,
                  r.report.AUC);
    csv << buf;
  }
  WriteText(out_dir / ("sweep_" + parameter + ".csv"), csv.str());
  return rows;
}

// ---- visualize --------------------------------------------------------------

namespace {

const graph::BranchVars* FindBranch(const graph::ForwardVars& f, const ModelConfig& m, BranchKind kind) {
  if (m.attr_branch == kind) return &f.attr_branch;
  if (m.obj_branch == kind) return &f.obj_branch;
  return nullptr;
}

std::vector<int> TopK(const std::vector<double>& weights, int k) {
  std::vector<int> idx(weights.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return weights[a] > weights[b]; });
  idx.resize(std::min<size_t>(idx.size(), static_cast<size_t>(std::max(k, 0))));
  return idx;
}

}  // namespace

VisualizeResult RunVisualize(const ExperimentConfig& config, const fs::path& checkpoint, const fs::path& image_path,
                             const fs::path& out_dir, int top_k) {
  config.Validate();
  const ModelConfig& m = config.model;
  const bool has_nonlocal = m.attr_branch == BranchKind::kNonLocal || m.obj_branch == BranchKind::kNonLocal;
  const bool has_local = m.attr_branch == BranchKind::kLocal || m.obj_branch == BranchKind::kLocal;
  if (!has_nonlocal || !has_local) throw ConfigError("visualize needs one non-local and one local branch");
  const ModelParams params = LoadCheckpoint(checkpoint, m);

  const Image8 img = ReadPng(image_path);
  if (img.channels != 3) throw DataError(image_path.string() + ": expected an RGB image");
  const int size = config.generator.image_size;
  if (img.width != size || img.height != size) {
    throw DataError(image_path.string() + ": image is " + std::to_string(img.width) + "x" +
                    std::to_string(img.height) + ", the encoder expects " + std::to_string(size) + "x" +
                    std::to_string(size));
  }
  const Tensor chw = ToTensor(img);

  ag::Graph g;
  const BoundParams bound(g, params, /*trainable=*/false);
  const graph::ForwardVars f = graph::ForwardGraph(g, g.Constant(chw.Reshaped({1, 3, size, size})), bound, m);
  const graph::BranchVars& local = *FindBranch(f, m, BranchKind::kLocal);
  const graph::BranchVars& nonlocal = *FindBranch(f, m, BranchKind::kNonLocal);
  const Tensor& z = f.feature_map.value();
  const int64_t c = z.dim(1), h = z.dim(2), w = z.dim(3), n = h * w;

  MakeDirs(out_dir);
  VisualizeResult result;
  auto emit = [&](const std::string& name, const Tensor& map, HeatmapScale scale) {
    const fs::path png = out_dir / (name + ".png");
    const fs::path arr = out_dir / (name + ".arr");
    WritePng(png, Heatmap(map, size, size, scale));
    WriteRawArray(arr, map);
    result.files.push_back(png);
    result.files.push_back(arr);
  };
  auto plane = [&](const double* p) { return Tensor({h, w}, std::vector<double>(p, p + n)); };

  const Tensor mask = plane(local.spatial.attention.value().data());
  const Tensor reverse_mask = plane(local.spatial.reversed_attention.value().data());
  emit("local_mask", mask, HeatmapScale::kAbsolute);
  emit("local_mask_reverse", reverse_mask, HeatmapScale::kAbsolute);

  result.query_position = static_cast<int>(std::max_element(mask.data(), mask.data() + n) - mask.data());
  const int64_t q = result.query_position;
  emit("nonlocal_row", plane(nonlocal.spatial.attention.value().data() + q * n), HeatmapScale::kNormalized);
  emit("nonlocal_row_reverse", plane(nonlocal.spatial.reversed_attention.value().data() + q * n),
       HeatmapScale::kNormalized);

  Tensor overlay({h, w}), activation({h, w});
  const double* out_map = nonlocal.spatial.output_map.value().data();
  for (int64_t ch = 0; ch < c; ++ch) {
    for (int64_t p = 0; p < n; ++p) {
      overlay[p] += out_map[ch * n + p] / static_cast<double>(c);
      activation[p] += z[ch * n + p] / static_cast<double>(c);
    }
  }
  emit("nonlocal_overlay", overlay, HeatmapScale::kNormalized);
  emit("activation", activation, HeatmapScale::kNormalized);

  const Tensor& channel_attention = nonlocal.channel.attention.value();  // (1, C, C)
  std::vector<double> column_mean(static_cast<size_t>(c), 0.0);
  for (int64_t i = 0; i < c; ++i) {
    for (int64_t j = 0; j < c; ++j) column_mean[j] += channel_attention[i * c + j] / static_cast<double>(c);
  }
  const Tensor& channel_mask = local.channel.attention.value();  // (1, C)
  const std::vector<double> mask_weights(channel_mask.data(), channel_mask.data() + c);
  result.top_nonlocal_channels = TopK(column_mean, top_k);
  result.top_local_channels = TopK(mask_weights, top_k);
  for (size_t k = 0; k < result.top_nonlocal_channels.size(); ++k) {
    const int ch = result.top_nonlocal_channels[k];
    emit("channel_nonlocal_k" + std::to_string(k + 1) + "_c" + std::to_string(ch), plane(z.data() + ch * n),
         HeatmapScale::kNormalized);
  }
  for (size_t k = 0; k < result.top_local_channels.size(); ++k) {
    const int ch = result.top_local_channels[k];
    emit("channel_local_k" + std::to_string(k + 1) + "_c" + std::to_string(ch), plane(z.data() + ch * n),
         HeatmapScale::kNormalized);
  }
  return result;
}

}  // namespace dranet
