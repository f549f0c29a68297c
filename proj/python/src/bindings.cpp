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

// Python bindings. Configs cross the boundary as JSON text in the same
// schema the CLI reads; arrays cross as float64 numpy arrays.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dranet/checkpoint.hpp"
#include "dranet/config.hpp"
#include "dranet/errors.hpp"
#include "dranet/evaluation.hpp"
#include "dranet/experiment.hpp"
#include "dranet/model.hpp"
#include "dranet/objectives.hpp"
#include "dranet/synthetic.hpp"
#include "json.hpp"

namespace py = pybind11;

namespace dranet {
namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor ToTensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array ToArray(const Tensor& t) {
  Array a(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.data(), t.data() + t.size(), a.mutable_data());
  return a;
}

ExperimentConfig ParseExperiment(const std::string& text) {
  return ExperimentConfigFromJson(nlohmann::json::parse(text.empty() ? "{}" : text));
}

ModelConfig ParseModel(const std::string& text) {
  ModelConfig c = ModelConfigFromJson(nlohmann::json::parse(text));
  c.Validate();
  return c;
}

std::map<std::string, Array> ParamsToDict(const ModelParams& p) {
  std::map<std::string, Array> out;
  for (const auto& e : p.entries()) out.emplace(e.name, ToArray(e.value));
  return out;
}

// Rebuilt in InitParams order so that the store compares equal to a fresh one.
ModelParams ParamsFromDict(const std::map<std::string, Array>& d, const ModelConfig& config) {
  const ModelParams reference = InitParams(config);
  ModelParams p;
  for (const auto& e : reference.entries()) {
    const auto it = d.find(e.name);
    if (it == d.end()) throw ConfigError("missing parameter '" + e.name + "'");
    p.Add(e.name, ToTensor(it->second));
  }
  if (d.size() != p.size()) throw ConfigError("unexpected extra parameters");
  ValidateParams(p, config);
  return p;
}

std::vector<CompositionLabel> Labels(const std::vector<std::pair<int, int>>& l) {
  std::vector<CompositionLabel> out;
  for (const auto& [a, o] : l) out.push_back({a, o});
  return out;
}

ModelOutputs OutputsFromDict(const std::map<std::string, Array>& d) {
  auto get = [&](const char* k) {
    const auto it = d.find(k);
    if (it == d.end()) throw DomainError(std::string("outputs lack '") + k + "'");
    return ToTensor(it->second);
  };
  ModelOutputs o;
  o.attr_logits = get("attr_logits");
  o.obj_logits = get("obj_logits");
  o.rev_attr_logits = get("rev_attr_logits");
  o.rev_obj_logits = get("rev_obj_logits");
  return o;
}

py::dict ReportDict(const MetricsReport& r) {
  py::dict d;
  d["S"] = r.S;
  d["U"] = r.U;
  d["HM"] = r.HM;
  d["AUC"] = r.AUC;
  d["attr_top1"] = r.attr_top1;
  d["obj_top1"] = r.obj_top1;
  return d;
}

Array CurveArray(const EvaluationCurve& c) {
  Array a({static_cast<py::ssize_t>(c.points.size()), py::ssize_t{3}});
  double* p = a.mutable_data();
  for (const auto& pt : c.points) {
    *p++ = pt.bias;
    *p++ = pt.seen_acc;
    *p++ = pt.unseen_acc;
  }
  return a;
}

py::tuple EvaluationTuple(const Evaluation& e) { return py::make_tuple(ReportDict(e.report), CurveArray(e.curve)); }

}  // namespace
}  // namespace dranet

PYBIND11_MODULE(_core, m) {
  using namespace dranet;
  m.doc() = "DRANet core operations";

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  static py::exception<DataError> data_error(m, "DataError", PyExc_RuntimeError);
  static py::exception<NumericError> numeric_error(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const DataError& e) {
      py::set_error(data_error, e.what());
    } catch (const NumericError& e) {
      py::set_error(numeric_error, e.what());
    } catch (const nlohmann::json::exception& e) {
      py::set_error(config_error, e.what());
    }
  });

  m.def("encode_pair", [](int a, int o, int num_objects) { return EncodePair({a, o}, num_objects); },
        py::arg("attribute_id"), py::arg("object_id"), py::arg("num_objects"));
  m.def(
      "decode_pair",
      [](int pair, int num_objects) {
        const CompositionLabel l = DecodePair(pair, num_objects);
        return std::make_pair(l.attribute_id, l.object_id);
      },
      py::arg("pair_id"), py::arg("num_objects"));

  m.def(
      "render_composition",
      [](int a, int o, uint64_t jitter_seed, const std::string& config_json) {
        const ExperimentConfig c = ParseExperiment(config_json);
        return ToArray(RenderComposition(a, o, jitter_seed, c.generator).image);
      },
      py::arg("attribute_id"), py::arg("object_id"), py::arg("jitter_seed"), py::arg("config_json") = "");

  m.def(
      "generate_dataset",
      [](const std::string& config_json, const std::string& out_dir) {
        const ExperimentConfig c = ParseExperiment(config_json);
        std::ostringstream log;
        const LoadedDataset ds = RunGenerate(c, out_dir, log);
        py::dict d;
        d["attributes"] = ds.vocab.attributes();
        d["objects"] = ds.vocab.objects();
        d["seen_pairs"] = std::vector<int>(ds.split.seen_pairs.begin(), ds.split.seen_pairs.end());
        d["unseen_pairs"] = std::vector<int>(ds.split.unseen_pairs.begin(), ds.split.unseen_pairs.end());
        d["num_train"] = ds.split.train.size();
        d["num_test"] = ds.split.test.size();
        return d;
      },
      py::arg("config_json"), py::arg("out_dir"));

  m.def(
      "model_config",
      [](const std::string& config_json) { return ToJson(ParseExperiment(config_json).model).dump(); },
      py::arg("config_json") = "", "Model section of an experiment config, with vocabulary sizes filled in.");

  m.def(
      "init_params", [](const std::string& model_json) { return ParamsToDict(InitParams(ParseModel(model_json))); },
      py::arg("model_json"));

  m.def(
      "forward",
      [](const dranet::Array& images, const std::map<std::string, dranet::Array>& params,
         const std::string& model_json) {
        const ModelConfig c = ParseModel(model_json);
        const ModelOutputs o = Forward(ToTensor(images), ParamsFromDict(params, c), c);
        std::map<std::string, dranet::Array> d;
        d.emplace("attr_logits", ToArray(o.attr_logits));
        d.emplace("obj_logits", ToArray(o.obj_logits));
        d.emplace("rev_attr_logits", ToArray(o.rev_attr_logits));
        d.emplace("rev_obj_logits", ToArray(o.rev_obj_logits));
        return d;
      },
      py::arg("images"), py::arg("params"), py::arg("model_json"));

  m.def(
      "losses",
      [](const std::map<std::string, dranet::Array>& outputs, const std::vector<std::pair<int, int>>& labels,
         const std::string& model_json, double lambda1, double lambda2) {
        const LossBreakdown b =
            TotalLoss(OutputsFromDict(outputs), Labels(labels), LossWeights{lambda1, lambda2}, ParseModel(model_json));
        py::dict d;
        d["attr"] = b.attr;
        d["obj"] = b.obj;
        d["reverse"] = b.reverse;
        d["distill"] = b.distill;
        d["total"] = b.total;
        return d;
      },
      py::arg("outputs"), py::arg("labels"), py::arg("model_json"), py::arg("lambda1") = 1.0,
      py::arg("lambda2") = 1.0);

  m.def(
      "fuse_predictions",
      [](const std::map<std::string, dranet::Array>& outputs, double eta1, double eta2, const std::string& mode) {
        return ToArray(FusePredictions(OutputsFromDict(outputs), {eta1, eta2}, ParseFusionMode(mode)));
      },
      py::arg("outputs"), py::arg("eta1") = 0.1, py::arg("eta2") = 0.3, py::arg("mode") = "weighted_sum_product");

  m.def(
      "evaluate_scores",
      [](const dranet::Array& scores, const std::vector<std::pair<int, int>>& truth,
         const std::vector<int>& seen_pairs, int num_attributes, int num_objects, int num_biases) {
        DatasetSplit split;
        split.seen_pairs.insert(seen_pairs.begin(), seen_pairs.end());
        for (int p = 0; p < num_attributes * num_objects; ++p)
          if (!split.seen_pairs.count(p)) split.unseen_pairs.insert(p);
        const ScoreMatrix s = MakeScoreMatrix(ToTensor(scores), Labels(truth), split, num_attributes, num_objects);
        Evaluation e;
        e.curve = CalibrationSweep(s, num_biases);
        e.report = ComputeMetrics(e.curve, s);
        return EvaluationTuple(e);
      },
      py::arg("scores"), py::arg("truth"), py::arg("seen_pairs"), py::arg("num_attributes"), py::arg("num_objects"),
      py::arg("num_biases") = 50, "Returns (report, curve) with curve rows (bias, seen_acc, unseen_acc).");

  m.def(
      "train",
      [](const std::string& config_json, const std::string& out_dir) {
        const ExperimentConfig c = ParseExperiment(config_json);
        const TrainOutcome t = RunTrain(c, OpenDataset(c.data_dir), out_dir, nullptr);
        return py::make_tuple(ReportDict(t.final_eval.report), t.steps);
      },
      py::arg("config_json"), py::arg("out_dir"), "Trains from the config's data_dir; returns (final report, steps).");

  m.def(
      "evaluate",
      [](const std::string& config_json, const std::string& checkpoint, const std::string& out_dir) {
        const ExperimentConfig c = ParseExperiment(config_json);
        return EvaluationTuple(RunEval(c, OpenDataset(c.data_dir), checkpoint, out_dir));
      },
      py::arg("config_json"), py::arg("checkpoint"), py::arg("out_dir"));

  m.def(
      "load_checkpoint",
      [](const std::string& path) {
        const Checkpoint ck = LoadCheckpoint(path);
        return py::make_tuple(ParamsToDict(ck.params), ToJson(ck.config).dump());
      },
      py::arg("path"), "Returns (params, model_json).");
}
