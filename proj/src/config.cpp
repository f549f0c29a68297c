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

#include "dranet/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dranet/errors.hpp"

namespace dranet {
namespace {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

// Reads fields from one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(Where() + "must be an object");
  }

  template <typename T>
  void Read(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(Where() + key + ": " + e.what());
    }
  }

  // Returns nullptr when the key is absent.
  const Json* Child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string ChildPath(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void Finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown config key '" + ChildPath(it.key().c_str()) + "'");
    }
  }

 private:
  std::string Where() const { return path_.empty() ? "config: " : "config." + path_ + ": "; }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Fn>
auto Convert(const std::string& path, Fn fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("config." + path + ": " + e.what());
  }
}

ModelConfig ParseModel(const Json& j, const std::string& path, bool with_vocabulary_sizes) {
  ModelConfig m;
  Section s(j, path);
  if (const Json* enc = s.Child("encoder")) {
    std::vector<std::vector<int>> stages;
    Convert(path + ".encoder", [&] { stages = enc->get<std::vector<std::vector<int>>>(); return 0; });
    m.encoder.clear();
    for (const auto& st : stages) {
      if (st.size() != 2) throw ConfigError("config." + path + ".encoder: each stage is [out_channels, stride]");
      m.encoder.push_back({st[0], st[1]});
    }
  }
  if (with_vocabulary_sizes) {
    s.Read("num_attributes", m.num_attributes);
    s.Read("num_objects", m.num_objects);
  }
  s.Read("classifier_hidden", m.classifier_hidden);
  std::string attr = ToString(m.attr_branch), obj = ToString(m.obj_branch);
  std::string distill = ToString(m.distill_mode), fusion = ToString(m.fusion_mode);
  s.Read("attr_branch", attr);
  s.Read("obj_branch", obj);
  s.Read("use_reverse", m.use_reverse);
  s.Read("distill_mode", distill);
  s.Read("detach_teacher", m.detach_teacher);
  s.Read("fusion_mode", fusion);
  s.Read("channel_bins", m.channel_bins);
  s.Read("channel_reduction", m.channel_reduction);
  s.Read("freeze_encoder", m.freeze_encoder);
  s.Read("seed", m.seed);
  s.Finish();
  m.attr_branch = ParseBranchKind(attr);
  m.obj_branch = ParseBranchKind(obj);
  m.distill_mode = ParseDistillMode(distill);
  m.fusion_mode = ParseFusionMode(fusion);
  return m;
}

}  // namespace

void ExperimentConfig::Validate() const {
  generator.Validate();
  split.Validate();
  model.Validate();
  weights.Validate();
  fusion.Validate();
  if (model.num_attributes != static_cast<int>(generator.attribute_styles.size()) ||
      model.num_objects != static_cast<int>(generator.object_shapes.size())) {
    throw ConfigError("model vocabulary sizes disagree with the generator");
  }
  if (generator.image_size % model.total_stride() != 0) {
    throw ConfigError("generator.image_size must be divisible by the encoder's total stride");
  }
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be finite and >= 0");
  }
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (num_biases < 1) throw ConfigError("num_biases must be >= 1");
  if (ablation.seeds.empty()) throw ConfigError("ablation.seeds must not be empty");
}

OrderedJson ToJson(const ModelConfig& config) {
  OrderedJson j;
  OrderedJson stages = OrderedJson::array();
  for (const auto& st : config.encoder) stages.push_back({st.out_channels, st.stride});
  j["encoder"] = stages;
  j["num_attributes"] = config.num_attributes;
  j["num_objects"] = config.num_objects;
  j["classifier_hidden"] = config.classifier_hidden;
  j["attr_branch"] = ToString(config.attr_branch);
  j["obj_branch"] = ToString(config.obj_branch);
  j["use_reverse"] = config.use_reverse;
  j["distill_mode"] = ToString(config.distill_mode);
  j["detach_teacher"] = config.detach_teacher;
  j["fusion_mode"] = ToString(config.fusion_mode);
  j["channel_bins"] = config.channel_bins;
  j["channel_reduction"] = config.channel_reduction;
  j["freeze_encoder"] = config.freeze_encoder;
  j["seed"] = config.seed;
  return j;
}

ModelConfig ModelConfigFromJson(const Json& j) { return ParseModel(j, "model", true); }

OrderedJson ToJson(const ExperimentConfig& config) {
  OrderedJson j;
  const auto& g = config.generator;
  j["generator"] = {{"image_size", g.image_size},
                    {"object_shapes", g.object_shapes},
                    {"attribute_styles", g.attribute_styles},
                    {"noise_std", g.noise_std},
                    {"samples_per_pair", g.samples_per_pair},
                    {"test_samples_per_pair", g.test_samples_per_pair},
                    {"seed", g.seed}};
  j["split"] = {{"unseen_fraction", config.split.unseen_fraction},
                {"min_seen_per_element", config.split.min_seen_per_element},
                {"seed", config.split.seed}};
  OrderedJson model = ToJson(config.model);
  model.erase("num_attributes");
  model.erase("num_objects");
  j["model"] = model;
  j["weights"] = {{"lambda1", config.weights.lambda1}, {"lambda2", config.weights.lambda2}};
  j["fusion"] = {{"eta1", config.fusion.eta1}, {"eta2", config.fusion.eta2}};
  j["epochs"] = config.epochs;
  j["batch_size"] = config.batch_size;
  j["learning_rate"] = config.learning_rate;
  j["eval_every"] = config.eval_every;
  j["num_biases"] = config.num_biases;
  j["data_dir"] = config.data_dir;
  j["output_dir"] = config.output_dir;
  j["seed"] = config.seed;
  j["ablation"] = {{"seeds", config.ablation.seeds}, {"variants", config.ablation.variants}};
  return j;
}

ExperimentConfig ExperimentConfigFromJson(const Json& j) {
  ExperimentConfig c;
  Section root(j, "");
  if (const Json* g = root.Child("generator")) {
    Section s(*g, "generator");
    s.Read("image_size", c.generator.image_size);
    s.Read("object_shapes", c.generator.object_shapes);
    s.Read("attribute_styles", c.generator.attribute_styles);
    s.Read("noise_std", c.generator.noise_std);
    s.Read("samples_per_pair", c.generator.samples_per_pair);
    s.Read("test_samples_per_pair", c.generator.test_samples_per_pair);
    s.Read("seed", c.generator.seed);
    s.Finish();
  }
  if (const Json* sp = root.Child("split")) {
    Section s(*sp, "split");
    s.Read("unseen_fraction", c.split.unseen_fraction);
    s.Read("min_seen_per_element", c.split.min_seen_per_element);
    s.Read("seed", c.split.seed);
    s.Finish();
  }
  if (const Json* m = root.Child("model")) c.model = ParseModel(*m, "model", false);
  if (const Json* w = root.Child("weights")) {
    Section s(*w, "weights");
    s.Read("lambda1", c.weights.lambda1);
    s.Read("lambda2", c.weights.lambda2);
    s.Finish();
  }
  if (const Json* f = root.Child("fusion")) {
    Section s(*f, "fusion");
    s.Read("eta1", c.fusion.eta1);
    s.Read("eta2", c.fusion.eta2);
    s.Finish();
  }
  root.Read("epochs", c.epochs);
  root.Read("batch_size", c.batch_size);
  root.Read("learning_rate", c.learning_rate);
  root.Read("eval_every", c.eval_every);
  root.Read("num_biases", c.num_biases);
  root.Read("data_dir", c.data_dir);
  root.Read("output_dir", c.output_dir);
  root.Read("seed", c.seed);
  if (const Json* a = root.Child("ablation")) {
    Section s(*a, "ablation");
    s.Read("seeds", c.ablation.seeds);
    s.Read("variants", c.ablation.variants);
    s.Finish();
  }
  root.Finish();
  c.model.num_attributes = static_cast<int>(c.generator.attribute_styles.size());
  c.model.num_objects = static_cast<int>(c.generator.object_shapes.size());
  c.Validate();
  return c;
}

ExperimentConfig LoadExperimentConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return ExperimentConfigFromJson(j);
}

void SaveExperimentConfig(const std::filesystem::path& path, const ExperimentConfig& config) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << ToJson(config).dump(2) << "\n";
}

void OverrideSeed(ExperimentConfig& config, uint64_t seed) {
  config.seed = seed;
  config.model.seed = seed;
}

}  // namespace dranet
