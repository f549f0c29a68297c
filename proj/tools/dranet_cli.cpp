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

// dranet {generate|train|eval|ablate|sweep|visualize} --config PATH [...]
//
// Exit codes: 0 success, 2 config fault, 3 data fault, 4 numeric fault.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dranet/config.hpp"
#include "dranet/errors.hpp"
#include "dranet/experiment.hpp"

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config_path;
  std::string checkpoint;
  std::string out;
  std::string image;
  std::string param;
  std::string values;
  int64_t seed = -1;
  int jobs = 1;
};

std::vector<double> ParseValues(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw dranet::ConfigError("--values: '" + item + "' is not a number");
    }
  }
  return out;
}

dranet::ExperimentConfig LoadConfig(const Options& o) {
  dranet::ExperimentConfig c = dranet::LoadExperimentConfig(o.config_path);
  if (o.seed >= 0) dranet::OverrideSeed(c, static_cast<uint64_t>(o.seed));
  return c;
}

fs::path OutDir(const Options& o, const dranet::ExperimentConfig& c) {
  return o.out.empty() ? fs::path(c.output_dir) : fs::path(o.out);
}

void RequireCheckpoint(const Options& o, const char* command) {
  if (o.checkpoint.empty()) throw dranet::ConfigError(std::string(command) + " requires --checkpoint");
}

int Run(const std::string& command, const Options& o) {
  const dranet::ExperimentConfig c = LoadConfig(o);
  if (command == "generate") {
    dranet::RunGenerate(c, o.out.empty() ? fs::path(c.data_dir) : fs::path(o.out), std::cout);
    return 0;
  }
  const fs::path out = OutDir(o, c);
  if (command == "visualize") {
    RequireCheckpoint(o, "visualize");
    const dranet::VisualizeResult r = dranet::RunVisualize(c, o.checkpoint, o.image, out);
    for (const auto& f : r.files) std::cout << f.string() << "\n";
    return 0;
  }
  const dranet::LoadedDataset dataset = dranet::OpenDataset(c.data_dir);
  if (command == "train") {
    const dranet::TrainOutcome t = dranet::RunTrain(c, dataset, out, &std::cout);
    std::cout << "steps " << t.steps << "\n"
              << "checkpoint " << (out / dranet::kFinalCheckpointName).string() << "\n"
              << "best checkpoint " << (out / dranet::kBestCheckpointName).string() << "\n";
  } else if (command == "eval") {
    RequireCheckpoint(o, "eval");
    const dranet::Evaluation e = dranet::RunEval(c, dataset, o.checkpoint, out);
    std::cout << dranet::ReportToJson(e.report, c.num_biases, dranet::EffectiveFusion(c), c.model.fusion_mode);
  } else if (command == "ablate") {
    const dranet::AblationResult r = dranet::RunAblate(c, dataset, out, o.jobs, &std::cout);
    std::cout << "variant,HM,AUC\n";
    for (const auto& s : r.summaries) std::cout << s.variant << "," << s.mean.HM << "," << s.mean.AUC << "\n";
  } else if (command == "sweep") {
    if (!dranet::IsSweepParameter(o.param)) {
      throw dranet::ConfigError("--param must be one of lambda1, lambda2, eta1, eta2");
    }
    std::vector<double> values = ParseValues(o.values);
    if (values.empty()) values = dranet::DefaultSweepValues(o.param);
    std::optional<fs::path> ck;
    if (!o.checkpoint.empty()) ck = fs::path(o.checkpoint);
    dranet::RunSweep(c, dataset, o.param, values, ck, out, &std::cout);
    std::cout << "wrote " << (out / ("sweep_" + o.param + ".csv")).string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DRANet open-world compositional zero-shot learning"};
  app.require_subcommand(1);
  Options o;
  const std::vector<std::string> commands = {"generate", "train", "eval", "ablate", "sweep", "visualize"};
  for (const auto& name : commands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", o.config_path, "experiment config (JSON)")->required();
    sub->add_option("--out", o.out, "output directory (generate: dataset directory)");
    sub->add_option("--seed", o.seed, "overrides the training and model seeds")->check(CLI::NonNegativeNumber);
    if (name == "eval" || name == "sweep" || name == "visualize") {
      sub->add_option("--checkpoint", o.checkpoint, "model checkpoint");
    }
    if (name == "ablate") sub->add_option("--jobs", o.jobs, "concurrent training runs")->check(CLI::PositiveNumber);
    if (name == "sweep") {
      sub->add_option("--param", o.param, "lambda1 | lambda2 | eta1 | eta2")->required();
      sub->add_option("--values", o.values, "comma-separated values");
    }
    if (name == "visualize") sub->add_option("--image", o.image, "input image (PNG)")->required();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return Run(command, o);
  } catch (const dranet::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const dranet::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const dranet::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
