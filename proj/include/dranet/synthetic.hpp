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

// Procedurally rendered attribute-object compositions and the split-file
// manifest shared with externally prepared datasets.

#ifndef DRANET_SYNTHETIC_HPP_
#define DRANET_SYNTHETIC_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dranet/core_types.hpp"
#include "dranet/tensor.hpp"

namespace dranet {

// Shapes: circle square triangle star cross ring diamond bar.
// Styles: red green blue yellow magenta cyan (colors), striped dotted checker
// (textures), large small (sizes).
const std::vector<std::string>& KnownShapes();
const std::vector<std::string>& KnownStyles();

struct GeneratorConfig {
  int image_size = 64;
  std::vector<std::string> object_shapes = {"circle", "square", "triangle", "star",
                                            "cross",  "ring",   "diamond",  "bar"};
  std::vector<std::string> attribute_styles = {"red",     "green",  "blue",  "yellow",
                                               "striped", "dotted", "large", "small"};
  double noise_std = 0.03;
  int samples_per_pair = 20;
  // Fresh renders per pair in the test split (seen and unseen alike).
  int test_samples_per_pair = 10;
  uint64_t seed = 0;

  // Throws ConfigError when an invariant fails.
  void Validate() const;
  VocabularySpec Vocabulary() const;
  bool operator==(const GeneratorConfig&) const = default;
};

struct SplitSpec {
  double unseen_fraction = 0.2;
  int min_seen_per_element = 1;
  uint64_t seed = 0;

  void Validate() const;
  bool operator==(const SplitSpec&) const = default;
};

struct RenderProvenance {
  uint64_t jitter_seed = 0;
  uint64_t noise_seed = 0;
  double center_x = 0.0;
  double center_y = 0.0;
  double rotation = 0.0;  // radians
  double scale = 1.0;     // size multiplier applied to the shape's base radius
};

struct RenderedSample {
  Tensor image;  // (3, S, S) in [0, 1]
  CompositionLabel label;
  RenderProvenance provenance;
  std::vector<uint8_t> shape_mask;  // S*S, 1 inside the object's silhouette

  int64_t MaskPixelCount() const;
};

// Size multipliers of the "large" and "small" styles relative to a shape's
// base radius. Their squared ratio bounds the mask-area ratio.
inline constexpr double kLargeScale = 1.3;
inline constexpr double kSmallScale = 0.7;

// Deterministic in (ids, jitter_seed, config). Throws DomainError on bad ids.
RenderedSample RenderComposition(int attribute_id, int object_id, uint64_t jitter_seed,
                                 const GeneratorConfig& config);

// Holds out round(unseen_fraction * |A||O|) pairs by seeded rejection
// sampling so that every element stays in at least min_seen_per_element seen
// pairs. Throws DomainError when no such split exists.
DatasetSplit BuildSplit(const VocabularySpec& vocab, const SplitSpec& spec);

struct LoadedDataset {
  VocabularySpec vocab;
  DatasetSplit split;
  std::filesystem::path root;  // directory the sample refs are relative to
};

inline constexpr const char* kManifestFileName = "manifest.tsv";

// Renders the train and test images under out_dir and writes the manifest.
LoadedDataset GenerateDataset(const GeneratorConfig& config, const SplitSpec& spec,
                              const std::filesystem::path& out_dir);

// Writes a manifest for an already-populated split.
void WriteManifest(const std::filesystem::path& path, const VocabularySpec& vocab,
                   const DatasetSplit& split);

// Parses and validates a manifest. Faults are DataError messages carrying the
// offending line number. With check_images, every referenced file must exist.
LoadedDataset LoadExternalSplit(const std::filesystem::path& manifest_path, bool check_images = true);

// Loads one referenced image as (3, H, W) in [0, 1].
Tensor LoadSampleImage(const LoadedDataset& dataset, const LabeledSample& sample);

}  // namespace dranet

#endif  // DRANET_SYNTHETIC_HPP_
