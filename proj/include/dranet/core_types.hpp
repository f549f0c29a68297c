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

#ifndef DRANET_CORE_TYPES_HPP_
#define DRANET_CORE_TYPES_HPP_

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dranet/tensor.hpp"

namespace dranet {

// Attribute and object label sets. Names are case-sensitive exact strings.
class VocabularySpec {
 public:
  // Throws DomainError if either list is empty or contains duplicates.
  VocabularySpec(std::vector<std::string> attributes, std::vector<std::string> objects);

  const std::vector<std::string>& attributes() const { return attributes_; }
  const std::vector<std::string>& objects() const { return objects_; }
  int num_attributes() const { return static_cast<int>(attributes_.size()); }
  int num_objects() const { return static_cast<int>(objects_.size()); }
  int num_pairs() const { return num_attributes() * num_objects(); }

  std::optional<int> FindAttribute(const std::string& name) const;
  std::optional<int> FindObject(const std::string& name) const;

  bool operator==(const VocabularySpec&) const = default;

 private:
  std::vector<std::string> attributes_;
  std::vector<std::string> objects_;
};

struct CompositionLabel {
  int attribute_id = 0;
  int object_id = 0;

  bool operator==(const CompositionLabel&) const = default;
  auto operator<=>(const CompositionLabel&) const = default;
};

// pair_id = attribute_id * |O| + object_id: object varies fastest, matching the
// outer-product layout of fused score rows.
int EncodePair(const CompositionLabel& label, int num_objects);
CompositionLabel DecodePair(int pair_id, int num_objects);
int EncodePair(const CompositionLabel& label, const VocabularySpec& vocab);
CompositionLabel DecodePair(int pair_id, const VocabularySpec& vocab);

// Every (a, o) pair in pair_id order.
std::vector<CompositionLabel> OpenWorldSpace(const VocabularySpec& vocab);

struct LabeledSample {
  std::string sample_ref;
  CompositionLabel label;

  bool operator==(const LabeledSample&) const = default;
};

struct DatasetSplit {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> test;
  std::set<int> seen_pairs;
  std::set<int> unseen_pairs;
};

enum class SplitViolationKind {
  kLabelOutOfRange,
  kPairOutOfRange,
  kDisjointness,
  kTrainNotSeen,
  kUnseenElementNotCovered,
  kTestOutsideSpace,
};

struct SplitViolation {
  SplitViolationKind kind;
  std::string message;
};

const char* ToString(SplitViolationKind kind);

// Lists every violated split invariant; empty iff the split is valid.
std::vector<SplitViolation> ValidateSplit(const DatasetSplit& split, const VocabularySpec& vocab);

// Rank-3 (C, H, W) encoder output for a single sample.
class FeatureMap {
 public:
  explicit FeatureMap(Tensor data);
  const Tensor& data() const { return data_; }
  int64_t channels() const { return data_.dim(0); }
  int64_t height() const { return data_.dim(1); }
  int64_t width() const { return data_.dim(2); }

 private:
  Tensor data_;
};

// (batch, 3, H, W) pixels in [0, 1] with one label per image.
class ImageBatch {
 public:
  ImageBatch(Tensor data, std::vector<CompositionLabel> labels);
  const Tensor& data() const { return data_; }
  const std::vector<CompositionLabel>& labels() const { return labels_; }
  int64_t batch_size() const { return data_.dim(0); }
  int64_t image_height() const { return data_.dim(2); }
  int64_t image_width() const { return data_.dim(3); }

 private:
  Tensor data_;
  std::vector<CompositionLabel> labels_;
};

}  // namespace dranet

#endif  // DRANET_CORE_TYPES_HPP_
