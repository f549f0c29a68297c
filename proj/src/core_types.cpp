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

#include "dranet/core_types.hpp"

#include <algorithm>
#include <unordered_set>

#include "dranet/errors.hpp"

namespace dranet {
namespace {

void RequireUniqueNonEmpty(const std::vector<std::string>& names, const char* what) {
  if (names.empty()) throw DomainError(std::string(what) + " list must be non-empty");
  std::unordered_set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) throw DomainError(std::string("duplicate ") + what + " name '" + n + "'");
  }
}

std::optional<int> IndexOf(const std::vector<std::string>& names, const std::string& name) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<int>(it - names.begin());
}

}  // namespace

VocabularySpec::VocabularySpec(std::vector<std::string> attributes, std::vector<std::string> objects)
    : attributes_(std::move(attributes)), objects_(std::move(objects)) {
  RequireUniqueNonEmpty(attributes_, "attribute");
  RequireUniqueNonEmpty(objects_, "object");
}

std::optional<int> VocabularySpec::FindAttribute(const std::string& name) const {
  return IndexOf(attributes_, name);
}

std::optional<int> VocabularySpec::FindObject(const std::string& name) const {
  return IndexOf(objects_, name);
}

int EncodePair(const CompositionLabel& label, int num_objects) {
  return label.attribute_id * num_objects + label.object_id;
}

CompositionLabel DecodePair(int pair_id, int num_objects) {
  return CompositionLabel{pair_id / num_objects, pair_id % num_objects};
}

int EncodePair(const CompositionLabel& label, const VocabularySpec& vocab) {
  if (label.attribute_id < 0 || label.attribute_id >= vocab.num_attributes() ||
      label.object_id < 0 || label.object_id >= vocab.num_objects()) {
    throw DomainError("composition label (" + std::to_string(label.attribute_id) + ", " +
                      std::to_string(label.object_id) + ") out of range");
  }
  return EncodePair(label, vocab.num_objects());
}

CompositionLabel DecodePair(int pair_id, const VocabularySpec& vocab) {
  if (pair_id < 0 || pair_id >= vocab.num_pairs()) {
    throw DomainError("pair id " + std::to_string(pair_id) + " out of range");
  }
  return DecodePair(pair_id, vocab.num_objects());
}

std::vector<CompositionLabel> OpenWorldSpace(const VocabularySpec& vocab) {
  std::vector<CompositionLabel> pairs;
  pairs.reserve(static_cast<size_t>(vocab.num_pairs()));
  for (int a = 0; a < vocab.num_attributes(); ++a)
    for (int o = 0; o < vocab.num_objects(); ++o) pairs.push_back({a, o});
  return pairs;
}

const char* ToString(SplitViolationKind kind) {
  switch (kind) {
    case SplitViolationKind::kLabelOutOfRange: return "label out of range";
    case SplitViolationKind::kPairOutOfRange: return "pair id out of range";
    case SplitViolationKind::kDisjointness: return "disjointness";
    case SplitViolationKind::kTrainNotSeen: return "train label not in seen pairs";
    case SplitViolationKind::kUnseenElementNotCovered: return "unseen element not covered";
    case SplitViolationKind::kTestOutsideSpace: return "test label outside seen and unseen pairs";
  }
  return "unknown";
}

std::vector<SplitViolation> ValidateSplit(const DatasetSplit& split, const VocabularySpec& vocab) {
  std::vector<SplitViolation> report;
  auto add = [&report](SplitViolationKind kind, std::string detail) {
    report.push_back({kind, std::string(ToString(kind)) + ": " + detail});
  };
  auto in_range = [&vocab](const CompositionLabel& l) {
    return l.attribute_id >= 0 && l.attribute_id < vocab.num_attributes() && l.object_id >= 0 &&
           l.object_id < vocab.num_objects();
  };
  auto describe = [&vocab](int pair_id) {
    const CompositionLabel l = DecodePair(pair_id, vocab.num_objects());
    return vocab.attributes()[l.attribute_id] + "|" + vocab.objects()[l.object_id];
  };

  bool pairs_ok = true;
  for (const auto* pairs : {&split.seen_pairs, &split.unseen_pairs}) {
    for (int p : *pairs) {
      if (p < 0 || p >= vocab.num_pairs()) {
        add(SplitViolationKind::kPairOutOfRange, std::to_string(p));
        pairs_ok = false;
      }
    }
  }
  if (!pairs_ok) return report;

  for (int p : split.seen_pairs) {
    if (split.unseen_pairs.count(p)) add(SplitViolationKind::kDisjointness, describe(p));
  }

  std::set<int> seen_attrs, seen_objs;
  for (int p : split.seen_pairs) {
    const CompositionLabel l = DecodePair(p, vocab.num_objects());
    seen_attrs.insert(l.attribute_id);
    seen_objs.insert(l.object_id);
  }
  for (int p : split.unseen_pairs) {
    const CompositionLabel l = DecodePair(p, vocab.num_objects());
    if (!seen_attrs.count(l.attribute_id)) {
      add(SplitViolationKind::kUnseenElementNotCovered,
          "attribute '" + vocab.attributes()[l.attribute_id] + "' of " + describe(p));
    }
    if (!seen_objs.count(l.object_id)) {
      add(SplitViolationKind::kUnseenElementNotCovered,
          "object '" + vocab.objects()[l.object_id] + "' of " + describe(p));
    }
  }

  for (const auto& s : split.train) {
    if (!in_range(s.label)) {
      add(SplitViolationKind::kLabelOutOfRange, s.sample_ref);
      continue;
    }
    const int p = EncodePair(s.label, vocab.num_objects());
    if (!split.seen_pairs.count(p)) add(SplitViolationKind::kTrainNotSeen, s.sample_ref + " (" + describe(p) + ")");
  }
  for (const auto& s : split.test) {
    if (!in_range(s.label)) {
      add(SplitViolationKind::kLabelOutOfRange, s.sample_ref);
      continue;
    }
    const int p = EncodePair(s.label, vocab.num_objects());
    if (!split.seen_pairs.count(p) && !split.unseen_pairs.count(p)) {
      add(SplitViolationKind::kTestOutsideSpace, s.sample_ref + " (" + describe(p) + ")");
    }
  }
  return report;
}

FeatureMap::FeatureMap(Tensor data) : data_(std::move(data)) {
  if (data_.rank() != 3 || data_.dim(0) < 1 || data_.dim(1) < 1 || data_.dim(2) < 1) {
    throw DomainError("feature map must have positive shape (C, H, W), got " + ShapeToString(data_.shape()));
  }
  if (!data_.AllFinite()) throw NumericError("feature map contains non-finite values");
}

ImageBatch::ImageBatch(Tensor data, std::vector<CompositionLabel> labels)
    : data_(std::move(data)), labels_(std::move(labels)) {
  if (data_.rank() != 4 || data_.dim(1) != 3) {
    throw DomainError("image batch must have shape (batch, 3, H, W), got " + ShapeToString(data_.shape()));
  }
  if (data_.dim(0) < 1) throw DomainError("image batch must hold at least one image");
  if (static_cast<int64_t>(labels_.size()) != data_.dim(0)) {
    throw DomainError("image batch has " + std::to_string(data_.dim(0)) + " images but " +
                      std::to_string(labels_.size()) + " labels");
  }
  for (double v : data_.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("image batch values must lie in [0, 1]");
  }
}

}  // namespace dranet
