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

#include "dranet/params.hpp"

#include <cmath>

#include "dranet/errors.hpp"

namespace dranet {

void ParamStore::Add(std::string name, Tensor value) {
  if (index_.count(name)) throw DomainError("duplicate parameter '" + name + "'");
  index_[name] = entries_.size();
  entries_.push_back({std::move(name), std::move(value)});
}

bool ParamStore::Contains(const std::string& name) const { return index_.count(name) > 0; }

Tensor& ParamStore::Get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw DomainError("unknown parameter '" + name + "'");
  return entries_[it->second].value;
}

const Tensor& ParamStore::Get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw DomainError("unknown parameter '" + name + "'");
  return entries_[it->second].value;
}

int64_t ParamStore::NumScalars() const {
  int64_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

bool ParamStore::operator==(const ParamStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.value.shape() != b.value.shape() || a.value.storage() != b.value.storage()) {
      return false;
    }
  }
  return true;
}

BoundParams::BoundParams(ag::Graph& graph, const ParamStore& store, bool trainable) {
  for (const auto& e : store.entries()) {
    vars_[e.name] = trainable ? graph.Parameter(e.value) : graph.Constant(e.value);
  }
}

ag::Var BoundParams::operator()(const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw DomainError("parameter '" + name + "' is not bound");
  return it->second;
}

Tensor FanInNormal(Shape shape, int64_t fan_in, double gain, Rng& rng) {
  Tensor t(std::move(shape));
  const double stddev = std::sqrt(gain / static_cast<double>(std::max<int64_t>(fan_in, 1)));
  for (double& v : t.storage()) v = stddev * rng.Normal();
  return t;
}

}  // namespace dranet
