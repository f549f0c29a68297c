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

#ifndef DRANET_PARAMS_HPP_
#define DRANET_PARAMS_HPP_

#include <map>
#include <string>
#include <vector>

#include "dranet/autograd.hpp"
#include "dranet/random.hpp"
#include "dranet/tensor.hpp"

namespace dranet {

// Ordered collection of named parameter tensors. Iteration order is insertion
// order, which fixes the checkpoint layout.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
  };

  void Add(std::string name, Tensor value);
  bool Contains(const std::string& name) const;
  Tensor& Get(const std::string& name);
  const Tensor& Get(const std::string& name) const;

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }
  int64_t NumScalars() const;

  bool operator==(const ParamStore& other) const;

 private:
  std::vector<Entry> entries_;
  std::map<std::string, size_t> index_;
};

// Graph leaves bound to a ParamStore, looked up by name.
class BoundParams {
 public:
  // Every entry becomes a Parameter (trainable) or, with trainable=false, a
  // Constant.
  BoundParams(ag::Graph& graph, const ParamStore& store, bool trainable = true);

  ag::Var operator()(const std::string& name) const;
  bool Contains(const std::string& name) const { return vars_.count(name) > 0; }
  const std::map<std::string, ag::Var>& vars() const { return vars_; }

 private:
  std::map<std::string, ag::Var> vars_;
};

// Zero-mean Gaussian with variance gain / fan_in.
Tensor FanInNormal(Shape shape, int64_t fan_in, double gain, Rng& rng);

}  // namespace dranet

#endif  // DRANET_PARAMS_HPP_
