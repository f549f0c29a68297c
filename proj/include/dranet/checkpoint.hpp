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

// Binary checkpoint layout, all integers little-endian:
//
//   "DRANETCK"  u32 version
//   u64 config_len, config JSON
//   u32 num_params, then per parameter:
//     u32 name_len, name, u32 rank, u32 dims[rank], f32 values[prod(dims)]
//   u64 FNV-1a hash of every preceding byte

#ifndef DRANET_CHECKPOINT_HPP_
#define DRANET_CHECKPOINT_HPP_

#include <filesystem>
#include <string>

#include "dranet/model.hpp"

namespace dranet {

inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
};

std::string SerializeCheckpoint(const ModelParams& params, const ModelConfig& config);
// Throws DataError on a corrupt blob and ConfigError when the parameters do
// not fit the embedded config.
Checkpoint DeserializeCheckpoint(const std::string& blob);

void SaveCheckpoint(const std::filesystem::path& path, const ModelParams& params, const ModelConfig& config);
Checkpoint LoadCheckpoint(const std::filesystem::path& path);
// Also checks every parameter against `expected` (ConfigError on mismatch).
ModelParams LoadCheckpoint(const std::filesystem::path& path, const ModelConfig& expected);

// Values are stored as float32; this is what a save/load round trip returns.
ModelParams RoundToFloat(const ModelParams& params);

uint64_t Fnv1a64(const void* data, size_t size);

}  // namespace dranet

#endif  // DRANET_CHECKPOINT_HPP_
