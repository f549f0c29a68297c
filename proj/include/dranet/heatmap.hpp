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

#ifndef DRANET_HEATMAP_HPP_
#define DRANET_HEATMAP_HPP_

#include <filesystem>

#include "dranet/image_io.hpp"
#include "dranet/tensor.hpp"

namespace dranet {

enum class HeatmapScale {
  kAbsolute,   // gray = round(255 * clamp(v, 0, 1))
  kNormalized  // min maps to 0 and max to 255; a constant map is all zero
};

// (h, w) values to an 8-bit grayscale image of out_h x out_w, upsampled by
// nearest neighbour.
Image8 Heatmap(const Tensor& map, int out_h, int out_w, HeatmapScale scale);

// Raw array file: "ARR1", u32 rank, u32 dims[rank], float32 values, all
// little-endian.
void WriteRawArray(const std::filesystem::path& path, const Tensor& values);
Tensor ReadRawArray(const std::filesystem::path& path);

}  // namespace dranet

#endif  // DRANET_HEATMAP_HPP_
