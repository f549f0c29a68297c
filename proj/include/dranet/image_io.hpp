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

#ifndef DRANET_IMAGE_IO_HPP_
#define DRANET_IMAGE_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dranet/tensor.hpp"

namespace dranet {

// 8-bit interleaved pixels; channels is 1 (gray) or 3 (RGB).
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<uint8_t> pixels;
};

// Lossless PNG. Failures raise DataError.
void WritePng(const std::filesystem::path& path, const Image8& image);
Image8 ReadPng(const std::filesystem::path& path);

// (3, H, W) in [0, 1] <-> 8-bit RGB, rounding to nearest.
Image8 ToImage8(const Tensor& chw);
Tensor ToTensor(const Image8& image);

}  // namespace dranet

#endif  // DRANET_IMAGE_IO_HPP_
