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

#include "dranet/heatmap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include "dranet/errors.hpp"

namespace dranet {

Image8 Heatmap(const Tensor& map, int out_h, int out_w, HeatmapScale scale) {
  if (map.rank() != 2 || map.empty()) throw DomainError("heatmap expects a non-empty (h, w) map");
  if (out_h < 1 || out_w < 1) throw DomainError("heatmap output size must be positive");
  const int64_t h = map.dim(0), w = map.dim(1);
  double lo = 0.0, span = 1.0;
  if (scale == HeatmapScale::kNormalized) {
    const auto [mn, mx] = std::minmax_element(map.data(), map.data() + map.size());
    lo = *mn;
    span = *mx - *mn;
  }
  Image8 img;
  img.width = out_w;
  img.height = out_h;
  img.channels = 1;
  img.pixels.resize(static_cast<size_t>(out_h) * out_w);
  for (int y = 0; y < out_h; ++y) {
    const int64_t sy = std::min<int64_t>(h - 1, static_cast<int64_t>(y) * h / out_h);
    for (int x = 0; x < out_w; ++x) {
      const int64_t sx = std::min<int64_t>(w - 1, static_cast<int64_t>(x) * w / out_w);
      double v = map[sy * w + sx];
      if (!std::isfinite(v)) throw NumericError("heatmap value is not finite");
      v = span > 0.0 ? (v - lo) / span : 0.0;
      v = std::clamp(v, 0.0, 1.0);
      img.pixels[static_cast<size_t>(y) * out_w + x] = static_cast<uint8_t>(std::lround(255.0 * v));
    }
  }
  return img;
}

void WriteRawArray(const std::filesystem::path& path, const Tensor& values) {
  std::string blob = "ARR1";
  auto put32 = [&blob](uint32_t v) {
    for (int i = 0; i < 4; ++i) blob.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  put32(static_cast<uint32_t>(values.rank()));
  for (int64_t d : values.shape()) put32(static_cast<uint32_t>(d));
  for (int64_t i = 0; i < values.size(); ++i) put32(std::bit_cast<uint32_t>(static_cast<float>(values[i])));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

Tensor ReadRawArray(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  size_t pos = 0;
  auto get32 = [&]() {
    if (pos + 4 > blob.size()) throw DataError(path.string() + ": truncated array file");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(blob[pos + i])) << (8 * i);
    pos += 4;
    return v;
  };
  if (blob.compare(0, 4, "ARR1") != 0) throw DataError(path.string() + ": not an array file");
  pos = 4;
  const uint32_t rank = get32();
  if (rank > 8) throw DataError(path.string() + ": implausible rank");
  Shape shape;
  for (uint32_t i = 0; i < rank; ++i) shape.push_back(get32());
  Tensor t(shape);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = std::bit_cast<float>(get32());
  if (pos != blob.size()) throw DataError(path.string() + ": trailing bytes");
  return t;
}

}  // namespace dranet
