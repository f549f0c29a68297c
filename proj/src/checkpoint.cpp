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

#include "dranet/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dranet/config.hpp"
#include "dranet/errors.hpp"

namespace dranet {
namespace {

constexpr char kMagic[8] = {'D', 'R', 'A', 'N', 'E', 'T', 'C', 'K'};

class Writer {
 public:
  void Bytes(const void* p, size_t n) { out_.append(static_cast<const char*>(p), n); }
  void U32(uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void U64(uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void F32(float f) { U32(std::bit_cast<uint32_t>(f)); }
  void Str32(const std::string& s) {
    U32(static_cast<uint32_t>(s.size()));
    Bytes(s.data(), s.size());
  }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& blob, size_t limit) : blob_(blob), limit_(limit) {}

  void Need(size_t n) const {
    if (pos_ + n > limit_) throw DataError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::string Bytes(size_t n) {
    Need(n);
    std::string s = blob_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  uint64_t Uint(int width) {
    Need(static_cast<size_t>(width));
    uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(blob_[pos_ + i])) << (8 * i);
    pos_ += static_cast<size_t>(width);
    return v;
  }
  uint32_t U32() { return static_cast<uint32_t>(Uint(4)); }
  uint64_t U64() { return Uint(8); }
  float F32() { return std::bit_cast<float>(U32()); }
  size_t pos() const { return pos_; }

 private:
  const std::string& blob_;
  size_t limit_;
  size_t pos_ = 0;
};

}  // namespace

uint64_t Fnv1a64(const void* data, size_t size) {
  uint64_t h = 0xcbf29ce484222325ULL;
  const auto* p = static_cast<const uint8_t*>(data);
  for (size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

ModelParams RoundToFloat(const ModelParams& params) {
  ModelParams out;
  for (const auto& e : params.entries()) {
    Tensor t = e.value;
    for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(static_cast<float>(t[i]));
    out.Add(e.name, std::move(t));
  }
  return out;
}

std::string SerializeCheckpoint(const ModelParams& params, const ModelConfig& config) {
  Writer w;
  w.Bytes(kMagic, sizeof(kMagic));
  w.U32(kCheckpointVersion);
  const std::string json = ToJson(config).dump();
  w.U64(json.size());
  w.Bytes(json.data(), json.size());
  w.U32(static_cast<uint32_t>(params.size()));
  for (const auto& e : params.entries()) {
    w.Str32(e.name);
    w.U32(static_cast<uint32_t>(e.value.rank()));
    for (int64_t d : e.value.shape()) w.U32(static_cast<uint32_t>(d));
    for (int64_t i = 0; i < e.value.size(); ++i) {
      if (!std::isfinite(e.value[i])) throw NumericError("refusing to save non-finite parameter '" + e.name + "'");
      w.F32(static_cast<float>(e.value[i]));
    }
  }
  const uint64_t hash = Fnv1a64(w.str().data(), w.str().size());
  w.U64(hash);
  return std::move(w.str());
}

Checkpoint DeserializeCheckpoint(const std::string& blob) {
  if (blob.size() < sizeof(kMagic) + 12) throw DataError("checkpoint too short");
  const size_t body = blob.size() - 8;
  Reader tail(blob, blob.size());
  (void)tail.Bytes(body);
  if (tail.U64() != Fnv1a64(blob.data(), body)) throw DataError("checkpoint checksum mismatch");

  Reader r(blob, body);
  if (r.Bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) throw DataError("not a checkpoint file");
  const uint32_t version = r.U32();
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  const uint64_t json_len = r.U64();
  r.Need(json_len);
  Checkpoint ck;
  try {
    ck.config = ModelConfigFromJson(nlohmann::json::parse(r.Bytes(json_len)));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint config is malformed: ") + e.what());
  }
  const uint32_t count = r.U32();
  for (uint32_t k = 0; k < count; ++k) {
    const std::string name = r.Bytes(r.U32());
    const uint32_t rank = r.U32();
    if (rank > 8) throw DataError("checkpoint parameter '" + name + "' has implausible rank");
    Shape shape;
    for (uint32_t d = 0; d < rank; ++d) shape.push_back(r.U32());
    Tensor t(shape);
    r.Need(static_cast<size_t>(t.size()) * 4);
    for (int64_t i = 0; i < t.size(); ++i) t[i] = r.F32();
    if (ck.params.Contains(name)) throw DataError("checkpoint repeats parameter '" + name + "'");
    ck.params.Add(name, std::move(t));
  }
  if (r.pos() != body) throw DataError("checkpoint has trailing bytes");
  ValidateParams(ck.params, ck.config);
  return ck;
}

void SaveCheckpoint(const std::filesystem::path& path, const ModelParams& params, const ModelConfig& config) {
  const std::string blob = SerializeCheckpoint(params, config);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return DeserializeCheckpoint(blob);
}

ModelParams LoadCheckpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  Checkpoint ck = LoadCheckpoint(path);
  ValidateParams(ck.params, expected);
  return std::move(ck.params);
}

}  // namespace dranet
