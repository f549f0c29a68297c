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

#include "dranet/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <unordered_set>

#include "dranet/errors.hpp"
#include "dranet/image_io.hpp"
#include "dranet/random.hpp"

namespace dranet {
namespace {

using Rgb = std::array<double, 3>;

constexpr double kBackground = 0.1;
constexpr Rgb kNeutral = {0.75, 0.75, 0.75};
constexpr double kDarkFactor = 0.3;
// Fraction of the image size used as a shape's base radius.
constexpr double kBaseRadius = 0.25;
constexpr double kCenterJitter = 0.08;
constexpr double kMaxRotation = 25.0 * std::numbers::pi / 180.0;
// Texture cells live in the shape's normalized frame, so the period scales
// with the silhouette (a quarter of its bounding box).
constexpr double kTextureBand = 0.25;

enum class StyleKind { kColor, kTexture, kSize };

struct Style {
  StyleKind kind;
  Rgb color = kNeutral;
};

const std::map<std::string, Style>& StyleTable() {
  static const std::map<std::string, Style> table = {
      {"red", {StyleKind::kColor, {0.9, 0.15, 0.15}}},
      {"green", {StyleKind::kColor, {0.15, 0.85, 0.2}}},
      {"blue", {StyleKind::kColor, {0.2, 0.3, 0.95}}},
      {"yellow", {StyleKind::kColor, {0.9, 0.9, 0.15}}},
      {"magenta", {StyleKind::kColor, {0.9, 0.15, 0.9}}},
      {"cyan", {StyleKind::kColor, {0.15, 0.85, 0.9}}},
      {"striped", {StyleKind::kTexture}},
      {"dotted", {StyleKind::kTexture}},
      {"checker", {StyleKind::kTexture}},
      {"large", {StyleKind::kSize}},
      {"small", {StyleKind::kSize}},
  };
  return table;
}

struct Point {
  double u, v;
};

bool InsidePolygon(const std::vector<Point>& poly, double u, double v) {
  bool inside = false;
  for (size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point& a = poly[i];
    const Point& b = poly[j];
    if ((a.v > v) != (b.v > v) && u < (b.u - a.u) * (v - a.v) / (b.v - a.v) + a.u) inside = !inside;
  }
  return inside;
}

std::vector<Point> RegularStar(int points, double outer, double inner) {
  std::vector<Point> poly;
  for (int i = 0; i < 2 * points; ++i) {
    const double r = (i % 2 == 0) ? outer : inner;
    const double t = -std::numbers::pi / 2 + i * std::numbers::pi / points;
    poly.push_back({r * std::cos(t), r * std::sin(t)});
  }
  return poly;
}

std::vector<Point> Triangle() {
  std::vector<Point> poly;
  for (int i = 0; i < 3; ++i) {
    const double t = -std::numbers::pi / 2 + i * 2 * std::numbers::pi / 3;
    poly.push_back({std::cos(t), std::sin(t)});
  }
  return poly;
}

// Silhouette test in the shape's normalized, rotated frame.
bool InsideShape(const std::string& shape, double u, double v) {
  static const std::vector<Point> kStar = RegularStar(5, 1.0, 0.45);
  static const std::vector<Point> kTriangle = Triangle();
  const double r2 = u * u + v * v;
  if (shape == "circle") return r2 <= 0.9 * 0.9;
  if (shape == "square") return std::abs(u) <= 0.75 && std::abs(v) <= 0.75;
  if (shape == "triangle") return InsidePolygon(kTriangle, u, v);
  if (shape == "star") return InsidePolygon(kStar, u, v);
  if (shape == "cross") {
    return (std::abs(u) <= 0.3 && std::abs(v) <= 0.95) || (std::abs(v) <= 0.3 && std::abs(u) <= 0.95);
  }
  if (shape == "ring") return r2 <= 0.95 * 0.95 && r2 >= 0.55 * 0.55;
  if (shape == "diamond") return std::abs(u) / 0.65 + std::abs(v) <= 1.0;
  if (shape == "bar") return std::abs(u) <= 1.0 && std::abs(v) <= 0.32;
  throw DomainError("unknown shape '" + shape + "'");
}

double FloorMod(double x, double period) { return x - period * std::floor(x / period); }

// Fill color of a silhouette pixel at normalized coordinates (u, v).
Rgb ShadePixel(const std::string& style_name, const Style& style, double u, double v) {
  if (style.kind != StyleKind::kTexture) return style.color;
  const Rgb dark = {kNeutral[0] * kDarkFactor, kNeutral[1] * kDarkFactor, kNeutral[2] * kDarkFactor};
  const long bu = static_cast<long>(std::floor(u / kTextureBand));
  const long bv = static_cast<long>(std::floor(v / kTextureBand));
  if (style_name == "striped") return (bv % 2 == 0) ? kNeutral : dark;
  if (style_name == "checker") return ((bu + bv) % 2 == 0) ? kNeutral : dark;
  // dotted: one bright dot per 2x2 band cell.
  const double cell = 2 * kTextureBand;
  const double fu = FloorMod(u, cell) - kTextureBand;
  const double fv = FloorMod(v, cell) - kTextureBand;
  return (fu * fu + fv * fv <= 0.12 * 0.12) ? kNeutral : dark;
}

void ValidateNames(const std::vector<std::string>& names, const std::vector<std::string>& known,
                   const char* what) {
  std::unordered_set<std::string> seen;
  for (const auto& n : names) {
    if (std::find(known.begin(), known.end(), n) == known.end()) {
      throw ConfigError(std::string("unknown ") + what + " '" + n + "'");
    }
    if (!seen.insert(n).second) throw ConfigError(std::string("duplicate ") + what + " '" + n + "'");
  }
}

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> SplitOn(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) parts.push_back(cur);
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

std::string PairName(const VocabularySpec& vocab, int pair_id) {
  const CompositionLabel l = DecodePair(pair_id, vocab);
  return vocab.attributes()[l.attribute_id] + "|" + vocab.objects()[l.object_id];
}

std::string JoinPairs(const VocabularySpec& vocab, const std::set<int>& pairs) {
  std::string out;
  for (int p : pairs) {
    if (!out.empty()) out += ";";
    out += PairName(vocab, p);
  }
  return out;
}

[[noreturn]] void LineFault(const std::filesystem::path& path, int line, const std::string& what) {
  throw DataError(path.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

const std::vector<std::string>& KnownShapes() {
  static const std::vector<std::string> shapes = {"circle", "square", "triangle", "star",
                                                  "cross",  "ring",   "diamond",  "bar"};
  return shapes;
}

const std::vector<std::string>& KnownStyles() {
  static const std::vector<std::string> styles = {"red",     "green",  "blue",    "yellow",
                                                  "magenta", "cyan",   "striped", "dotted",
                                                  "checker", "large",  "small"};
  return styles;
}

void GeneratorConfig::Validate() const {
  if (image_size < 32) throw ConfigError("generator.image_size must be >= 32");
  if (object_shapes.size() < 2) throw ConfigError("generator needs at least 2 object shapes");
  if (attribute_styles.size() < 2) throw ConfigError("generator needs at least 2 attribute styles");
  ValidateNames(object_shapes, KnownShapes(), "shape");
  ValidateNames(attribute_styles, KnownStyles(), "style");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw ConfigError("generator.noise_std must be >= 0");
  if (samples_per_pair < 1) throw ConfigError("generator.samples_per_pair must be >= 1");
  if (test_samples_per_pair < 1) throw ConfigError("generator.test_samples_per_pair must be >= 1");
}

VocabularySpec GeneratorConfig::Vocabulary() const {
  return VocabularySpec(attribute_styles, object_shapes);
}

void SplitSpec::Validate() const {
  if (!(unseen_fraction > 0.0 && unseen_fraction < 1.0)) {
    throw ConfigError("split.unseen_fraction must lie in (0, 1)");
  }
  if (min_seen_per_element < 1) throw ConfigError("split.min_seen_per_element must be >= 1");
}

int64_t RenderedSample::MaskPixelCount() const {
  return std::count(shape_mask.begin(), shape_mask.end(), uint8_t{1});
}

RenderedSample RenderComposition(int attribute_id, int object_id, uint64_t jitter_seed,
                                 const GeneratorConfig& config) {
  config.Validate();
  if (attribute_id < 0 || attribute_id >= static_cast<int>(config.attribute_styles.size()) ||
      object_id < 0 || object_id >= static_cast<int>(config.object_shapes.size())) {
    throw DomainError("composition (" + std::to_string(attribute_id) + ", " + std::to_string(object_id) +
                      ") outside the generator vocabulary");
  }
  const std::string& style_name = config.attribute_styles[static_cast<size_t>(attribute_id)];
  const std::string& shape = config.object_shapes[static_cast<size_t>(object_id)];
  const Style& style = StyleTable().at(style_name);
  const int size = config.image_size;

  RenderedSample sample;
  sample.label = {attribute_id, object_id};
  RenderProvenance& prov = sample.provenance;
  prov.jitter_seed = jitter_seed;
  prov.noise_seed = DeriveSeed({jitter_seed, 0x6e6f697365ULL});
  Rng jitter(DeriveSeed({jitter_seed, 0x6a6974746572ULL}));
  prov.center_x = size * (0.5 + jitter.Uniform(-kCenterJitter, kCenterJitter));
  prov.center_y = size * (0.5 + jitter.Uniform(-kCenterJitter, kCenterJitter));
  prov.rotation = jitter.Uniform(-kMaxRotation, kMaxRotation);
  prov.scale = style_name == "large" ? kLargeScale : style_name == "small" ? kSmallScale : 1.0;

  const double radius = kBaseRadius * size * prov.scale;
  const double cos_t = std::cos(prov.rotation), sin_t = std::sin(prov.rotation);
  const int64_t plane = static_cast<int64_t>(size) * size;
  sample.image = Tensor(Shape{3, size, size}, kBackground);
  sample.shape_mask.assign(static_cast<size_t>(plane), 0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double dx = x + 0.5 - prov.center_x, dy = y + 0.5 - prov.center_y;
      const double u = (dx * cos_t + dy * sin_t) / radius;
      const double v = (-dx * sin_t + dy * cos_t) / radius;
      if (!InsideShape(shape, u, v)) continue;
      const int64_t q = static_cast<int64_t>(y) * size + x;
      sample.shape_mask[static_cast<size_t>(q)] = 1;
      const Rgb c = ShadePixel(style_name, style, u, v);
      for (int ch = 0; ch < 3; ++ch) sample.image[ch * plane + q] = c[static_cast<size_t>(ch)];
    }
  }
  if (config.noise_std > 0.0) {
    Rng noise(prov.noise_seed);
    for (double& v : sample.image.storage()) v = std::clamp(v + config.noise_std * noise.Normal(), 0.0, 1.0);
  }
  return sample;
}

DatasetSplit BuildSplit(const VocabularySpec& vocab, const SplitSpec& spec) {
  spec.Validate();
  const int num_pairs = vocab.num_pairs();
  const int holdout = static_cast<int>(std::lround(spec.unseen_fraction * num_pairs));
  const int need = spec.min_seen_per_element;
  if (need > vocab.num_attributes() || need > vocab.num_objects() ||
      num_pairs - holdout < need * std::max(vocab.num_attributes(), vocab.num_objects())) {
    throw DomainError("infeasible split: holding out " + std::to_string(holdout) + " of " +
                      std::to_string(num_pairs) + " pairs cannot keep every attribute and object in " +
                      std::to_string(need) + " seen pair(s)");
  }
  Rng rng(DeriveSeed({spec.seed, 0x73706c6974ULL}));
  std::vector<int> order(static_cast<size_t>(num_pairs));
  for (int p = 0; p < num_pairs; ++p) order[static_cast<size_t>(p)] = p;
  constexpr int kMaxAttempts = 100000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    rng.Shuffle(order);
    std::vector<int> attr_count(static_cast<size_t>(vocab.num_attributes()), 0);
    std::vector<int> obj_count(static_cast<size_t>(vocab.num_objects()), 0);
    for (int i = holdout; i < num_pairs; ++i) {
      const CompositionLabel l = DecodePair(order[static_cast<size_t>(i)], vocab);
      ++attr_count[static_cast<size_t>(l.attribute_id)];
      ++obj_count[static_cast<size_t>(l.object_id)];
    }
    const bool feasible = std::all_of(attr_count.begin(), attr_count.end(), [need](int c) { return c >= need; }) &&
                          std::all_of(obj_count.begin(), obj_count.end(), [need](int c) { return c >= need; });
    if (!feasible) continue;
    DatasetSplit split;
    split.unseen_pairs.insert(order.begin(), order.begin() + holdout);
    split.seen_pairs.insert(order.begin() + holdout, order.end());
    return split;
  }
  throw DomainError("infeasible split: no held-out set of " + std::to_string(holdout) +
                    " pairs keeps every element seen after " + std::to_string(kMaxAttempts) + " attempts");
}

void WriteManifest(const std::filesystem::path& path, const VocabularySpec& vocab, const DatasetSplit& split) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write manifest '" + path.string() + "'");
  auto join = [](const std::vector<std::string>& names) {
    std::string s;
    for (size_t i = 0; i < names.size(); ++i) s += (i ? "," : "") + names[i];
    return s;
  };
  out << "#attributes: " << join(vocab.attributes()) << "\n";
  out << "#objects: " << join(vocab.objects()) << "\n";
  out << "#seen_pairs: " << JoinPairs(vocab, split.seen_pairs) << "\n";
  out << "#unseen_pairs: " << JoinPairs(vocab, split.unseen_pairs) << "\n";
  auto records = [&](const std::vector<LabeledSample>& samples, const char* tag) {
    for (const auto& s : samples) {
      out << s.sample_ref << "\t" << vocab.attributes()[static_cast<size_t>(s.label.attribute_id)] << "\t"
          << vocab.objects()[static_cast<size_t>(s.label.object_id)] << "\t" << tag << "\n";
    }
  };
  records(split.train, "train");
  records(split.test, "test");
  out.flush();
  if (!out) throw DataError("failed writing manifest '" + path.string() + "'");
}

LoadedDataset GenerateDataset(const GeneratorConfig& config, const SplitSpec& spec,
                              const std::filesystem::path& out_dir) {
  config.Validate();
  const VocabularySpec vocab = config.Vocabulary();
  DatasetSplit split = BuildSplit(vocab, spec);

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images" / "train", ec);
  if (!ec) std::filesystem::create_directories(out_dir / "images" / "test", ec);
  if (ec) throw DataError("cannot create dataset directory '" + out_dir.string() + "': " + ec.message());

  auto render_to = [&](int pair_id, int index, uint64_t tag, const char* subdir) {
    const CompositionLabel l = DecodePair(pair_id, vocab);
    const uint64_t seed = DeriveSeed({config.seed, tag, static_cast<uint64_t>(pair_id), static_cast<uint64_t>(index)});
    const RenderedSample r = RenderComposition(l.attribute_id, l.object_id, seed, config);
    char name[64];
    std::snprintf(name, sizeof(name), "images/%s/p%05d_%04d.png", subdir, pair_id, index);
    WritePng(out_dir / name, ToImage8(r.image));
    return LabeledSample{name, l};
  };

  for (int p : split.seen_pairs) {
    for (int i = 0; i < config.samples_per_pair; ++i) split.train.push_back(render_to(p, i, 1, "train"));
  }
  for (int p = 0; p < vocab.num_pairs(); ++p) {
    if (!split.seen_pairs.count(p) && !split.unseen_pairs.count(p)) continue;
    for (int i = 0; i < config.test_samples_per_pair; ++i) split.test.push_back(render_to(p, i, 2, "test"));
  }
  WriteManifest(out_dir / kManifestFileName, vocab, split);
  return LoadedDataset{vocab, std::move(split), out_dir};
}

LoadedDataset LoadExternalSplit(const std::filesystem::path& manifest_path, bool check_images) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest '" + manifest_path.string() + "'");

  std::map<std::string, std::pair<int, std::string>> headers;  // key -> (line, value)
  struct Record {
    int line;
    std::string path, attribute, object, subset;
  };
  std::vector<Record> records;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (Trim(raw).empty()) continue;
    if (raw[0] == '#') {
      const auto colon = raw.find(':');
      if (colon == std::string::npos) continue;  // free-form comment
      headers[Trim(raw.substr(1, colon - 1))] = {line_no, Trim(raw.substr(colon + 1))};
      continue;
    }
    const auto fields = SplitOn(raw, '\t');
    if (fields.size() != 4) LineFault(manifest_path, line_no, "malformed record, expected 4 tab-separated fields");
    records.push_back({line_no, fields[0], fields[1], fields[2], fields[3]});
  }

  for (const char* key : {"attributes", "objects", "seen_pairs", "unseen_pairs"}) {
    if (!headers.count(key)) LineFault(manifest_path, line_no, std::string("missing header '#") + key + ":'");
  }
  auto names = [](const std::string& v) {
    std::vector<std::string> out;
    for (auto& n : SplitOn(v, ',')) out.push_back(Trim(n));
    return out;
  };
  std::optional<VocabularySpec> vocab;
  try {
    vocab.emplace(names(headers["attributes"].second), names(headers["objects"].second));
  } catch (const DomainError& e) {
    LineFault(manifest_path, headers["attributes"].first, e.what());
  }

  LoadedDataset ds{*vocab, {}, manifest_path.parent_path()};
  auto parse_pairs = [&](const std::string& key, std::set<int>& dst) {
    const auto& [line, value] = headers[key];
    if (value.empty()) return;
    for (const auto& item : SplitOn(value, ';')) {
      const auto parts = SplitOn(Trim(item), '|');
      if (parts.size() != 2) LineFault(manifest_path, line, "malformed pair '" + item + "'");
      const auto a = vocab->FindAttribute(parts[0]);
      const auto o = vocab->FindObject(parts[1]);
      if (!a) LineFault(manifest_path, line, "unknown attribute '" + parts[0] + "'");
      if (!o) LineFault(manifest_path, line, "unknown object '" + parts[1] + "'");
      dst.insert(EncodePair({*a, *o}, *vocab));
    }
  };
  parse_pairs("seen_pairs", ds.split.seen_pairs);
  parse_pairs("unseen_pairs", ds.split.unseen_pairs);

  for (const auto& r : records) {
    const auto a = vocab->FindAttribute(r.attribute);
    const auto o = vocab->FindObject(r.object);
    if (!a) LineFault(manifest_path, r.line, "unknown attribute '" + r.attribute + "'");
    if (!o) LineFault(manifest_path, r.line, "unknown object '" + r.object + "'");
    const CompositionLabel label{*a, *o};
    const int p = EncodePair(label, *vocab);
    if (r.subset == "train") {
      if (!ds.split.seen_pairs.count(p)) LineFault(manifest_path, r.line, "train label not in seen pairs");
      ds.split.train.push_back({r.path, label});
    } else if (r.subset == "test") {
      if (!ds.split.seen_pairs.count(p) && !ds.split.unseen_pairs.count(p)) {
        LineFault(manifest_path, r.line, "test label outside seen and unseen pairs");
      }
      ds.split.test.push_back({r.path, label});
    } else {
      LineFault(manifest_path, r.line, "unknown subset '" + r.subset + "', expected train or test");
    }
    if (check_images && !std::filesystem::exists(ds.root / r.path)) {
      LineFault(manifest_path, r.line, "missing image file '" + r.path + "'");
    }
  }

  const auto violations = ValidateSplit(ds.split, *vocab);
  if (!violations.empty()) {
    const int line = violations.front().kind == SplitViolationKind::kDisjointness
                         ? headers["unseen_pairs"].first
                         : headers["seen_pairs"].first;
    LineFault(manifest_path, line, violations.front().message);
  }
  return ds;
}

Tensor LoadSampleImage(const LoadedDataset& dataset, const LabeledSample& sample) {
  return ToTensor(ReadPng(dataset.root / sample.sample_ref));
}

}  // namespace dranet
