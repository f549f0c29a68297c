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

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "../test_util.hpp"
#include "dranet/errors.hpp"
#include "dranet/image_io.hpp"
#include "dranet/synthetic.hpp"

namespace dranet {
namespace {

namespace fs = std::filesystem;

int StyleId(const GeneratorConfig& c, const std::string& name) {
  for (size_t i = 0; i < c.attribute_styles.size(); ++i)
    if (c.attribute_styles[i] == name) return static_cast<int>(i);
  return -1;
}

int ShapeId(const GeneratorConfig& c, const std::string& name) {
  for (size_t i = 0; i < c.object_shapes.size(); ++i)
    if (c.object_shapes[i] == name) return static_cast<int>(i);
  return -1;
}

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

TEST(GeneratorConfigTest, Validation) {
  GeneratorConfig c;
  EXPECT_NO_THROW(c.Validate());
  c.image_size = 16;
  EXPECT_THROW(c.Validate(), ConfigError);
  c = GeneratorConfig();
  c.object_shapes = {"circle"};
  EXPECT_THROW(c.Validate(), ConfigError);
  c = GeneratorConfig();
  c.attribute_styles = {"red", "plaid"};
  EXPECT_THROW(c.Validate(), ConfigError);
  c = GeneratorConfig();
  c.noise_std = -0.1;
  EXPECT_THROW(c.Validate(), ConfigError);
}

TEST(RenderTest, Deterministic) {
  GeneratorConfig c;
  const int red = StyleId(c, "red"), circle = ShapeId(c, "circle");
  const RenderedSample a = RenderComposition(red, circle, 7, c);
  const RenderedSample b = RenderComposition(red, circle, 7, c);
  EXPECT_EQ(a.image.storage(), b.image.storage());
  EXPECT_EQ(a.shape_mask, b.shape_mask);
  const RenderedSample other = RenderComposition(red, circle, 8, c);
  EXPECT_NE(a.image.storage(), other.image.storage());
}

TEST(RenderTest, ImageFiniteAndInRange) {
  GeneratorConfig c;
  c.noise_std = 0.5;
  for (int a = 0; a < 8; ++a) {
    const RenderedSample s = RenderComposition(a, a, 3, c);
    EXPECT_EQ(s.image.shape(), (Shape{3, 64, 64}));
    for (double v : s.image.values()) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
  }
}

TEST(RenderTest, RejectsBadIds) {
  GeneratorConfig c;
  EXPECT_THROW(RenderComposition(8, 0, 0, c), DomainError);
  EXPECT_THROW(RenderComposition(0, -1, 0, c), DomainError);
}

TEST(RenderTest, LargeCoversAtLeastTwiceSmall) {
  GeneratorConfig c;
  const int large = StyleId(c, "large"), small = StyleId(c, "small");
  for (int o = 0; o < 8; ++o) {
    for (uint64_t seed = 0; seed < 5; ++seed) {
      const RenderedSample l = RenderComposition(large, o, seed, c);
      const RenderedSample s = RenderComposition(small, o, seed, c);
      ASSERT_GT(s.MaskPixelCount(), 0);
      EXPECT_GE(l.MaskPixelCount(), 2 * s.MaskPixelCount()) << c.object_shapes[o] << " seed " << seed;
    }
  }
}

TEST(RenderTest, RedDominatesInsideShape) {
  GeneratorConfig c;
  c.noise_std = 0.0;
  const int red = StyleId(c, "red");
  const int64_t plane = 64 * 64;
  for (int o = 0; o < 8; ++o) {
    const RenderedSample s = RenderComposition(red, o, 11, c);
    for (int64_t q = 0; q < plane; ++q) {
      if (!s.shape_mask[q]) continue;
      ASSERT_GT(s.image[q], s.image[plane + q]);
      ASSERT_GT(s.image[q], s.image[2 * plane + q]);
    }
  }
}

// Rotation-tolerant pixel counts: silhouette area plus counts in concentric
// rings around the silhouette centroid.
std::vector<double> CountFeatures(const RenderedSample& s, int size) {
  double cx = 0.0, cy = 0.0, n = 0.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      if (s.shape_mask[y * size + x]) cx += x, cy += y, n += 1.0;
  cx /= n;
  cy /= n;
  constexpr int kRings = 12;
  std::vector<double> f(kRings + 1, 0.0);
  f[0] = n / 100.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      if (!s.shape_mask[y * size + x]) continue;
      const int ring = std::min(kRings - 1, static_cast<int>(std::hypot(x - cx, y - cy) / 2.0));
      f[1 + ring] += 1.0 / 10.0;
    }
  return f;
}

TEST(RenderTest, ShapesLinearlySeparableFromPixelCounts) {
  GeneratorConfig c;
  c.noise_std = 0.0;
  const int style = StyleId(c, "red");
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int o = 0; o < 8; ++o)
    for (uint64_t seed = 0; seed < 24; ++seed) {
      x.push_back(CountFeatures(RenderComposition(style, o, seed, c), 64));
      y.push_back(o);
    }
  // Multiclass perceptron on the count features.
  const size_t dim = x[0].size() + 1;
  std::vector<std::vector<double>> w(8, std::vector<double>(dim, 0.0));
  auto score = [&](int k, const std::vector<double>& f) {
    double s = w[k][dim - 1];
    for (size_t i = 0; i + 1 < dim; ++i) s += w[k][i] * f[i];
    return s;
  };
  auto predict = [&](const std::vector<double>& f) {
    int best = 0;
    for (int k = 1; k < 8; ++k)
      if (score(k, f) > score(best, f)) best = k;
    return best;
  };
  int errors = 1;
  for (int epoch = 0; epoch < 5000 && errors > 0; ++epoch) {
    errors = 0;
    for (size_t i = 0; i < x.size(); ++i) {
      const int p = predict(x[i]);
      if (p == y[i]) continue;
      ++errors;
      for (size_t d = 0; d + 1 < dim; ++d) {
        w[y[i]][d] += x[i][d];
        w[p][d] -= x[i][d];
      }
      w[y[i]][dim - 1] += 1.0;
      w[p][dim - 1] -= 1.0;
    }
  }
  EXPECT_EQ(errors, 0);
}

TEST(BuildSplitTest, TwoByTwoHoldsOutOnePair) {
  const VocabularySpec v({"a0", "a1"}, {"o0", "o1"});
  SplitSpec spec;
  spec.unseen_fraction = 0.25;
  for (uint64_t seed = 0; seed < 8; ++seed) {
    spec.seed = seed;
    const DatasetSplit s = BuildSplit(v, spec);
    EXPECT_EQ(s.unseen_pairs.size(), 1u);
    EXPECT_EQ(s.seen_pairs.size(), 3u);
    EXPECT_TRUE(ValidateSplit(s, v).empty());
  }
}

TEST(BuildSplitTest, InfeasibleFraction) {
  const VocabularySpec v({"a0", "a1"}, {"o0", "o1"});
  SplitSpec spec;
  spec.unseen_fraction = 0.99;
  EXPECT_THROW(BuildSplit(v, spec), DomainError);
  spec.unseen_fraction = 0.5;
  spec.min_seen_per_element = 2;
  EXPECT_THROW(BuildSplit(v, spec), DomainError);
}

TEST(BuildSplitTest, DefaultVocabularyDeterministicAndValid) {
  const VocabularySpec v = GeneratorConfig().Vocabulary();
  SplitSpec spec;
  const DatasetSplit a = BuildSplit(v, spec);
  const DatasetSplit b = BuildSplit(v, spec);
  EXPECT_EQ(a.unseen_pairs, b.unseen_pairs);
  EXPECT_EQ(a.unseen_pairs.size(), 13u);
  EXPECT_TRUE(ValidateSplit(a, v).empty());
  spec.seed = 1;
  EXPECT_NE(BuildSplit(v, spec).unseen_pairs, a.unseen_pairs);
}

TEST(BuildSplitTest, CoverageHonoursMinimum) {
  const VocabularySpec v = GeneratorConfig().Vocabulary();
  SplitSpec spec;
  spec.unseen_fraction = 0.5;
  spec.min_seen_per_element = 3;
  const DatasetSplit s = BuildSplit(v, spec);
  std::vector<int> attr(8, 0), obj(8, 0);
  for (int p : s.seen_pairs) {
    ++attr[p / 8];
    ++obj[p % 8];
  }
  for (int i = 0; i < 8; ++i) {
    EXPECT_GE(attr[i], 3);
    EXPECT_GE(obj[i], 3);
  }
}

TEST(GenerateDatasetTest, DefaultCountsAndByteIdenticalManifest) {
  const fs::path a = testing::TempDir("gen_a"), b = testing::TempDir("gen_b");
  GeneratorConfig c;
  SplitSpec spec;
  const LoadedDataset ds = GenerateDataset(c, spec, a);
  GenerateDataset(c, spec, b);
  EXPECT_EQ(ds.split.train.size(), 1020u);
  std::set<int> test_pairs;
  for (const auto& s : ds.split.test) test_pairs.insert(EncodePair(s.label, ds.vocab));
  EXPECT_EQ(test_pairs.size(), 64u);
  EXPECT_EQ(ReadFile(a / kManifestFileName), ReadFile(b / kManifestFileName));
  EXPECT_EQ(ReadFile(a / ds.split.train[5].sample_ref), ReadFile(b / ds.split.train[5].sample_ref));

  const LoadedDataset loaded = LoadExternalSplit(a / kManifestFileName);
  EXPECT_EQ(loaded.vocab, ds.vocab);
  EXPECT_EQ(loaded.split.train, ds.split.train);
  EXPECT_EQ(loaded.split.test, ds.split.test);
  EXPECT_EQ(loaded.split.seen_pairs, ds.split.seen_pairs);
  EXPECT_EQ(loaded.split.unseen_pairs, ds.split.unseen_pairs);
  const Tensor img = LoadSampleImage(loaded, loaded.split.test[0]);
  EXPECT_EQ(img.shape(), (Shape{3, 64, 64}));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(GenerateDatasetTest, OneSamplePerSeenPair) {
  const fs::path dir = testing::TempDir("gen_one");
  GeneratorConfig c;
  c.object_shapes = {"circle", "square", "bar"};
  c.attribute_styles = {"red", "blue", "small"};
  c.samples_per_pair = 1;
  c.test_samples_per_pair = 1;
  SplitSpec spec;
  spec.unseen_fraction = 0.3;
  const LoadedDataset ds = GenerateDataset(c, spec, dir);
  std::map<int, int> counts;
  for (const auto& s : ds.split.train) ++counts[EncodePair(s.label, ds.vocab)];
  EXPECT_EQ(counts.size(), ds.split.seen_pairs.size());
  for (const auto& [pair, n] : counts) {
    EXPECT_TRUE(ds.split.seen_pairs.count(pair));
    EXPECT_EQ(n, 1);
  }
  EXPECT_EQ(ds.split.test.size(), 9u);
  fs::remove_all(dir);
}

constexpr char kHeader[] =
    "#attributes: red,blue\n"
    "#objects: circle,square\n"
    "#seen_pairs: red|circle;blue|circle;blue|square\n"
    "#unseen_pairs: red|square\n";

TEST(ManifestTest, WellFormedThreeRecords) {
  const fs::path dir = testing::TempDir("manifest_ok");
  WriteFile(dir / "m.tsv", std::string(kHeader) +
                               "img1.png\tred\tcircle\ttrain\n"
                               "img2.png\tred\tsquare\ttest\n"
                               "img3.png\tblue\tcircle\ttest\n");
  const LoadedDataset ds = LoadExternalSplit(dir / "m.tsv", false);
  EXPECT_EQ(ds.split.train.size(), 1u);
  EXPECT_EQ(ds.split.test.size(), 2u);
  EXPECT_EQ(ds.split.unseen_pairs, (std::set<int>{1}));
}

void ExpectFault(const std::string& text, const std::string& fragment, bool check_images = false) {
  const fs::path dir = testing::TempDir("manifest_bad");
  WriteFile(dir / "m.tsv", text);
  try {
    LoadExternalSplit(dir / "m.tsv", check_images);
    ADD_FAILURE() << "expected a DataError containing '" << fragment << "'";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

TEST(ManifestTest, TrainOnUnseenPair) {
  ExpectFault(std::string(kHeader) + "img1.png\tred\tsquare\ttrain\n", ":5: train label not in seen pairs");
}

TEST(ManifestTest, UnknownLabelIsCaseSensitive) {
  ExpectFault(std::string(kHeader) + "img1.png\tRED\tcircle\ttrain\n", "unknown attribute 'RED'");
}

TEST(ManifestTest, MalformedLineAndMissingImage) {
  ExpectFault(std::string(kHeader) + "img1.png\tred\tcircle\n", ":5: malformed record");
  ExpectFault(std::string(kHeader) + "img1.png\tred\tcircle\tval\n", "unknown subset");
  ExpectFault(std::string(kHeader) + "img1.png\tred\tcircle\ttrain\n", "missing image file", true);
  ExpectFault("#attributes: red\n", "missing header");
}

TEST(ManifestTest, MissingFile) {
  EXPECT_THROW(LoadExternalSplit("/nonexistent/manifest.tsv"), DataError);
}

}  // namespace
}  // namespace dranet
