#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "support/temp_dir.hpp"
#include "wafer/errors.hpp"
#include "wafer/rng.hpp"
#include "wafer/synth/dataset.hpp"
#include "wafer/synth/preprocess.hpp"
#include "wafer/synth/split.hpp"

using namespace wafer;
using namespace wafer::synth;
namespace fs = std::filesystem;

namespace {

ImageU8 random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  ImageU8 img(h, w);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.index(256));
  return img;
}

// Reference bilinear: half-pixel centers, clamped source coordinate.
long double ref_bilinear(const ImageU8& img, std::size_t r, std::size_t c, std::size_t oh, std::size_t ow) {
  auto coord = [](std::size_t o, std::size_t in, std::size_t out) {
    long double s = (o + 0.5L) * in / out - 0.5L;
    return std::min<long double>(std::max<long double>(s, 0), in - 1);
  };
  const long double y = coord(r, img.height, oh), x = coord(c, img.width, ow);
  const long y0 = static_cast<long>(std::floor(y)), x0 = static_cast<long>(std::floor(x));
  const long y1 = std::min<long>(y0 + 1, img.height - 1), x1 = std::min<long>(x0 + 1, img.width - 1);
  const long double fy = y - y0, fx = x - x0;
  auto px = [&](long rr, long cc) { return static_cast<long double>(img.at(rr, cc)); };
  return (1 - fy) * ((1 - fx) * px(y0, x0) + fx * px(y0, x1)) + fy * ((1 - fx) * px(y1, x0) + fx * px(y1, x1));
}

std::array<int, kNumClasses> uniform_counts(int n) {
  std::array<int, kNumClasses> c{};
  c.fill(n);
  return c;
}

}  // namespace

// --- generator ----------------------------------------------------------------------

TEST(Generator, GoodIsBrightWithEmptyMask) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    for (int size : {32, 64, 256}) {
      auto w = generate_wafer(WaferClass::Good, seed, size);
      EXPECT_GT(w.image.mean(), 150.0) << "seed " << seed << " size " << size;
      EXPECT_EQ(w.mask.total(), 0.0);
      EXPECT_EQ(w.image.height, static_cast<std::size_t>(size));
    }
  }
}

TEST(Generator, LowLevelIsDim) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    EXPECT_LT(generate_wafer(WaferClass::LowLevel, seed, 64).image.mean(), 100.0);
  }
}

TEST(Generator, DeterministicAndSeedSensitive) {
  for (WaferClass c : kAllClasses) {
    auto a = generate_wafer(c, 11, 64), b = generate_wafer(c, 11, 64), d = generate_wafer(c, 12, 64);
    EXPECT_EQ(a.image, b.image);
    EXPECT_EQ(a.mask, b.mask);
    EXPECT_NE(a.image, d.image);
  }
}

TEST(Generator, LocalDefectsAreMaskedAndDarker) {
  for (WaferClass c : {WaferClass::Circle, WaferClass::Crack, WaferClass::Splinter, WaferClass::Scratch}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto w = generate_wafer(c, seed, 128);
      double in = 0, in_n = 0;
      for (std::size_t i = 0; i < w.mask.pixels.size(); ++i) {
        if (w.mask.pixels[i] >= 200) {
          in += w.image.pixels[i];
          ++in_n;
        }
      }
      ASSERT_GT(in_n, 0) << class_name(c) << " seed " << seed;
      EXPECT_LT(in / in_n, w.image.mean()) << class_name(c) << " seed " << seed;
    }
  }
  for (WaferClass c : {WaferClass::Good, WaferClass::LowLevel, WaferClass::Displaced, WaferClass::WaferOnPin}) {
    EXPECT_EQ(generate_wafer(c, 3, 64).mask.total(), 0.0);
  }
}

TEST(Generator, DisplacedPlateLeavesFrame) {
  // Count bright plate pixels against a centered Good plate of the same seed
  // stream: a shift of >= 15% of the plate must remove at least ~15% of them.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto good = generate_wafer(WaferClass::Good, seed, 128);
    auto disp = generate_wafer(WaferClass::Displaced, seed, 128);
    auto bright = [](const ImageU8& img) {
      return std::count_if(img.pixels.begin(), img.pixels.end(), [](std::uint8_t v) { return v > 100; });
    };
    EXPECT_LT(static_cast<double>(bright(disp.image)), 0.87 * static_cast<double>(bright(good.image))) << seed;
  }
}

TEST(Generator, RejectsTinyImages) { EXPECT_THROW(generate_wafer(WaferClass::Good, 0, 31), ConfigError); }

TEST(Generator, MeanIntensitySeparatesGoodFromLowLevel) {
  double min_good = 1e9, max_low = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    min_good = std::min(min_good, generate_wafer(WaferClass::Good, seed, 64).image.mean());
    max_low = std::max(max_low, generate_wafer(WaferClass::LowLevel, seed, 64).image.mean());
  }
  EXPECT_LT(max_low, min_good);
}

// --- counts and datasets ------------------------------------------------------------

TEST(Counts, DefaultTotalMatchesTable) {
  int total = 0;
  for (int c : kDefaultCounts) total += c;
  EXPECT_EQ(total, 4341);
}

TEST(Counts, ScaleRoundsHalfUpWithFloorOfFour) {
  auto s = scale_counts(kDefaultCounts, 0.1);
  EXPECT_EQ(s[code(WaferClass::Good)], 110);
  EXPECT_EQ(s[code(WaferClass::Splinter)], 8);
  auto t = scale_counts(kDefaultCounts, 0.2);
  EXPECT_EQ(t, (std::array<int, kNumClasses>{219, 84, 70, 115, 199, 51, 16, 114}));
  auto tiny = scale_counts(kDefaultCounts, 0.001);
  for (int c : tiny) EXPECT_EQ(c, 4);
  std::array<int, kNumClasses> half{};
  half[0] = 5;
  EXPECT_EQ(scale_counts(half, 1.5)[0], 8);  // 7.5 -> 8
  half[0] = 1095;
  EXPECT_EQ(scale_counts(half, 0.1)[0], 110);  // 109.5 -> 110
  std::array<int, kNumClasses> zero{};
  EXPECT_EQ(scale_counts(zero, 3.0), zero);
}

TEST(Dataset, GenerateAndLoadRoundTrip) {
  testing_support::TempDir dir;
  auto counts = uniform_counts(3);
  counts[code(WaferClass::Splinter)] = 5;
  auto ds = generate_dataset(counts, 7, dir.path(), {.size = 48});
  EXPECT_EQ(ds.size(), 26u);
  auto back = load_dataset(dir.path());
  ASSERT_EQ(back.size(), ds.size());
  EXPECT_EQ(back.counts(), ds.counts());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back.samples[i].name, ds.samples[i].name);
    EXPECT_EQ(back.samples[i].label, ds.samples[i].label);
    EXPECT_EQ(back.samples[i].image, ds.samples[i].image);
    EXPECT_EQ(back.samples[i].mask, ds.samples[i].mask);
  }
  // manifest: header + one row per sample, LF endings
  std::ifstream in(dir / "manifest.csv", std::ios::binary);
  const std::string text((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(text.find('\r'), std::string::npos);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 27);
  EXPECT_EQ(manifest_hash(back), manifest_hash(ds));
}

TEST(Dataset, GenerationIndependentOfThreadCount) {
  auto a = generate_in_memory(uniform_counts(2), 5, {.size = 32, .threads = 1});
  auto b = generate_in_memory(uniform_counts(2), 5, {.size = 32, .threads = 4});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.samples[i].image, b.samples[i].image);
}

TEST(Dataset, AllZeroCountsGiveEmptyManifest) {
  testing_support::TempDir dir;
  auto ds = generate_dataset({}, 1, dir.path(), {.size = 32});
  EXPECT_TRUE(ds.empty());
  auto back = load_dataset(dir.path());
  EXPECT_TRUE(back.empty());
  EXPECT_EQ(fs::file_size(dir / "manifest.csv"), std::string("filename,label\n").size());
}

TEST(Dataset, LoadErrors) {
  testing_support::TempDir dir;
  generate_dataset(uniform_counts(1), 1, dir.path(), {.size = 32});
  EXPECT_THROW(load_dataset(dir / "nope"), FileError);

  {
    std::ofstream(dir / "manifest.csv", std::ios::app) << "images/ghost.pgm,good\n";
  }
  try {
    load_dataset(dir.path());
    FAIL() << "expected FileError";
  } catch (const FileError& e) {
    EXPECT_NE(std::string(e.what()).find("ghost.pgm"), std::string::npos);
  }

  {
    std::ofstream(dir / "manifest.csv") << "filename,label\nimages/good_00000.pgm,mystery\n";
  }
  try {
    load_dataset(dir.path());
    FAIL() << "expected ManifestError";
  } catch (const ManifestError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  {
    std::ofstream(dir / "manifest.csv") << "file,label\n";
  }
  EXPECT_THROW(load_dataset(dir.path()), ManifestError);
  {
    std::ofstream(dir / "manifest.csv") << "filename,label\nimages/good_00000.pgm,GOOD\n";
  }
  EXPECT_EQ(load_dataset(dir.path()).samples.at(0).cls, WaferClass::Good);
}

TEST(Pgm, RoundTripAndFormatErrors) {
  testing_support::TempDir dir;
  auto img = random_image(13, 21, 3);
  write_pgm(dir / "a.pgm", img);
  EXPECT_EQ(read_pgm(dir / "a.pgm"), img);

  {
    std::ofstream out(dir / "deep.pgm", std::ios::binary);
    out << "P5\n2 2\n65535\n";
    out.write("\0\0\0\0\0\0\0\0", 8);
  }
  EXPECT_THROW(read_pgm(dir / "deep.pgm"), UnsupportedFormatError);
  {
    std::ofstream out(dir / "short.pgm", std::ios::binary);
    out << "P5\n4 4\n255\nabc";
  }
  EXPECT_THROW(read_pgm(dir / "short.pgm"), ParseError);
  {
    std::ofstream out(dir / "junk.pgm", std::ios::binary);
    out << "GIF89a";
  }
  EXPECT_THROW(read_pgm(dir / "junk.pgm"), ParseError);
  {
    std::ofstream out(dir / "comment.pgm", std::ios::binary);
    out << "P5\n# made by hand\n2 1\n255\n";
    out.write("\x07\xff", 2);
  }
  auto c = read_pgm(dir / "comment.pgm");
  EXPECT_EQ(c.pixels, (std::vector<std::uint8_t>{7, 255}));
  try {
    read_pgm(dir / "missing.pgm");
    FAIL();
  } catch (const FileError& e) {
    EXPECT_NE(std::string(e.what()).find("missing.pgm"), std::string::npos);
  }
}

TEST(ClassSubset, TaskSizesAndRelabeling) {
  Dataset full = empty_dataset({kAllClasses.begin(), kAllClasses.end()});
  for (WaferClass c : kAllClasses)
    for (int i = 0; i < kDefaultCounts[code(c)]; ++i) full.add({"x", c, 0, {}, {}});
  auto t3 = class_subset(full, 3);
  EXPECT_EQ(t3.size(), 1867u);
  EXPECT_EQ(t3.counts(), (std::vector<std::size_t>{1096, 420, 351}));
  auto t5 = class_subset(full, 5);
  EXPECT_EQ(t5.num_classes(), 5u);
  for (const auto& s : t5.samples) {
    EXPECT_TRUE(s.cls != WaferClass::WaferOnPin && s.cls != WaferClass::Splinter && s.cls != WaferClass::Scratch);
    EXPECT_EQ(s.label, code(s.cls));
  }
  auto t8 = class_subset(full, 8);
  EXPECT_EQ(t8.labels(), full.labels());
  EXPECT_THROW(class_subset(full, 4), ConfigError);

  // relabeling is dense when classes in the middle are dropped
  Dataset sparse = empty_dataset({kAllClasses.begin(), kAllClasses.end()});
  sparse.add({"a", WaferClass::Scratch, 0, {}, {}});
  sparse.add({"b", WaferClass::Good, 0, {}, {}});
  EXPECT_EQ(class_subset(sparse, 8).labels(), (std::vector<int>{7, 0}));
  EXPECT_EQ(class_subset(sparse, 3).labels(), (std::vector<int>{0}));
}

// --- splitting ------------------------------------------------------------------------

TEST(Split, AllocationExamples) {
  EXPECT_EQ(allocate(10, {}), (std::array<std::size_t, 3>{6, 2, 2}));
  EXPECT_EQ(allocate(1096, {}), (std::array<std::size_t, 3>{658, 219, 219}));
  EXPECT_EQ(allocate(3, {}), (std::array<std::size_t, 3>{1, 1, 1}));
  EXPECT_EQ(allocate(0, {}), (std::array<std::size_t, 3>{0, 0, 0}));
  EXPECT_THROW(allocate(10, {0.5, 0.2, 0.2}), SplitError);
  EXPECT_THROW(allocate(10, {0.8, 0.3, -0.1}), SplitError);
}

TEST(Split, ProportionBoundForEverySize) {
  const SplitRatios r{};
  for (std::size_t n = 3; n <= 2000; ++n) {
    auto a = allocate(n, r);
    ASSERT_EQ(a[0] + a[1] + a[2], n);
    const double q[3] = {r.train * n, r.val * n, r.test * n};
    for (int i = 0; i < 3; ++i) ASSERT_LE(std::fabs(a[i] - q[i]), 1.0) << "n=" << n << " part " << i;
  }
}

TEST(Split, DisjointCoveringDeterministic) {
  Dataset ds = empty_dataset({kAllClasses.begin(), kAllClasses.end()});
  for (WaferClass c : kAllClasses)
    for (int i = 0; i < 20 + 7 * code(c); ++i)
      ds.add({std::string(class_name(c)) + std::to_string(i), c, 0, {}, {}});
  auto a = stratified_split(ds, {}, 42), b = stratified_split(ds, {}, 42), c = stratified_split(ds, {}, 43);
  std::multiset<std::string> all;
  for (auto* part : {&a.train, &a.val, &a.test})
    for (const auto& s : part->samples) all.insert(s.name);
  EXPECT_EQ(all.size(), ds.size());
  EXPECT_EQ(std::set<std::string>(all.begin(), all.end()).size(), ds.size());
  EXPECT_EQ(manifest_hash(a.train), manifest_hash(b.train));
  EXPECT_EQ(manifest_hash(a.test), manifest_hash(b.test));
  EXPECT_NE(manifest_hash(a.test), manifest_hash(c.test));
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    const auto n = ds.counts()[k];
    const auto alloc = allocate(n, {});
    EXPECT_EQ(a.train.counts()[k], alloc[0]);
    EXPECT_EQ(a.val.counts()[k], alloc[1]);
    EXPECT_EQ(a.test.counts()[k], alloc[2]);
  }
}

TEST(Split, TooSmallClassIsNamed) {
  Dataset ds = empty_dataset({WaferClass::Good, WaferClass::Circle});
  for (int i = 0; i < 10; ++i) ds.add({"g", WaferClass::Good, 0, {}, {}});
  ds.add({"c", WaferClass::Circle, 0, {}, {}});
  ds.add({"c", WaferClass::Circle, 0, {}, {}});
  try {
    stratified_split(ds, {}, 1);
    FAIL();
  } catch (const SplitError& e) {
    EXPECT_NE(std::string(e.what()).find("circle"), std::string::npos);
  }
}

// --- preprocessing --------------------------------------------------------------------

TEST(Preprocess, IdentitySizeIsExactScaling) {
  auto img = random_image(64, 64, 5);
  auto t = preprocess(img, {.target = 64});
  EXPECT_EQ(t.shape(), (core::Shape{1, 64, 64}));
  for (std::size_t i = 0; i < img.pixels.size(); ++i) ASSERT_EQ(t[i], img.pixels[i] / 255.0f);
}

TEST(Preprocess, ConstantImageStaysConstant) {
  ImageU8 img(100, 70, 128);
  auto t = preprocess(img, {.target = 33});
  for (float v : t.values()) ASSERT_EQ(v, 128 / 255.0f);
}

TEST(Preprocess, BilinearMatchesReference) {
  auto img = random_image(1024, 1024, 9);
  auto t = preprocess(img, {.target = 256});
  double worst = 0;
  for (std::size_t r = 0; r < 256; ++r)
    for (std::size_t c = 0; c < 256; ++c)
      worst = std::max(worst, static_cast<double>(std::fabs(t[r * 256 + c] - ref_bilinear(img, r, c, 256, 256) / 255)));
  EXPECT_LT(worst, 1e-5);
  // upsampling too
  auto small = random_image(17, 23, 4);
  auto resized = resize_bilinear(small, 40, 31);
  for (std::size_t r = 0; r < 40; ++r)
    for (std::size_t c = 0; c < 31; ++c)
      ASSERT_NEAR(resized[r * 31 + c], ref_bilinear(small, r, c, 40, 31), 1e-3);
}

TEST(Preprocess, PretrainedPathAndNormalization) {
  auto img = random_image(64, 64, 2);
  auto t = preprocess(img, {.target = 64, .pretrained_path = true});
  EXPECT_EQ(t.shape(), (core::Shape{3, 224, 224}));
  auto raw = resize_bilinear(img, 224, 224);
  const auto st = imagenet_stats();
  for (std::size_t ch = 0; ch < 3; ++ch)
    EXPECT_NEAR(t[ch * 224 * 224 + 1000], (raw[1000] / 255.0f - st.mean[ch]) / st.std[ch], 1e-5);

  auto n = preprocess(img, {.target = 64, .norm = NormStats{{0.5f}, {0.25f}}});
  EXPECT_NEAR(n[10], (img.pixels[10] / 255.0f - 0.5f) / 0.25f, 1e-6);
  EXPECT_THROW(preprocess(img, {.target = 7}), ConfigError);
  EXPECT_THROW(preprocess(img, {.target = 64, .norm = NormStats{{0.5f, 0.5f}, {1.f, 1.f}}}), DimensionError);

  auto batch = stack({preprocess(img, {.target = 16}), preprocess(img, {.target = 16})});
  EXPECT_EQ(batch.shape(), (core::Shape{2, 1, 16, 16}));
}
