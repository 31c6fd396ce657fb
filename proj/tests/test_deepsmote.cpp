#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>

#include "wafer/deepsmote/smote.hpp"
#include "wafer/errors.hpp"
#include "wafer/rng.hpp"

using namespace wafer;
using namespace wafer::deepsmote;
using synth::WaferClass;

namespace {

std::vector<Latent> random_latents(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Latent> out(n, Latent(dim));
  for (auto& z : out)
    for (auto& v : z) v = rng.normal();
  return out;
}

// Brute force: sort all other points by (distance, index).
std::vector<std::size_t> brute_knn(const std::vector<Latent>& pts, std::size_t i, int k) {
  std::vector<std::pair<long double, std::size_t>> d;
  for (std::size_t j = 0; j < pts.size(); ++j) {
    if (j == i) continue;
    long double s = 0;
    for (std::size_t t = 0; t < pts[i].size(); ++t) {
      const long double diff = static_cast<long double>(pts[i][t]) - pts[j][t];
      s += diff * diff;
    }
    d.emplace_back(s, j);
  }
  std::sort(d.begin(), d.end());
  std::vector<std::size_t> out;
  for (int t = 0; t < k; ++t) out.push_back(d[static_cast<std::size_t>(t)].second);
  return out;
}

// Distance from p to the closed segment [a, b].
double segment_distance(const Latent& p, const Latent& a, const Latent& b) {
  long double ab2 = 0, apab = 0;
  for (std::size_t t = 0; t < p.size(); ++t) {
    ab2 += static_cast<long double>(b[t] - a[t]) * (b[t] - a[t]);
    apab += static_cast<long double>(p[t] - a[t]) * (b[t] - a[t]);
  }
  const long double u = ab2 > 0 ? std::clamp<long double>(apab / ab2, 0, 1) : 0;
  long double d2 = 0;
  for (std::size_t t = 0; t < p.size(); ++t) {
    const long double q = a[t] + u * (b[t] - a[t]);
    d2 += (p[t] - q) * (p[t] - q);
  }
  return static_cast<double>(std::sqrt(d2));
}

std::vector<synth::ImageF> circle_images(std::size_t n, int res) {
  std::array<int, synth::kNumClasses> counts{};
  counts[synth::code(WaferClass::Circle)] = static_cast<int>(n);
  auto ds = synth::generate_in_memory(counts, 5, {.size = res});
  return class_images(ds, WaferClass::Circle, res);
}

}  // namespace

TEST(Autoencoder, ShapeContract) {
  auto pair = build_autoencoder<float>(64, 64, 1);
  EXPECT_EQ(pair.decoder.output_shape(), (core::Shape{1, 64, 64}));
  EXPECT_EQ(pair.encoder.output_shape(), (core::Shape{64}));
  for (std::size_t n : {1u, 7u}) {
    auto imgs = circle_images(n, 64);
    auto z = encode(pair, imgs);
    ASSERT_EQ(z.size(), n);
    EXPECT_EQ(z[0].size(), 64u);
    auto back = decode(pair, z);
    ASSERT_EQ(back.size(), n);
    EXPECT_EQ(back[0].height, 64u);
    for (const auto& img : back)
      for (float v : img.pixels) {
        ASSERT_GE(v, 0.0f);
        ASSERT_LE(v, 1.0f);
      }
  }
  EXPECT_THROW(build_autoencoder<float>(64, 40), ConfigError);
  EXPECT_THROW(build_autoencoder<float>(0, 64), ConfigError);
}

TEST(Autoencoder, ZeroEpochsKeepsInitialization) {
  auto pair = build_autoencoder<float>(16, 32, 3);
  const auto enc = pair.encoder.snapshot(), dec = pair.decoder.snapshot();
  auto h = train_autoencoder(pair, circle_images(8, 32), {.epochs = 0});
  EXPECT_EQ(pair.encoder.snapshot(), enc);
  EXPECT_EQ(pair.decoder.snapshot(), dec);
  EXPECT_EQ(h.mse.size(), 1u);
  EXPECT_FALSE(pair.trained);
  EXPECT_THROW(train_autoencoder(pair, circle_images(7, 32), {.epochs = 1}), ConfigError);
}

TEST(Autoencoder, SameSeedSameTrajectory) {
  auto imgs = circle_images(12, 32);
  auto a = build_autoencoder<float>(16, 32, 4), b = build_autoencoder<float>(16, 32, 4);
  AutoencoderConfig cfg{.epochs = 3, .batch_size = 4, .seed = 9};
  EXPECT_EQ(train_autoencoder(a, imgs, cfg).mse, train_autoencoder(b, imgs, cfg).mse);
  EXPECT_EQ(a.decoder.snapshot(), b.decoder.snapshot());
}

TEST(Autoencoder, FiftyEpochsHalveReconstructionError) {
  auto imgs = circle_images(100, 64);
  auto pair = build_autoencoder<float>(64, 64, 7);
  const auto t0 = std::chrono::steady_clock::now();
  auto h = train_autoencoder(pair, imgs, {.epochs = 50, .batch_size = 16, .lr = 1e-3, .seed = 7});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  RecordProperty("seconds", std::to_string(secs));
  EXPECT_TRUE(pair.trained);
  ASSERT_EQ(h.mse.size(), 51u);
  EXPECT_LT(h.best(), 0.5 * h.initial()) << "initial " << h.initial() << " best " << h.best();
  // best-so-far is monotone and is what the pair now holds
  double running = h.mse[0];
  for (double m : h.mse) running = std::min(running, m);
  EXPECT_EQ(running, h.best());
}

// --- SMOTE geometry ----------------------------------------------------------------------

TEST(Smote, ForcedLambdaCopiesParents) {
  auto z = random_latents(10, 4, 1);
  SmoteSpec spec{.k = 3, .n = 20, .seed = 2, .fixed_lambda = 0.0};
  auto r0 = smote_latent(z, spec);
  for (std::size_t s = 0; s < r0.points.size(); ++s) EXPECT_EQ(r0.points[s], z[r0.parents[s].first]);
  spec.fixed_lambda = 1.0;
  auto r1 = smote_latent(z, spec);
  for (std::size_t s = 0; s < r1.points.size(); ++s) {
    for (std::size_t t = 0; t < 4; ++t) EXPECT_NEAR(r1.points[s][t], z[r1.parents[s].second][t], 1e-15);
  }
}

TEST(Smote, PointsLieOnParentSegmentsAndKnnMatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto z = random_latents(50, 8, seed);
    const auto nn = nearest_neighbors(z, 5);
    for (std::size_t i = 0; i < z.size(); ++i) ASSERT_EQ(nn[i], brute_knn(z, i, 5));
    auto r = smote_latent(z, {.k = 5, .n = 200, .seed = seed});
    ASSERT_EQ(r.points.size(), 200u);
    for (std::size_t s = 0; s < r.points.size(); ++s) {
      const auto [i, j] = r.parents[s];
      EXPECT_LT(segment_distance(r.points[s], z[i], z[j]), 1e-6);
      EXPECT_NE(std::find(nn[i].begin(), nn[i].end(), j), nn[i].end());
      EXPECT_GE(r.lambdas[s], 0.0);
      EXPECT_LE(r.lambdas[s], 1.0);
    }
  }
}

TEST(Smote, SpecErrors) {
  auto z = random_latents(5, 3, 1);
  EXPECT_THROW(smote_latent(z, {.k = 5, .n = 1}), SpecError);
  EXPECT_THROW(smote_latent(z, {.k = 0, .n = 1}), SpecError);
  EXPECT_NO_THROW(smote_latent(z, {.k = 4, .n = 1}));
}

// --- oversampling ------------------------------------------------------------------------

TEST(OversampleDeepSmote, ReachesTargetAndClampsPixels) {
  std::array<int, synth::kNumClasses> counts{};
  counts[synth::code(WaferClass::Good)] = 6;
  counts[synth::code(WaferClass::Splinter)] = 10;
  auto ds = synth::generate_in_memory(counts, 2, {.size = 48});
  auto pair = build_autoencoder<float>(8, 32, 1);
  SmoteSpec spec{.k = 3, .seed = 4};
  EXPECT_THROW(oversample_deepsmote(ds, WaferClass::Splinter, 20, pair, spec), UsageError);

  train_autoencoder(pair, class_images(ds, WaferClass::Splinter, 32), {.epochs = 1, .batch_size = 5});
  auto out = oversample_deepsmote(ds, WaferClass::Splinter, 25, pair, spec);
  EXPECT_EQ(out.count(WaferClass::Splinter), 25u);
  EXPECT_EQ(out.size(), ds.size() + 15);
  for (std::size_t i = ds.size(); i < out.size(); ++i) {
    EXPECT_EQ(out.samples[i].image.height, 48u);
    EXPECT_EQ(out.samples[i].label, out.label_of(WaferClass::Splinter));
  }
  EXPECT_EQ(oversample_deepsmote(ds, WaferClass::Splinter, 10, pair, spec).size(), ds.size());
  EXPECT_THROW(oversample_deepsmote(ds, WaferClass::Circle, 20, pair, spec), ConfigError);
}

TEST(OversampleDeepSmote, Table1Arithmetic) {
  std::array<int, synth::kNumClasses> counts{};
  counts[synth::code(WaferClass::Splinter)] = 79;
  auto ds = synth::generate_in_memory(counts, 3, {.size = 32});
  auto pair = build_autoencoder<float>(8, 16, 1);
  train_autoencoder(pair, class_images(ds, WaferClass::Splinter, 16), {.epochs = 1, .batch_size = 32});
  auto out = oversample_deepsmote(ds, WaferClass::Splinter, 351, pair, {.k = 5, .seed = 1});
  EXPECT_EQ(out.size() - ds.size(), 272u);
}
