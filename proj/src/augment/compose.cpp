#include "wafer/augment/compose.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wafer/augment/transforms.hpp"
#include "wafer/errors.hpp"
#include "wafer/rng.hpp"

namespace wafer::augment {

namespace {

// Pixels brighter than this count as wafer plate when checking placement.
constexpr float kPlateThreshold = 80.0f;

float sample_bilinear(const ImageU8& m, double y, double x) {
  if (y <= -1 || x <= -1 || y >= static_cast<double>(m.height) || x >= static_cast<double>(m.width)) return 0;
  const long y0 = static_cast<long>(std::floor(y)), x0 = static_cast<long>(std::floor(x));
  const double fy = y - y0, fx = x - x0;
  auto px = [&](long r, long c) -> double {
    if (r < 0 || c < 0 || r >= static_cast<long>(m.height) || c >= static_cast<long>(m.width)) return 0;
    return m.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  };
  return static_cast<float>((1 - fy) * ((1 - fx) * px(y0, x0) + fx * px(y0, x0 + 1)) +
                            fy * ((1 - fx) * px(y0 + 1, x0) + fx * px(y0 + 1, x0 + 1)));
}

}  // namespace

Composed compose_defect(const ImageU8& good, const ImageU8& mask, std::uint64_t seed,
                        const CompositionParams& params) {
  if (good.empty()) throw CompositionError("good image is empty");
  const double mass = mask.total();
  if (mass <= 0) {
    if (params.allow_empty_mask) return {good, ImageU8(good.height, good.width)};
    throw CompositionError("defect mask has zero mass");
  }

  Rng rng(seed);
  const double angle = params.angle_deg.value_or(rng.uniform(0, 360)) * std::numbers::pi / 180;
  const double scale = params.scale.value_or(rng.uniform(params.scale_lo, params.scale_hi)) *
                       static_cast<double>(good.width) / static_cast<double>(mask.width);
  const double sigma = params.sigma.value_or(rng.uniform(0, params.sigma_hi));
  const double alpha = params.alpha.value_or(rng.uniform(params.alpha_lo, params.alpha_hi));

  // Mask mass centroid is the pivot for rotation and scaling.
  double cy = 0, cx = 0;
  for (std::size_t r = 0; r < mask.height; ++r)
    for (std::size_t c = 0; c < mask.width; ++c) {
      cy += mask.at(r, c) * (r + 0.5);
      cx += mask.at(r, c) * (c + 0.5);
    }
  cy /= mass;
  cx /= mass;

  const double cos_a = std::cos(angle), sin_a = std::sin(angle);
  auto place = [&](double ty, double tx) {
    ImageF out(good.height, good.width);
    for (std::size_t r = 0; r < good.height; ++r)
      for (std::size_t c = 0; c < good.width; ++c) {
        const double dy = (r + 0.5 - ty) / scale, dx = (c + 0.5 - tx) / scale;
        // inverse rotation back into mask coordinates
        const double sy = cy + cos_a * dy - sin_a * dx, sx = cx + sin_a * dy + cos_a * dx;
        out.at(r, c) = sample_bilinear(mask, sy - 0.5, sx - 0.5);
      }
    return out;
  };
  auto plate_fraction = [&](const ImageF& placed) {
    double on = 0, all = 0;
    for (std::size_t i = 0; i < placed.pixels.size(); ++i) {
      all += placed.pixels[i];
      if (good.pixels[i] > kPlateThreshold) on += placed.pixels[i];
    }
    return all > 0 ? on / all : 0.0;
  };

  ImageF placed;
  bool ok = false;
  for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
    placed = place(rng.uniform(0, static_cast<double>(good.height)), rng.uniform(0, static_cast<double>(good.width)));
    ok = plate_fraction(placed) >= params.min_plate_mass;
  }
  if (!ok) {
    // fall back to the plate's centre of brightness
    double py = 0, px = 0, n = 0;
    for (std::size_t r = 0; r < good.height; ++r)
      for (std::size_t c = 0; c < good.width; ++c)
        if (good.at(r, c) > kPlateThreshold) {
          py += r + 0.5;
          px += c + 0.5;
          ++n;
        }
    if (n == 0) throw CompositionError("good image has no visible plate");
    placed = place(py / n, px / n);
    if (plate_fraction(placed) < params.min_plate_mass) {
      throw CompositionError("no placement keeps the defect on the plate");
    }
  }
  if (sigma > 1e-3) placed = gaussian_blur(placed, sigma);

  Composed out{ImageU8(good.height, good.width), synth::to_u8(placed)};
  for (std::size_t i = 0; i < good.pixels.size(); ++i) {
    const double m = std::clamp(placed.pixels[i] / 255.0, 0.0, 1.0);
    out.image.pixels[i] = static_cast<std::uint8_t>(std::lround(good.pixels[i] * (1 - alpha * m)));
  }
  return out;
}

synth::Dataset oversample_by_composition(const synth::Dataset& ds, const std::vector<synth::WaferClass>& classes,
                                         std::size_t target_count, std::uint64_t seed,
                                         const CompositionParams& params) {
  synth::Dataset out = ds;
  std::vector<const synth::Sample*> goods;
  for (const auto& s : ds.samples)
    if (s.cls == synth::WaferClass::Good) goods.push_back(&s);

  for (synth::WaferClass cls : classes) {
    const std::size_t have = ds.count(cls);
    if (have >= target_count) continue;
    if (goods.empty()) throw CompositionError("no Good samples to compose onto");
    std::vector<const synth::Sample*> donors;
    for (const auto& s : ds.samples)
      if (s.cls == cls && !s.mask.empty() && s.mask.total() > 0) donors.push_back(&s);
    if (donors.empty()) {
      throw CompositionError("no defect masks available for class " + std::string(synth::class_name(cls)));
    }
    for (std::size_t j = 0; j < target_count - have; ++j) {
      const auto key = derive_seed({seed, static_cast<std::uint64_t>(synth::code(cls)), j});
      Rng pick(key);
      const auto* good = goods[pick.index(goods.size())];
      const auto* donor = donors[pick.index(donors.size())];
      auto composed = compose_defect(good->image, donor->mask, pick.next(), params);
      synth::Sample s;
      char idx[32];
      std::snprintf(idx, sizeof idx, "_%05zu", j);
      s.name = "composed/" + std::string(synth::class_name(cls)) + idx + ".pgm";
      s.cls = cls;
      s.image = std::move(composed.image);
      s.mask = std::move(composed.mask);
      out.add(std::move(s));
    }
  }
  return out;
}

}  // namespace wafer::augment
