#include "wafer/augment/transforms.hpp"

#include <algorithm>
#include <cmath>

#include "wafer/errors.hpp"
#include "wafer/rng.hpp"

namespace wafer::augment {

template <typename T>
Image<T> transform(const Image<T>& img, Flip op) {
  const std::size_t h = img.height, w = img.width;
  switch (op) {
    case Flip::hflip: {
      Image<T> out(h, w);
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) out.at(r, w - 1 - c) = img.at(r, c);
      return out;
    }
    case Flip::vflip: {
      Image<T> out(h, w);
      for (std::size_t r = 0; r < h; ++r)
        std::copy_n(img.pixels.begin() + static_cast<std::ptrdiff_t>(r * w), w,
                    out.pixels.begin() + static_cast<std::ptrdiff_t>((h - 1 - r) * w));
      return out;
    }
    case Flip::rot90: {
      Image<T> out(w, h);
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) out.at(c, h - 1 - r) = img.at(r, c);
      return out;
    }
    case Flip::rot180: {
      Image<T> out = img;
      std::reverse(out.pixels.begin(), out.pixels.end());
      return out;
    }
  }
  return img;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0) || !std::isfinite(sigma)) throw ConfigError("blur sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0;
  for (int d = -radius; d <= radius; ++d) sum += k[d + radius] = std::exp(-d * d / (2 * sigma * sigma));
  for (auto& v : k) v /= sum;
  return k;
}

template <typename T>
Image<T> gaussian_blur(const Image<T>& img, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const long radius = static_cast<long>(k.size() / 2);
  const long h = static_cast<long>(img.height), w = static_cast<long>(img.width);
  std::vector<double> tmp(img.pixels.size());
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c) {
      double acc = 0;
      for (long d = -radius; d <= radius; ++d) acc += k[d + radius] * img.at(r, std::clamp(c + d, 0L, w - 1));
      tmp[r * w + c] = acc;
    }
  Image<T> out(img.height, img.width);
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c) {
      double acc = 0;
      for (long d = -radius; d <= radius; ++d) acc += k[d + radius] * tmp[std::clamp(r + d, 0L, h - 1) * w + c];
      if constexpr (std::is_same_v<T, std::uint8_t>) {
        out.pixels[r * w + c] = static_cast<std::uint8_t>(std::lround(std::clamp(acc, 0.0, 255.0)));
      } else {
        out.pixels[r * w + c] = static_cast<T>(acc);
      }
    }
  return out;
}

ImageU8 color_invert(const ImageU8& img) {
  ImageU8 out = img;
  for (auto& v : out.pixels) v = static_cast<std::uint8_t>(255 - v);
  return out;
}

ImageF color_invert(const ImageF& img) {
  ImageF out = img;
  for (auto& v : out.pixels) v = 1.0f - v;
  return out;
}

NormStats compute_norm_stats(const std::vector<ImageF>& images) {
  std::size_t n = 0;
  double sum = 0;
  for (const auto& img : images) {
    n += img.pixels.size();
    for (float v : img.pixels) sum += v;
  }
  if (n == 0) throw StatsError("cannot compute normalization statistics of an empty image set");
  const double mean = sum / static_cast<double>(n);
  double ss = 0;
  for (const auto& img : images)
    for (float v : img.pixels) ss += (v - mean) * (v - mean);
  const double sd = std::max(std::sqrt(ss / static_cast<double>(n)), 1e-6);
  return {{static_cast<float>(mean)}, {static_cast<float>(sd)}};
}

NormStats compute_norm_stats(const synth::Dataset& train) {
  std::vector<ImageF> unit;
  unit.reserve(train.size());
  for (const auto& s : train.samples) {
    ImageF f = synth::to_float(s.image);
    for (auto& v : f.pixels) v /= 255.0f;
    unit.push_back(std::move(f));
  }
  return compute_norm_stats(unit);
}

AugmentPipeline AugmentPipeline::identity() {
  AugmentPipeline p;
  p.p_hflip = p.p_vflip = p.p_blur = 0;
  p.rotations = {0};
  return p;
}

ImageF AugmentPipeline::apply(const ImageF& img, std::uint64_t seed, std::uint64_t index, std::uint64_t epoch) const {
  Rng rng(derive_seed({seed, index, epoch}));
  // Draw every decision up front so the stream layout is fixed regardless of outcomes.
  const bool h = rng.bernoulli(p_hflip);
  const bool v = rng.bernoulli(p_vflip);
  const int rot = rotations.empty() ? 0 : rotations[rng.index(rotations.size())];
  const bool blur = rng.bernoulli(p_blur);
  const double sigma = rng.uniform(sigma_lo, sigma_hi);

  ImageF out = img;
  if (h) out = transform(out, Flip::hflip);
  if (v) out = transform(out, Flip::vflip);
  if (rot == 180) {
    out = transform(out, Flip::rot180);
  } else if (rot == 90 || rot == 270) {
    if (out.height != out.width) throw DimensionError("90 degree rotation requires a square image");
    out = transform(out, Flip::rot90);
    if (rot == 270) out = transform(out, Flip::rot180);
  } else if (rot != 0) {
    throw ConfigError("rotation must be a multiple of 90 degrees, got " + std::to_string(rot));
  }
  if (blur && sigma > 0) out = gaussian_blur(out, sigma);
  if (norm) {
    if (norm->mean.size() != 1) throw DimensionError("augmentation normalizes single-channel images only");
    const float m = norm->mean[0], inv = 1.0f / norm->std[0];
    for (auto& p : out.pixels) p = (p - m) * inv;
  }
  return out;
}

template ImageU8 transform(const ImageU8&, Flip);
template ImageF transform(const ImageF&, Flip);
template ImageU8 gaussian_blur(const ImageU8&, double);
template ImageF gaussian_blur(const ImageF&, double);

}  // namespace wafer::augment
