#include "wafer/synth/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "wafer/errors.hpp"

namespace wafer::synth {

NormStats imagenet_stats() { return {{0.485f, 0.456f, 0.406f}, {0.229f, 0.224f, 0.225f}}; }

template <typename T>
std::vector<float> resize_bilinear(const Image<T>& img, std::size_t out_h, std::size_t out_w) {
  if (img.empty()) throw DimensionError("cannot resize an empty image");
  std::vector<float> out(out_h * out_w);
  if (out_h == img.height && out_w == img.width) {
    std::copy(img.pixels.begin(), img.pixels.end(), out.begin());
    return out;
  }
  struct Tap {
    std::size_t i0, i1;
    double w1;
  };
  auto taps = [](std::size_t in, std::size_t outn) {
    std::vector<Tap> t(outn);
    const double scale = static_cast<double>(in) / static_cast<double>(outn);
    for (std::size_t o = 0; o < outn; ++o) {
      const double src = std::clamp((o + 0.5) * scale - 0.5, 0.0, static_cast<double>(in - 1));
      const auto i0 = static_cast<std::size_t>(src);
      t[o] = {i0, std::min(i0 + 1, in - 1), src - static_cast<double>(i0)};
    }
    return t;
  };
  const auto ty = taps(img.height, out_h), tx = taps(img.width, out_w);
  for (std::size_t r = 0; r < out_h; ++r) {
    const auto& a = ty[r];
    for (std::size_t c = 0; c < out_w; ++c) {
      const auto& b = tx[c];
      const double top = static_cast<double>(img.at(a.i0, b.i0)) * (1 - b.w1) + static_cast<double>(img.at(a.i0, b.i1)) * b.w1;
      const double bot = static_cast<double>(img.at(a.i1, b.i0)) * (1 - b.w1) + static_cast<double>(img.at(a.i1, b.i1)) * b.w1;
      out[r * out_w + c] = static_cast<float>(top * (1 - a.w1) + bot * a.w1);
    }
  }
  return out;
}

template <typename T>
ImageF resize_image(const Image<T>& img, std::size_t out_h, std::size_t out_w) {
  ImageF out;
  out.height = out_h;
  out.width = out_w;
  out.pixels = resize_bilinear(img, out_h, out_w);
  return out;
}

template std::vector<float> resize_bilinear(const ImageU8&, std::size_t, std::size_t);
template std::vector<float> resize_bilinear(const ImageF&, std::size_t, std::size_t);
template ImageF resize_image(const ImageU8&, std::size_t, std::size_t);
template ImageF resize_image(const ImageF&, std::size_t, std::size_t);

core::Tensor<float> preprocess(const ImageU8& img, const PreprocessOptions& opts) {
  if (opts.target < 8) throw ConfigError("preprocess target must be >= 8, got " + std::to_string(opts.target));
  const std::size_t res = opts.pretrained_path ? 224 : static_cast<std::size_t>(opts.target);
  const std::size_t channels = opts.pretrained_path ? 3 : 1;
  auto plane = resize_bilinear(img, res, res);
  core::Tensor<float> t({channels, res, res});
  for (std::size_t ch = 0; ch < channels; ++ch) {
    float* dst = t.data() + ch * res * res;
    for (std::size_t i = 0; i < plane.size(); ++i) dst[i] = plane[i] / 255.0f;
  }
  if (opts.norm) {
    normalize(t, *opts.norm);
  } else if (opts.pretrained_path) {
    normalize(t, imagenet_stats());
  }
  return t;
}

void normalize(core::Tensor<float>& t, const NormStats& stats) {
  const auto& s = t.shape();
  if (s.size() != 3 && s.size() != 4) throw DimensionError("normalize expects [C,H,W] or [N,C,H,W]");
  const std::size_t channels = s[s.size() - 3];
  const std::size_t plane = s[s.size() - 2] * s[s.size() - 1];
  if (stats.mean.size() != channels || stats.std.size() != channels) {
    throw DimensionError("normalization stats have " + std::to_string(stats.mean.size()) + " channels, tensor has " +
                         std::to_string(channels));
  }
  float* p = t.data();
  const std::size_t n = t.size() / (channels * plane);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < channels; ++ch) {
      const float m = stats.mean[ch], inv = 1.0f / stats.std[ch];
      for (std::size_t k = 0; k < plane; ++k, ++p) *p = (*p - m) * inv;
    }
}

core::Tensor<float> stack(const std::vector<core::Tensor<float>>& items) {
  if (items.empty()) throw DimensionError("cannot stack zero tensors");
  core::Shape shape{items.size()};
  const auto& first = items.front().shape();
  shape.insert(shape.end(), first.begin(), first.end());
  core::Tensor<float> out(shape);
  const std::size_t per = items.front().size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].shape() != first) throw DimensionError("stack: inconsistent item shapes");
    std::memcpy(out.data() + i * per, items[i].data(), per * sizeof(float));
  }
  return out;
}

}  // namespace wafer::synth
