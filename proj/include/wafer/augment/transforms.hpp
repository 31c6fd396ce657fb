#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "wafer/synth/dataset.hpp"
#include "wafer/synth/preprocess.hpp"

namespace wafer::augment {

using synth::Image;
using synth::ImageF;
using synth::ImageU8;
using synth::NormStats;

enum class Flip { hflip, vflip, rot90, rot180 };

/// hflip mirrors columns, vflip mirrors rows, rot90 is clockwise
/// ((r, c) -> (c, H-1-r)), rot180 = hflip after vflip.
template <typename T>
Image<T> transform(const Image<T>& img, Flip op);

/// Separable Gaussian, radius ceil(3 sigma), clamp-to-edge. Throws ConfigError
/// unless sigma > 0. The byte version rounds to nearest.
template <typename T>
Image<T> gaussian_blur(const Image<T>& img, double sigma);

/// Normalized 1-D kernel of length 2 * ceil(3 sigma) + 1.
std::vector<double> gaussian_kernel(double sigma);

/// v -> 255 - v for bytes; v -> 1 - v for floats on the unit scale.
ImageU8 color_invert(const ImageU8& img);
ImageF color_invert(const ImageF& img);

/// Population mean/std over every pixel of every image (unit float scale),
/// std floored at 1e-6. Throws StatsError for no images or no pixels.
NormStats compute_norm_stats(const std::vector<ImageF>& images);
NormStats compute_norm_stats(const synth::Dataset& train);

/// Stochastic standard augmentation. Each draw is a pure function of
/// (seed, sample index, epoch); the normalization (if any) is applied last.
struct AugmentPipeline {
  double p_hflip = 0.5;
  double p_vflip = 0.5;
  std::vector<int> rotations{0, 90, 180};  // degrees, chosen uniformly
  double p_blur = 0.3;
  double sigma_lo = 0.5, sigma_hi = 1.5;
  std::optional<NormStats> norm;

  /// All probabilities zero, no rotation, no normalization.
  static AugmentPipeline identity();

  ImageF apply(const ImageF& img, std::uint64_t seed, std::uint64_t index, std::uint64_t epoch) const;
};

}  // namespace wafer::augment
