#pragma once

#include <optional>
#include <vector>

#include "wafer/core/tensor.hpp"
#include "wafer/synth/image.hpp"

namespace wafer::synth {

/// Per-channel normalization statistics on the [0, 1] float scale.
struct NormStats {
  std::vector<float> mean;
  std::vector<float> std;
};

/// Statistics used on the pretrained (3-channel, 224) path when none are given.
NormStats imagenet_stats();

/// Bilinear resize with half-pixel centers and clamp-to-edge sampling.
/// Same-size input is returned unchanged. Values stay on the 0..255 scale.
template <typename T>
std::vector<float> resize_bilinear(const Image<T>& img, std::size_t out_h, std::size_t out_w);

/// Resized copy as an image (float pixels on the input's scale).
template <typename T>
ImageF resize_image(const Image<T>& img, std::size_t out_h, std::size_t out_w);

struct PreprocessOptions {
  int target = 256;
  bool pretrained_path = false;  // 3 channels at 224 with imagenet statistics
  std::optional<NormStats> norm;
};

/// Image -> [C, H, W] float tensor in [0, 1], optionally normalized.
/// Throws ConfigError if target < 8.
core::Tensor<float> preprocess(const ImageU8& img, const PreprocessOptions& opts);

/// (x - mean) / std per channel, in place on a [C, H, W] or [N, C, H, W] tensor.
void normalize(core::Tensor<float>& t, const NormStats& stats);

/// Stacks preprocessed images into [N, C, H, W].
core::Tensor<float> stack(const std::vector<core::Tensor<float>>& items);

}  // namespace wafer::synth
