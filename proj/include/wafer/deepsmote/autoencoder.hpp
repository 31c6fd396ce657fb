#pragma once

#include <cstdint>
#include <vector>

#include "wafer/synth/image.hpp"
#include "wafer/zoo/model.hpp"

namespace wafer::deepsmote {

/// Convolutional encoder/decoder. Encoder: four stride-2 4x4 convs (16, 32,
/// 64, 128 channels, relu) and a dense map to the latent. Decoder: dense,
/// relu, reshape, then four nearest-neighbour 2x upsample + 3x3 conv blocks;
/// the output passes through relu6(6x)/6 so it lies in [0, 1].
template <typename T>
struct AutoencoderPair {
  zoo::Model<T> encoder;
  zoo::Model<T> decoder;
  int latent_dim = 0;
  int resolution = 0;
  /// Set once training has run at least one epoch.
  bool trained = false;
};

/// Throws ConfigError unless input_res is a positive multiple of 16 and
/// latent_dim >= 1.
template <typename T>
AutoencoderPair<T> build_autoencoder(int latent_dim, int input_res, std::uint64_t seed = 0);

struct AutoencoderConfig {
  int epochs = 50;
  int batch_size = 16;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

struct AutoencoderHistory {
  std::vector<double> mse;  // mse[0] before training, mse[e] after epoch e (full data, eval mode)
  int best_epoch = 0;

  double initial() const { return mse.front(); }
  double best() const { return mse.at(static_cast<std::size_t>(best_epoch)); }
};

/// Minimizes pixel MSE with Adam. The best-so-far weights (lowest full-data
/// MSE, including the initial state) are kept. Images must be unit-scale and
/// match the pair's resolution. Throws ConfigError for fewer than 8 images,
/// TrainingError on a non-finite loss.
template <typename T>
AutoencoderHistory train_autoencoder(AutoencoderPair<T>& pair, const std::vector<synth::ImageF>& images,
                                     const AutoencoderConfig& cfg);

/// [N, latent] codes of unit-scale images at the pair's resolution.
template <typename T>
std::vector<std::vector<double>> encode(AutoencoderPair<T>& pair, const std::vector<synth::ImageF>& images);

/// Decoded unit-scale images, one per latent.
template <typename T>
std::vector<synth::ImageF> decode(AutoencoderPair<T>& pair, const std::vector<std::vector<double>>& latents);

}  // namespace wafer::deepsmote
