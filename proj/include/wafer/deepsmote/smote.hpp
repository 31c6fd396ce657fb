#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "wafer/deepsmote/autoencoder.hpp"
#include "wafer/synth/dataset.hpp"

namespace wafer::deepsmote {

using Latent = std::vector<double>;

struct SmoteSpec {
  int k = 5;
  std::size_t n = 0;  // synthetic points to draw
  std::uint64_t seed = 0;
  std::optional<double> fixed_lambda;  // forces every interpolation weight
};

/// Indices of the k nearest neighbours (Euclidean, self excluded, ties to the
/// lower index) of every point. Throws SpecError unless 1 <= k < size.
std::vector<std::vector<std::size_t>> nearest_neighbors(const std::vector<Latent>& points, int k);

struct SmoteResult {
  std::vector<Latent> points;
  std::vector<std::pair<std::size_t, std::size_t>> parents;  // (base, neighbour)
  std::vector<double> lambdas;
};

/// z = z_i + lambda (z_nn - z_i) with z_i uniform over the inputs, z_nn
/// uniform over its k nearest neighbours and lambda uniform in [0, 1].
SmoteResult smote_latent(const std::vector<Latent>& latents, const SmoteSpec& spec);

/// Encodes the class's images, synthesizes target_count - current latents,
/// decodes them and appends them (resized to the class's image size) with
/// the class label. Throws UsageError for an untrained pair and ConfigError
/// if the class is absent.
template <typename T>
synth::Dataset oversample_deepsmote(const synth::Dataset& ds, synth::WaferClass cls, std::size_t target_count,
                                    AutoencoderPair<T>& pair, SmoteSpec spec);

/// Unit-scale images of one class resized to `res` (input for the autoencoder).
std::vector<synth::ImageF> class_images(const synth::Dataset& ds, synth::WaferClass cls, int res);

}  // namespace wafer::deepsmote
