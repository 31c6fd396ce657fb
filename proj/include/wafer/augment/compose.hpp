#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "wafer/synth/dataset.hpp"

namespace wafer::augment {

/// Random placement ranges for composition; any optional fixes that draw.
struct CompositionParams {
  double scale_lo = 0.5, scale_hi = 1.5;
  double sigma_hi = 1.5;               // blur sigma drawn from [0, sigma_hi]
  double alpha_lo = 0.5, alpha_hi = 0.9;
  double min_plate_mass = 0.8;         // fraction of mask mass that must land on the plate
  std::optional<double> alpha;
  std::optional<double> angle_deg;
  std::optional<double> scale;
  std::optional<double> sigma;
  /// Treat an all-zero mask as "nothing to compose" instead of an error.
  bool allow_empty_mask = false;
};

struct Composed {
  synth::ImageU8 image;
  synth::ImageU8 mask;  // the placed mask, same size as image
};

/// Pastes a (rotated, scaled, translated, blurred) defect mask onto a good
/// wafer as multiplicative darkening: out = good * (1 - alpha * m / 255).
/// Throws CompositionError for an all-zero mask (unless allowed) or when no
/// placement keeps enough mask mass on the plate.
Composed compose_defect(const synth::ImageU8& good, const synth::ImageU8& mask, std::uint64_t seed,
                        const CompositionParams& params = {});

/// Appends composed samples of each class until it holds target_count
/// samples. Sample j of class c uses derive_seed({seed, c, j}) to choose the
/// good image, the mask donor and the placement. Throws CompositionError when
/// the dataset has no Good samples or no masks for a class that needs samples.
synth::Dataset oversample_by_composition(const synth::Dataset& ds, const std::vector<synth::WaferClass>& classes,
                                         std::size_t target_count, std::uint64_t seed,
                                         const CompositionParams& params = {});

}  // namespace wafer::augment
