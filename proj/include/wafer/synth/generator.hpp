#pragma once

#include <cstdint>

#include "wafer/synth/image.hpp"
#include "wafer/synth/wafer_class.hpp"

namespace wafer::synth {

/// Difficulty knobs of the procedural generator.
struct GeneratorParams {
  double noise_sigma = 8.0;      // per-pixel speckle on the plate
  double defect_contrast = 1.0;  // multiplies every defect's darkening strength
};

struct GeneratedWafer {
  ImageU8 image;
  ImageU8 mask;  // same size as image; all zero when the class has no local defect
  WaferClass cls = WaferClass::Good;
};

/// Renders one size x size wafer of the given class. Pure function of its
/// arguments. Throws ConfigError if size < 32.
GeneratedWafer generate_wafer(WaferClass cls, std::uint64_t seed, int size,
                              const GeneratorParams& params = {});

}  // namespace wafer::synth
