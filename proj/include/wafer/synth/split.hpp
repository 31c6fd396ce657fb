#pragma once

#include <array>
#include <cstdint>

#include "wafer/synth/dataset.hpp"

namespace wafer::synth {

struct SplitRatios {
  double train = 0.6, val = 0.2, test = 0.2;
};

struct Split {
  Dataset train, val, test;
};

/// Per-class allocation of n samples to (train, val, test): floors of ratio*n,
/// then the leftover samples go one each to the parts with the largest
/// fractional remainders (ties: train, val, test). When n >= 3 every part gets
/// at least one sample.
std::array<std::size_t, 3> allocate(std::size_t n, const SplitRatios& ratios);

/// Stratified split. Each class is shuffled by derive_seed({seed, class code});
/// parts keep the dataset's sample order. Throws SplitError for invalid
/// ratios or a class with 1 or 2 samples.
Split stratified_split(const Dataset& ds, const SplitRatios& ratios, std::uint64_t seed);

}  // namespace wafer::synth
