#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wafer/synth/generator.hpp"

namespace wafer::synth {

struct Sample {
  std::string name;  // path relative to the dataset root, e.g. "images/good_00003.pgm"
  WaferClass cls = WaferClass::Good;
  int label = 0;     // dense index into Dataset::classes
  ImageU8 image;
  ImageU8 mask;      // empty when no defect mask is available
};

struct Dataset {
  std::vector<WaferClass> classes;  // label -> class, in code order
  std::vector<Sample> samples;
  std::filesystem::path manifest;   // empty for in-memory datasets

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  std::size_t num_classes() const noexcept { return classes.size(); }
  /// Samples per label.
  std::vector<std::size_t> counts() const;
  std::size_t count(WaferClass c) const;
  /// Dense label of a class; ConfigError if the class is not part of the dataset.
  int label_of(WaferClass c) const;
  /// Appends a sample and sets its label from its class.
  void add(Sample s);
  std::vector<int> labels() const;
};

/// Dataset holding the given classes and no samples.
Dataset empty_dataset(std::vector<WaferClass> classes);

/// Rounds half-up, keeping at least 4 samples for every nonzero class.
std::array<int, kNumClasses> scale_counts(const std::array<int, kNumClasses>& counts, double scale);

struct GenerateOptions {
  int size = 256;
  GeneratorParams params{};
  unsigned threads = 1;
};

/// Renders counts[c] wafers per class into out_dir/images (and masks of local
/// defects into out_dir/masks), writes out_dir/manifest.csv and returns the
/// in-memory dataset. Sample i of class c is seeded by derive_seed({seed, c, i}).
Dataset generate_dataset(const std::array<int, kNumClasses>& counts, std::uint64_t seed,
                         const std::filesystem::path& out_dir, const GenerateOptions& opts = {});

/// Same samples as generate_dataset without touching the filesystem.
Dataset generate_in_memory(const std::array<int, kNumClasses>& counts, std::uint64_t seed,
                           const GenerateOptions& opts = {});

/// Reads manifest.csv ("filename,label") and every referenced PGM.
/// Throws FileError for a missing directory or manifest, ManifestError for a
/// malformed manifest line (with line number), and the image errors of
/// read_pgm (FileError naming the missing file, ParseError, UnsupportedFormatError).
Dataset load_dataset(const std::filesystem::path& dir);

/// Writes images, masks and manifest of an in-memory dataset.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

/// Keeps the classes of the 3/5/8-class task and re-indexes labels densely.
Dataset class_subset(const Dataset& ds, int task);

/// Order-sensitive FNV-1a digest of sample names and labels; used to assert
/// that a split's membership is unchanged.
std::uint64_t manifest_hash(const Dataset& ds);

}  // namespace wafer::synth
