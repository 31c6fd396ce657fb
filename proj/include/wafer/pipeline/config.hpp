#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wafer/train/schedule.hpp"

namespace wafer::pipeline {

/// Everything one experiment run needs. Defaults follow the published
/// training setup (200 epochs, batch 64, weight decay 1e-4, patience 10).
struct RunConfig {
  int experiment = 0;  // 0..12
  int classes = 8;     // 3, 5 or 8
  std::uint64_t seed = 42;       // split, init, batches, augmentation
  std::uint64_t data_seed = 7;   // dataset generation only
  std::filesystem::path data_dir = "data";
  std::filesystem::path out_dir = "results";

  double scale = 1.0;     // class counts relative to the full dataset
  int image_size = 256;   // generated wafer side
  int resolution = 256;   // model input side (VGG16 always uses 224)

  train::TrainConfig train;
  std::optional<bool> multistep;  // unset: architecture default

  std::optional<std::size_t> oversample_target;  // unset: Circle count of the full dataset
  int ae_epochs = 50;
  int ae_latent = 64;
  int ae_resolution = 64;
  int smote_k = 5;

  int bench_warmup = 10;
  int bench_reps = 100;
  bool allow_untrained_vgg = false;
  unsigned threads = 1;  // dataset generation workers

  /// Throws ConfigError for out-of-range values.
  void validate() const;
};

/// Sets one field from its textual form. Unknown keys and malformed values
/// throw ParseError prefixed with `where` (e.g. "run.cfg:3").
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value, const std::string& where);

/// Applies a "key = value" file ('#' starts a comment) on top of `cfg`.
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source);

/// Keys accepted by apply_setting, for help output.
const std::vector<std::string>& config_keys();

}  // namespace wafer::pipeline
