#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "wafer/errors.hpp"
#include "wafer/eval/report.hpp"
#include "wafer/pipeline/config.hpp"
#include "wafer/synth/dataset.hpp"
#include "wafer/train/trainer.hpp"
#include "wafer/zoo/model.hpp"

namespace wafer::pipeline {

enum class Oversampling { none, deepsmote, composition };

/// What an experiment id stands for.
struct ExperimentSpec {
  int id = 0;
  zoo::ArchId arch = zoo::ArchId::BaseNet;
  bool standard_augmentation = false;
  Oversampling oversampling = Oversampling::none;
  bool color_invert = false;
  bool freeze_backbone = false;  // VGG16 feature extraction
  bool bench_only = false;       // unless untrained VGG16 runs are allowed
  const char* title = "";
};

/// Throws ConfigError for ids outside 0..12.
const ExperimentSpec& experiment_spec(int id);

/// A module error annotated with the pipeline stage that raised it. The
/// original exception is kept in cause().
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what, std::exception_ptr cause)
      : Error(stage + ": " + what), stage_(std::move(stage)), cause_(std::move(cause)) {}
  const std::string& stage() const noexcept { return stage_; }
  std::exception_ptr cause() const noexcept { return cause_; }
  /// True if the root cause is a configuration or parse problem.
  bool is_config_error() const;

 private:
  std::string stage_;
  std::exception_ptr cause_;
};

/// Side outputs of a run, for callers that want more than the row.
struct RunArtifacts {
  train::TrainHistory history;
  std::filesystem::path run_dir;
  std::filesystem::path weights;
  std::uint64_t val_hash = 0, test_hash = 0;
  std::size_t train_size = 0;  // after oversampling
  std::size_t synthetic = 0;   // oversampled images added
};

/// Row label plus seed, e.g. "0a_s42"; names the run's output directory.
std::string run_name(const RunConfig& cfg);

/// subset -> stratified split -> oversample (train only) -> preprocess ->
/// train -> evaluate on test -> bench. Weights and the epoch log go to
/// out_dir/runs/<run_name>. Errors are rethrown as StageError.
eval::ResultsRow run_experiment(const RunConfig& cfg, const synth::Dataset& full, RunArtifacts* artifacts = nullptr);

/// Loads cfg.data_dir first (stage "load").
eval::ResultsRow run_experiment(const RunConfig& cfg, RunArtifacts* artifacts = nullptr);

struct SuiteOptions {
  std::vector<int> ids;
  std::vector<int> tasks;
  std::vector<std::uint64_t> seeds;  // empty: {42}
  unsigned parallel = 1;
  std::function<void(const eval::ResultsRow&)> on_row;  // called as rows finish
};

/// Cross product ids x tasks x seeds in that nesting order. A failed run
/// becomes a row with `error` set; the suite carries on. emit_report is called
/// once on base.out_dir. Throws ConfigError for empty id or task lists.
std::vector<eval::ResultsRow> run_suite(const RunConfig& base, const synth::Dataset& full, const SuiteOptions& opts);

/// Generates the dataset described by cfg (scale, image_size, data_seed) into cfg.data_dir.
synth::Dataset generate_data(const RunConfig& cfg);

/// Bench-only row for an architecture at a resolution; the weight file is
/// written to `scratch` to measure its size and removed afterwards.
eval::ResultsRow bench_row(zoo::ArchId arch, int classes, int resolution, int warmup, int reps,
                           const std::filesystem::path& scratch);

}  // namespace wafer::pipeline
