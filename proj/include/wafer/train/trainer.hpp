#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "wafer/augment/transforms.hpp"
#include "wafer/eval/metrics.hpp"
#include "wafer/train/optimizer.hpp"
#include "wafer/train/schedule.hpp"
#include "wafer/zoo/model.hpp"

namespace wafer::train {

/// Model-ready single-channel images (already resized, unit scale or
/// normalized) with dense labels.
struct TrainSet {
  std::vector<synth::ImageF> images;
  std::vector<int> labels;

  std::size_t size() const noexcept { return images.size(); }
  bool empty() const noexcept { return images.empty(); }
};

/// Stacks the selected images into [N, channels, H, W], replicating the
/// plane across channels. With a pipeline, sample i is augmented with key
/// (seed, i, epoch).
template <typename T>
core::Tensor<T> make_batch(const TrainSet& set, std::span<const std::size_t> indices, std::size_t channels,
                           const augment::AugmentPipeline* pipeline = nullptr, std::uint64_t seed = 0,
                           std::uint64_t epoch = 0);

struct EvalResult {
  double loss = 0;  // mean softmax cross-entropy
  eval::MetricsReport metrics;
  eval::ConfusionMatrix confusion;
  std::vector<int> predictions;
};

/// Eval-mode pass over a whole set. Throws LabelError for labels outside the head.
template <typename T>
EvalResult evaluate(zoo::Model<T>& model, const TrainSet& set);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0, val_loss = 0, val_f1 = 0, lr = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 1-based; 0 if no epoch ran
  double best_val_loss = 0;
};

struct TrainOptions {
  const augment::AugmentPipeline* augment = nullptr;
  std::optional<std::filesystem::path> progress_csv;  // "epoch,train_loss,val_loss,val_f1,lr"
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Minibatch Adam training with early stopping on validation loss. The best
/// epoch's weights are restored into `model` before returning. Throws
/// TrainingError (with epoch and batch) on a non-finite loss or gradient.
template <typename T>
TrainHistory train_model(zoo::Model<T>& model, const TrainSet& train, const TrainSet& val, const TrainConfig& cfg,
                         const TrainOptions& opts = {});

}  // namespace wafer::train
