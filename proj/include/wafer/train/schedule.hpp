#pragma once

#include <cstdint>
#include <limits>
#include <vector>

namespace wafer::train {

struct TrainConfig {
  int epochs = 200;
  int batch_size = 64;
  double base_lr = 1e-3;
  double weight_decay = 1e-4;
  int patience = 10;  // kNoPatience disables early stopping
  bool multistep = false;
  std::vector<int> milestones{30, 60};
  double gamma = 0.1;
  double tolerance = 1e-6;  // val loss must drop by more than this to count
  std::uint64_t seed = 42;

  static constexpr int kNoPatience = std::numeric_limits<int>::max();

  /// Throws ConfigError for out-of-range fields.
  void validate() const;
};

/// base_lr * gamma^k, k = number of milestones <= epoch (0-based epochs).
double multistep_lr(int epoch, const TrainConfig& cfg);

/// Learning rate the trainer uses: the multi-step schedule when enabled,
/// otherwise the constant base rate.
double lr_for_epoch(int epoch, const TrainConfig& cfg);

/// Shuffled index batches over [0, n) keyed by (seed, epoch); the last
/// partial batch is kept. Throws ConfigError if batch_size < 1.
std::vector<std::vector<std::size_t>> minibatches(std::size_t n, int batch_size, int epoch, std::uint64_t seed);

/// Patience counter over a monitored loss. Epochs are 1-based.
class EarlyStopping {
 public:
  EarlyStopping(int patience, double tolerance) : patience_(patience), tolerance_(tolerance) {}

  /// Feeds the next epoch's loss; returns true if it is a new best.
  bool update(double loss);
  bool should_stop() const noexcept { return stale_ >= patience_; }
  int best_epoch() const noexcept { return best_epoch_; }
  double best_loss() const noexcept { return best_; }
  int epochs_seen() const noexcept { return epoch_; }

 private:
  int patience_;
  double tolerance_;
  double best_ = std::numeric_limits<double>::infinity();
  int best_epoch_ = 0;
  int epoch_ = 0;
  int stale_ = 0;
};

}  // namespace wafer::train
