#include "wafer/train/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "wafer/errors.hpp"
#include "wafer/rng.hpp"

namespace wafer::train {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1, got " + std::to_string(epochs));
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1, got " + std::to_string(batch_size));
  if (!(base_lr > 0) || !std::isfinite(base_lr)) throw ConfigError("base_lr must be positive");
  if (!(weight_decay >= 0) || !std::isfinite(weight_decay)) throw ConfigError("weight_decay must be >= 0");
  if (patience < 1) throw ConfigError("patience must be >= 1, got " + std::to_string(patience));
  if (!(gamma > 0 && gamma < 1)) throw ConfigError("gamma must lie in (0, 1)");
  if (!(tolerance >= 0)) throw ConfigError("tolerance must be >= 0");
  for (int m : milestones) {
    if (m < 0) throw ConfigError("milestones must be >= 0");
  }
}

double multistep_lr(int epoch, const TrainConfig& cfg) {
  const auto k = std::count_if(cfg.milestones.begin(), cfg.milestones.end(), [epoch](int m) { return m <= epoch; });
  return cfg.base_lr * std::pow(cfg.gamma, static_cast<double>(k));
}

double lr_for_epoch(int epoch, const TrainConfig& cfg) {
  return cfg.multistep ? multistep_lr(epoch, cfg) : cfg.base_lr;
}

std::vector<std::vector<std::size_t>> minibatches(std::size_t n, int batch_size, int epoch, std::uint64_t seed) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed({seed, static_cast<std::uint64_t>(epoch), 0x6d62ULL}));
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> out;
  const auto bs = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < n; start += bs) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + bs)));
  }
  return out;
}

bool EarlyStopping::update(double loss) {
  ++epoch_;
  if (loss < best_ - tolerance_) {
    best_ = loss;
    best_epoch_ = epoch_;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

}  // namespace wafer::train
