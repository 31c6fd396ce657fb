#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "wafer/zoo/model.hpp"

namespace wafer::eval {

struct LatencyStats {
  double median_ms = 0;
  double p90_ms = 0;
  std::vector<double> samples_ms;  // timed repetitions after warm-up
};

/// Median (mean of the middle pair for even counts) and nearest-rank p90.
LatencyStats summarize_latency(std::vector<double> samples_ms);

/// Times `reps` batch-1 eval forward passes on the calling thread after
/// `warmup` untimed passes. Throws ConfigError unless reps >= 10 and warmup >= 0.
template <typename T>
LatencyStats measure_latency(zoo::Model<T>& model, int warmup = 10, int reps = 100, std::uint64_t seed = 0);

/// File length / 1e6. Throws FileError if the file is missing.
double model_size_mb(const std::filesystem::path& weights_path);

struct BenchResult {
  std::size_t params = 0;
  double size_mb = 0;
  LatencyStats latency;
};

/// Parameter count, serialized size (written to `weights_path`) and latency.
template <typename T>
BenchResult bench_model(zoo::Model<T>& model, const std::filesystem::path& weights_path, int warmup = 10,
                        int reps = 100);

}  // namespace wafer::eval
