#include "wafer/eval/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "wafer/errors.hpp"
#include "wafer/rng.hpp"
#include "wafer/zoo/weights.hpp"

namespace wafer::eval {

LatencyStats summarize_latency(std::vector<double> samples_ms) {
  if (samples_ms.empty()) throw StatsError("no latency samples");
  LatencyStats s;
  s.samples_ms = samples_ms;
  std::sort(samples_ms.begin(), samples_ms.end());
  const std::size_t n = samples_ms.size();
  s.median_ms = n % 2 ? samples_ms[n / 2] : 0.5 * (samples_ms[n / 2 - 1] + samples_ms[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(n)));
  s.p90_ms = samples_ms[std::max<std::size_t>(rank, 1) - 1];
  return s;
}

template <typename T>
LatencyStats measure_latency(zoo::Model<T>& model, int warmup, int reps, std::uint64_t seed) {
  if (reps < 10) throw ConfigError("latency measurement needs reps >= 10, got " + std::to_string(reps));
  if (warmup < 0) throw ConfigError("warmup must be >= 0");
  core::Shape shape{1};
  shape.insert(shape.end(), model.input_shape().begin(), model.input_shape().end());
  core::Tensor<T> x(shape);
  fill_uniform(x.data(), x.size(), 0.0, 1.0, seed);

  auto once = [&] {
    core::GradTape<T> tape(false);
    auto y = model.forward(tape, tape.input(x), zoo::Mode::eval);
    return tape.value(y)[0];
  };
  volatile T sink{};
  for (int i = 0; i < warmup; ++i) sink = once();
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(reps));
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    sink = once();
    times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  (void)sink;
  return summarize_latency(std::move(times));
}

double model_size_mb(const std::filesystem::path& weights_path) {
  std::error_code ec;
  const auto bytes = std::filesystem::file_size(weights_path, ec);
  if (ec) throw FileError("cannot stat weights file " + weights_path.string() + ": " + ec.message());
  return static_cast<double>(bytes) / 1e6;
}

template <typename T>
BenchResult bench_model(zoo::Model<T>& model, const std::filesystem::path& weights_path, int warmup, int reps) {
  BenchResult r;
  r.params = zoo::count_params(model);
  zoo::save_weights(model, weights_path);
  r.size_mb = model_size_mb(weights_path);
  r.latency = measure_latency(model, warmup, reps);
  return r;
}

template LatencyStats measure_latency(zoo::Model<float>&, int, int, std::uint64_t);
template LatencyStats measure_latency(zoo::Model<double>&, int, int, std::uint64_t);
template BenchResult bench_model(zoo::Model<float>&, const std::filesystem::path&, int, int);
template BenchResult bench_model(zoo::Model<double>&, const std::filesystem::path&, int, int);

}  // namespace wafer::eval
