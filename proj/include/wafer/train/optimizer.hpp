#pragma once

#include <cstdint>
#include <vector>

#include "wafer/core/tensor.hpp"

namespace wafer::train {

using core::Parameter;
using core::Tensor;

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamMoments {
  Tensor<T> m, v;
  std::int64_t t = 0;
};

/// One Adam update with coupled L2 decay (g = grad + wd * param). Moments are
/// created on first use. Throws OptimizerError on a non-finite gradient or a
/// shape mismatch, leaving param and state untouched.
template <typename T>
void adam_step(Tensor<T>& param, const Tensor<T>& grad, AdamMoments<T>& state, double lr, double weight_decay,
               const AdamHyper& hyper = {});

/// Adam over a fixed parameter list; frozen parameters are skipped.
template <typename T>
class Adam {
 public:
  explicit Adam(std::vector<Parameter<T>*> params, AdamHyper hyper = {});

  /// Validates every gradient before touching any parameter, so a bad
  /// gradient aborts the whole step.
  void step(double lr, double weight_decay);
  std::int64_t steps() const noexcept { return steps_; }

 private:
  std::vector<Parameter<T>*> params_;
  std::vector<AdamMoments<T>> state_;
  AdamHyper hyper_;
  std::int64_t steps_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace wafer::train
