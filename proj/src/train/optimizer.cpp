#include "wafer/train/optimizer.hpp"

#include <cmath>

#include "wafer/errors.hpp"

namespace wafer::train {

namespace {

template <typename T>
void check_gradient(const Tensor<T>& param, const Tensor<T>& grad, const std::string& name) {
  if (grad.shape() != param.shape()) {
    throw OptimizerError("gradient shape " + core::shape_str(grad.shape()) + " does not match parameter " + name +
                         " " + core::shape_str(param.shape()));
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) throw OptimizerError("non-finite gradient in " + name + " at " + std::to_string(i));
  }
}

template <typename T>
void apply_update(Tensor<T>& param, const Tensor<T>& grad, AdamMoments<T>& s, double lr, double wd,
                  const AdamHyper& h) {
  if (s.m.shape() != param.shape()) {
    s.m = Tensor<T>(param.shape());
    s.v = Tensor<T>(param.shape());
  }
  ++s.t;
  const double c1 = 1 - std::pow(h.beta1, static_cast<double>(s.t));
  const double c2 = 1 - std::pow(h.beta2, static_cast<double>(s.t));
  T* p = param.data();
  const T* g = grad.data();
  T* m = s.m.data();
  T* v = s.v.data();
  for (std::size_t i = 0, n = param.size(); i < n; ++i) {
    const double gi = static_cast<double>(g[i]) + wd * static_cast<double>(p[i]);
    const double mi = h.beta1 * m[i] + (1 - h.beta1) * gi;
    const double vi = h.beta2 * v[i] + (1 - h.beta2) * gi * gi;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    p[i] = static_cast<T>(p[i] - lr * (mi / c1) / (std::sqrt(vi / c2) + h.eps));
  }
}

}  // namespace

template <typename T>
void adam_step(Tensor<T>& param, const Tensor<T>& grad, AdamMoments<T>& state, double lr, double weight_decay,
               const AdamHyper& hyper) {
  check_gradient(param, grad, "parameter");
  apply_update(param, grad, state, lr, weight_decay, hyper);
}

template <typename T>
Adam<T>::Adam(std::vector<Parameter<T>*> params, AdamHyper hyper)
    : params_(std::move(params)), state_(params_.size()), hyper_(hyper) {}

template <typename T>
void Adam<T>::step(double lr, double weight_decay) {
  for (const auto* p : params_) {
    if (p->trainable) check_gradient(p->value, p->gradient, p->name);
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i]->trainable) apply_update(params_[i]->value, params_[i]->gradient, state_[i], lr, weight_decay, hyper_);
  }
  ++steps_;
}

template void adam_step(Tensor<float>&, const Tensor<float>&, AdamMoments<float>&, double, double, const AdamHyper&);
template void adam_step(Tensor<double>&, const Tensor<double>&, AdamMoments<double>&, double, double,
                        const AdamHyper&);
template class Adam<float>;
template class Adam<double>;

}  // namespace wafer::train
