#pragma once

// Pure forward/backward kernels for every layer primitive. Each function is
// a pure function of its arguments (batchnorm additionally updates the
// running statistics it is handed). Instantiated for float and double.

#include <cstdint>
#include <span>
#include <vector>

#include "wafer/core/tensor.hpp"

namespace wafer::core::ops {

enum class Activation { relu, relu6 };
enum class Mode { train, eval };

// --- conv2d -----------------------------------------------------------------

/// Output spatial extent of a convolution/pooling window; throws ConfigError
/// when (in + 2*pad - k) is not a multiple of stride.
std::size_t conv_out_size(std::size_t in, std::size_t k, int stride, int pad, const char* axis);

/// Cross-correlation with zero padding. x [N,Cin,H,W], w [Cout,Cin,kH,kW], b [Cout].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride, int pad);

template <typename T>
struct Conv2dGrads {
  Tensor<T> input;
  Tensor<T> kernel;
  Tensor<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& grad_out,
                               int stride, int pad);

// --- maxpool2d --------------------------------------------------------------

template <typename T>
struct PoolResult {
  Tensor<T> output;
  std::vector<std::uint32_t> argmax;  ///< flat input offset per output cell
};

/// Max over each window; ties resolve to the first row-major position.
template <typename T>
PoolResult<T> maxpool2d(const Tensor<T>& x, int window, int stride);

/// Routes each output gradient to its recorded argmax.
template <typename T>
Tensor<T> maxpool2d_backward(const Tensor<T>& grad_out, std::span<const std::uint32_t> argmax,
                             const Shape& input_shape);

// --- batchnorm2d ------------------------------------------------------------

template <typename T>
struct RunningStats {
  explicit RunningStats(std::size_t channels = 1)
      : mean(Shape{channels}, T{0}), var(Shape{channels}, T{1}) {}
  Tensor<T> mean;
  Tensor<T> var;
};

template <typename T>
struct BatchNormCache {
  Tensor<T> normalized;     ///< x-hat, same shape as input
  std::vector<T> inv_std;   ///< per channel
  Mode mode = Mode::train;
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// Train mode normalizes with batch statistics (population variance) and
/// folds them into `stats` with momentum 0.1; eval mode reads `stats`.
template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps,
                      Mode mode, RunningStats<T>& stats, BatchNormCache<T>* cache = nullptr);

template <typename T>
struct BatchNormGrads {
  Tensor<T> input;
  Tensor<T> gamma;
  Tensor<T> beta;
};

template <typename T>
BatchNormGrads<T> batchnorm2d_backward(const Tensor<T>& grad_out, const Tensor<T>& gamma,
                                       const BatchNormCache<T>& cache);

// --- dense ------------------------------------------------------------------

/// x [N,F], w [Fout,F], b [Fout] -> x w^T + b.
template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

template <typename T>
struct DenseGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& grad_out);

// --- elementwise ------------------------------------------------------------

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Activation kind);

/// Gradient passes only where x lies strictly inside the active region.
template <typename T>
Tensor<T> activation_backward(const Tensor<T>& x, const Tensor<T>& grad_out, Activation kind);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

// --- structural -------------------------------------------------------------

/// Concatenates [N,Ci,H,W] tensors along the channel axis.
template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> parts);

/// Inverse of concat_channels for gradients.
template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& grad, std::span<const std::size_t> channels);

/// [N,C,H,W] -> [N,C]
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);

template <typename T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& grad_out, const Shape& input_shape);

/// Nearest-neighbour 2x upsampling of [N,C,H,W].
template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x);

template <typename T>
Tensor<T> upsample2x_backward(const Tensor<T>& grad_out);

// --- losses -----------------------------------------------------------------

template <typename T>
struct SoftmaxCrossEntropy {
  T loss;
  Tensor<T> probs;
};

/// Row-wise softmax (max-subtracted) and mean negative log-likelihood.
template <typename T>
SoftmaxCrossEntropy<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

/// d(mean loss)/d logits = (probs - onehot) / N.
template <typename T>
Tensor<T> softmax_cross_entropy_backward(const Tensor<T>& probs, std::span<const int> labels);

/// Mean over all elements of (pred - target)^2.
template <typename T>
T mse(const Tensor<T>& pred, const Tensor<T>& target);

template <typename T>
Tensor<T> mse_backward(const Tensor<T>& pred, const Tensor<T>& target);

}  // namespace wafer::core::ops
