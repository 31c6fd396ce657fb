#include "wafer/core/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gemm.hpp"

namespace wafer::core::ops {
namespace {

void require_rank(const Shape& s, std::size_t rank, const char* what) {
  if (s.size() != rank) {
    throw DimensionError(std::string(what) + " expects rank " + std::to_string(rank) +
                         ", got " + shape_str(s));
  }
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": shape " + shape_str(a) + " vs " + shape_str(b));
  }
}

// Upper bound on im2col buffer elements per group of samples.
constexpr std::size_t kColumnBudget = std::size_t{1} << 22;

struct ConvGeometry {
  std::size_t n, cin, h, w, cout, kh, kw, ho, wo;
  int stride, pad;
  std::size_t patch() const { return cin * kh * kw; }
  std::size_t plane() const { return ho * wo; }
};

template <typename T>
ConvGeometry conv_geometry(const Shape& xs, const Shape& ws, int stride, int pad) {
  require_rank(xs, 4, "conv2d input");
  require_rank(ws, 4, "conv2d kernel");
  if (stride < 1) throw ConfigError("conv2d stride must be >= 1, got " + std::to_string(stride));
  if (pad < 0) throw ConfigError("conv2d padding must be >= 0");
  if (xs[1] != ws[1]) {
    throw DimensionError("conv2d channel axis mismatch: input axis 1 = " + std::to_string(xs[1]) +
                         ", kernel axis 1 = " + std::to_string(ws[1]));
  }
  ConvGeometry g{};
  g.n = xs[0];
  g.cin = xs[1];
  g.h = xs[2];
  g.w = xs[3];
  g.cout = ws[0];
  g.kh = ws[2];
  g.kw = ws[3];
  g.stride = stride;
  g.pad = pad;
  g.ho = conv_out_size(g.h, g.kh, stride, pad, "height (axis 2)");
  g.wo = conv_out_size(g.w, g.kw, stride, pad, "width (axis 3)");
  return g;
}

// col[K, g*P] for samples [n0, n0+g).
template <typename T>
void im2col(const T* x, const ConvGeometry& g, std::size_t n0, std::size_t group, T* col) {
  const std::size_t P = g.plane();
  const std::size_t stride_row = group * P;
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        T* row = col + ((c * g.kh + ky) * g.kw + kx) * stride_row;
        for (std::size_t s = 0; s < group; ++s) {
          const T* src = x + ((n0 + s) * g.cin + c) * g.h * g.w;
          T* dst = row + s * P;
          for (std::size_t oy = 0; oy < g.ho; ++oy) {
            const long iy = static_cast<long>(oy) * g.stride + static_cast<long>(ky) - g.pad;
            T* out = dst + oy * g.wo;
            if (iy < 0 || iy >= static_cast<long>(g.h)) {
              std::fill(out, out + g.wo, T{0});
              continue;
            }
            const T* in_row = src + static_cast<std::size_t>(iy) * g.w;
            for (std::size_t ox = 0; ox < g.wo; ++ox) {
              const long ix = static_cast<long>(ox) * g.stride + static_cast<long>(kx) - g.pad;
              out[ox] = (ix < 0 || ix >= static_cast<long>(g.w)) ? T{0}
                                                                  : in_row[static_cast<std::size_t>(ix)];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, std::size_t n0, std::size_t group, T* gx) {
  const std::size_t P = g.plane();
  const std::size_t stride_row = group * P;
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const T* row = col + ((c * g.kh + ky) * g.kw + kx) * stride_row;
        for (std::size_t s = 0; s < group; ++s) {
          T* dst = gx + ((n0 + s) * g.cin + c) * g.h * g.w;
          const T* src = row + s * P;
          for (std::size_t oy = 0; oy < g.ho; ++oy) {
            const long iy = static_cast<long>(oy) * g.stride + static_cast<long>(ky) - g.pad;
            if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
            T* out_row = dst + static_cast<std::size_t>(iy) * g.w;
            const T* in = src + oy * g.wo;
            for (std::size_t ox = 0; ox < g.wo; ++ox) {
              const long ix = static_cast<long>(ox) * g.stride + static_cast<long>(kx) - g.pad;
              if (ix >= 0 && ix < static_cast<long>(g.w)) out_row[static_cast<std::size_t>(ix)] += in[ox];
            }
          }
        }
      }
    }
  }
}

std::size_t group_size(const ConvGeometry& g) {
  const std::size_t per_sample = g.patch() * g.plane();
  return std::clamp<std::size_t>(kColumnBudget / std::max<std::size_t>(per_sample, 1), 1, g.n);
}

}  // namespace

std::size_t conv_out_size(std::size_t in, std::size_t k, int stride, int pad, const char* axis) {
  const long span = static_cast<long>(in) + 2L * pad - static_cast<long>(k);
  if (span < 0) {
    throw DimensionError(std::string("window ") + std::to_string(k) + " exceeds padded " + axis +
                         " extent " + std::to_string(in + 2 * static_cast<std::size_t>(pad)));
  }
  if (span % stride != 0) {
    throw ConfigError(std::string("non-integer output size along ") + axis + ": (" +
                      std::to_string(in) + " + 2*" + std::to_string(pad) + " - " +
                      std::to_string(k) + ") is not divisible by stride " + std::to_string(stride));
  }
  return static_cast<std::size_t>(span / stride + 1);
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride, int pad) {
  const ConvGeometry g = conv_geometry<T>(x.shape(), w.shape(), stride, pad);
  if (b.shape() != Shape{g.cout}) {
    throw DimensionError("conv2d bias must be [" + std::to_string(g.cout) + "], got " +
                         shape_str(b.shape()));
  }
  Tensor<T> y(Shape{g.n, g.cout, g.ho, g.wo});
  const std::size_t K = g.patch();
  const std::size_t P = g.plane();
  const std::size_t G = group_size(g);
  std::vector<T> col(K * G * P);
  std::vector<T> out(g.cout * G * P);
  for (std::size_t n0 = 0; n0 < g.n; n0 += G) {
    const std::size_t group = std::min(G, g.n - n0);
    const std::size_t cols = group * P;
    im2col(x.data(), g, n0, group, col.data());
    detail::gemm_nn<T>(g.cout, cols, K, w.data(), K, col.data(), cols, out.data(), cols, false);
    for (std::size_t s = 0; s < group; ++s) {
      for (std::size_t co = 0; co < g.cout; ++co) {
        const T bias = b[co];
        const T* src = out.data() + co * cols + s * P;
        T* dst = y.data() + ((n0 + s) * g.cout + co) * P;
        for (std::size_t p = 0; p < P; ++p) dst[p] = src[p] + bias;
      }
    }
  }
  return y;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& grad_out,
                               int stride, int pad) {
  const ConvGeometry g = conv_geometry<T>(x.shape(), w.shape(), stride, pad);
  require_same_shape(grad_out.shape(), Shape{g.n, g.cout, g.ho, g.wo}, "conv2d grad_out");
  Conv2dGrads<T> grads{Tensor<T>(x.shape()), Tensor<T>(w.shape()), Tensor<T>(Shape{g.cout})};
  const std::size_t K = g.patch();
  const std::size_t P = g.plane();
  const std::size_t G = group_size(g);
  const std::vector<T> w_t = detail::transpose(w.data(), g.cout, K);
  std::vector<T> col(K * G * P);
  std::vector<T> gy(g.cout * G * P);
  std::vector<T> gcol(K * G * P);
  for (std::size_t n0 = 0; n0 < g.n; n0 += G) {
    const std::size_t group = std::min(G, g.n - n0);
    const std::size_t cols = group * P;
    for (std::size_t s = 0; s < group; ++s) {
      for (std::size_t co = 0; co < g.cout; ++co) {
        const T* src = grad_out.data() + ((n0 + s) * g.cout + co) * P;
        std::copy(src, src + P, gy.data() + co * cols + s * P);
      }
    }
    for (std::size_t co = 0; co < g.cout; ++co) {
      T acc{0};
      const T* row = gy.data() + co * cols;
      for (std::size_t j = 0; j < cols; ++j) acc += row[j];
      grads.bias[co] += acc;
    }
    im2col(x.data(), g, n0, group, col.data());
    const std::vector<T> col_t = detail::transpose(col.data(), K, cols);
    detail::gemm_nn<T>(g.cout, K, cols, gy.data(), cols, col_t.data(), K, grads.kernel.data(), K,
                       true);
    detail::gemm_nn<T>(K, cols, g.cout, w_t.data(), g.cout, gy.data(), cols, gcol.data(), cols,
                       false);
    col2im_add(gcol.data(), g, n0, group, grads.input.data());
  }
  return grads;
}

template <typename T>
PoolResult<T> maxpool2d(const Tensor<T>& x, int window, int stride) {
  require_rank(x.shape(), 4, "maxpool2d input");
  if (window < 1 || stride < 1) throw ConfigError("maxpool2d window and stride must be >= 1");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const auto win = static_cast<std::size_t>(window);
  if (win > h || win > w) {
    throw DimensionError("maxpool2d window " + std::to_string(window) + " larger than input " +
                         shape_str(x.shape()));
  }
  const std::size_t ho = conv_out_size(h, win, stride, 0, "height (axis 2)");
  const std::size_t wo = conv_out_size(w, win, stride, 0, "width (axis 3)");
  PoolResult<T> r{Tensor<T>(Shape{n, c, ho, wo}), std::vector<std::uint32_t>(n * c * ho * wo)};
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox, ++o) {
        std::size_t best = base + oy * stride * w + ox * stride;
        T best_v = x[best];
        for (std::size_t ky = 0; ky < win; ++ky) {
          for (std::size_t kx = 0; kx < win; ++kx) {
            const std::size_t idx = base + (oy * stride + ky) * w + ox * stride + kx;
            if (x[idx] > best_v) {
              best_v = x[idx];
              best = idx;
            }
          }
        }
        r.output[o] = best_v;
        r.argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

template <typename T>
Tensor<T> maxpool2d_backward(const Tensor<T>& grad_out, std::span<const std::uint32_t> argmax,
                             const Shape& input_shape) {
  if (argmax.size() != grad_out.size()) {
    throw DimensionError("maxpool2d_backward: argmax size does not match grad_out");
  }
  Tensor<T> gx(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += grad_out[i];
  return gx;
}

template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps,
                      Mode mode, RunningStats<T>& stats, BatchNormCache<T>* cache) {
  require_rank(x.shape(), 4, "batchnorm2d input");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  const Shape channel_shape{c};
  require_same_shape(gamma.shape(), channel_shape, "batchnorm2d gamma");
  require_same_shape(beta.shape(), channel_shape, "batchnorm2d beta");
  require_same_shape(stats.mean.shape(), channel_shape, "batchnorm2d running mean");
  if (!(eps > T{0})) throw ConfigError("batchnorm2d eps must be positive");
  const std::size_t count = n * hw;
  if (count == 0) throw DimensionError("batchnorm2d on an empty batch");

  Tensor<T> y(x.shape());
  std::vector<T> inv_std(c);
  Tensor<T> normalized = cache ? Tensor<T>(x.shape()) : Tensor<T>();
  const T momentum = static_cast<T>(kBatchNormMomentum);
  for (std::size_t ch = 0; ch < c; ++ch) {
    T mean, var;
    if (mode == Mode::train) {
      double sum = 0;
      for (std::size_t s = 0; s < n; ++s) {
        const T* p = x.data() + (s * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) sum += p[i];
      }
      const double m = sum / static_cast<double>(count);
      double sq = 0;
      for (std::size_t s = 0; s < n; ++s) {
        const T* p = x.data() + (s * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          const double d = p[i] - m;
          sq += d * d;
        }
      }
      mean = static_cast<T>(m);
      var = static_cast<T>(sq / static_cast<double>(count));
      stats.mean[ch] = (T{1} - momentum) * stats.mean[ch] + momentum * mean;
      stats.var[ch] = (T{1} - momentum) * stats.var[ch] + momentum * var;
    } else {
      mean = stats.mean[ch];
      var = stats.var[ch];
    }
    const T inv = T{1} / std::sqrt(var + eps);
    inv_std[ch] = inv;
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t off = (s * c + ch) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        const T xh = (x[off + i] - mean) * inv;
        if (cache) normalized[off + i] = xh;
        y[off + i] = gamma[ch] * xh + beta[ch];
      }
    }
  }
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
    cache->mode = mode;
  }
  return y;
}

template <typename T>
BatchNormGrads<T> batchnorm2d_backward(const Tensor<T>& grad_out, const Tensor<T>& gamma,
                                       const BatchNormCache<T>& cache) {
  require_same_shape(grad_out.shape(), cache.normalized.shape(), "batchnorm2d grad_out");
  const std::size_t n = grad_out.dim(0), c = grad_out.dim(1), hw = grad_out.dim(2) * grad_out.dim(3);
  const std::size_t count = n * hw;
  BatchNormGrads<T> g{Tensor<T>(grad_out.shape()), Tensor<T>(Shape{c}), Tensor<T>(Shape{c})};
  for (std::size_t ch = 0; ch < c; ++ch) {
    T sum_gy{0}, sum_gy_xh{0};
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t off = (s * c + ch) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        sum_gy += grad_out[off + i];
        sum_gy_xh += grad_out[off + i] * cache.normalized[off + i];
      }
    }
    g.beta[ch] = sum_gy;
    g.gamma[ch] = sum_gy_xh;
    const T k = gamma[ch] * cache.inv_std[ch];
    const T m = static_cast<T>(count);
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t off = (s * c + ch) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        if (cache.mode == Mode::train) {
          g.input[off + i] =
              k / m * (m * grad_out[off + i] - sum_gy - cache.normalized[off + i] * sum_gy_xh);
        } else {
          g.input[off + i] = k * grad_out[off + i];
        }
      }
    }
  }
  return g;
}

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require_rank(x.shape(), 2, "dense input");
  require_rank(w.shape(), 2, "dense weight");
  const std::size_t n = x.dim(0), f = x.dim(1), fout = w.dim(0);
  if (w.dim(1) != f) {
    throw DimensionError("dense inner dimension mismatch: input axis 1 = " + std::to_string(f) +
                         ", weight axis 1 = " + std::to_string(w.dim(1)));
  }
  require_same_shape(b.shape(), Shape{fout}, "dense bias");
  Tensor<T> y(Shape{n, fout});
  const std::vector<T> w_t = detail::transpose(w.data(), fout, f);
  detail::gemm_nn<T>(n, fout, f, x.data(), f, w_t.data(), fout, y.data(), fout, false);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < fout; ++j) y[i * fout + j] += b[j];
  }
  return y;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& grad_out) {
  const std::size_t n = x.dim(0), f = x.dim(1), fout = w.dim(0);
  require_same_shape(grad_out.shape(), Shape{n, fout}, "dense grad_out");
  DenseGrads<T> g{Tensor<T>(x.shape()), Tensor<T>(w.shape()), Tensor<T>(Shape{fout})};
  detail::gemm_nn<T>(n, f, fout, grad_out.data(), fout, w.data(), f, g.input.data(), f, false);
  const std::vector<T> gy_t = detail::transpose(grad_out.data(), n, fout);
  detail::gemm_nn<T>(fout, f, n, gy_t.data(), n, x.data(), f, g.weight.data(), f, false);
  for (std::size_t j = 0; j < fout; ++j) {
    T acc{0};
    for (std::size_t i = 0; i < n; ++i) acc += gy_t[j * n + i];
    g.bias[j] = acc;
  }
  return g;
}

template <typename T>
Tensor<T> activation(const Tensor<T>& x, Activation kind) {
  Tensor<T> y(x.shape());
  const T hi = kind == Activation::relu6 ? T{6} : std::numeric_limits<T>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::min(std::max(x[i], T{0}), hi);
  return y;
}

template <typename T>
Tensor<T> activation_backward(const Tensor<T>& x, const Tensor<T>& grad_out, Activation kind) {
  require_same_shape(x.shape(), grad_out.shape(), "activation grad_out");
  Tensor<T> g(x.shape());
  const T hi = kind == Activation::relu6 ? T{6} : std::numeric_limits<T>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = (x[i] > T{0} && x[i] < hi) ? grad_out[i] : T{0};
  return g;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> y(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] + b[i];
  return y;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * factor;
  return y;
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> parts) {
  if (parts.empty()) throw DimensionError("concat_channels needs at least one input");
  const Shape& first = parts[0]->shape();
  require_rank(first, 4, "concat_channels input");
  std::size_t channels = 0;
  for (const Tensor<T>* p : parts) {
    require_rank(p->shape(), 4, "concat_channels input");
    if (p->dim(0) != first[0] || p->dim(2) != first[2] || p->dim(3) != first[3]) {
      throw DimensionError("concat_channels: axes 0/2/3 differ between " + shape_str(first) +
                           " and " + shape_str(p->shape()));
    }
    channels += p->dim(1);
  }
  const std::size_t n = first[0], hw = first[2] * first[3];
  Tensor<T> y(Shape{n, channels, first[2], first[3]});
  for (std::size_t s = 0; s < n; ++s) {
    T* dst = y.data() + s * channels * hw;
    for (const Tensor<T>* p : parts) {
      const std::size_t block = p->dim(1) * hw;
      const T* src = p->data() + s * block;
      dst = std::copy(src, src + block, dst);
    }
  }
  return y;
}

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& grad, std::span<const std::size_t> channels) {
  require_rank(grad.shape(), 4, "split_channels input");
  const std::size_t n = grad.dim(0), total = grad.dim(1), hw = grad.dim(2) * grad.dim(3);
  std::vector<Tensor<T>> out;
  std::size_t offset = 0;
  for (std::size_t c : channels) {
    Tensor<T> part(Shape{n, c, grad.dim(2), grad.dim(3)});
    for (std::size_t s = 0; s < n; ++s) {
      const T* src = grad.data() + (s * total + offset) * hw;
      std::copy(src, src + c * hw, part.data() + s * c * hw);
    }
    offset += c;
    out.push_back(std::move(part));
  }
  if (offset != total) throw DimensionError("split_channels: channel counts do not sum to axis 1");
  return out;
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  require_rank(x.shape(), 4, "global_avg_pool input");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor<T> y(Shape{n, c});
  for (std::size_t i = 0; i < n * c; ++i) {
    T acc{0};
    const T* p = x.data() + i * hw;
    for (std::size_t j = 0; j < hw; ++j) acc += p[j];
    y[i] = acc / static_cast<T>(hw);
  }
  return y;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& grad_out, const Shape& input_shape) {
  const std::size_t hw = input_shape[2] * input_shape[3];
  Tensor<T> g(input_shape);
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    const T v = grad_out[i] / static_cast<T>(hw);
    std::fill(g.data() + i * hw, g.data() + (i + 1) * hw, v);
  }
  return g;
}

template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x) {
  require_rank(x.shape(), 4, "upsample2x input");
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<T> y(Shape{x.dim(0), x.dim(1), 2 * h, 2 * w});
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = x.data() + p * h * w;
    T* dst = y.data() + p * 4 * h * w;
    for (std::size_t oy = 0; oy < 2 * h; ++oy) {
      for (std::size_t ox = 0; ox < 2 * w; ++ox) dst[oy * 2 * w + ox] = src[(oy / 2) * w + ox / 2];
    }
  }
  return y;
}

template <typename T>
Tensor<T> upsample2x_backward(const Tensor<T>& grad_out) {
  require_rank(grad_out.shape(), 4, "upsample2x grad_out");
  const std::size_t planes = grad_out.dim(0) * grad_out.dim(1);
  const std::size_t h = grad_out.dim(2) / 2, w = grad_out.dim(3) / 2;
  Tensor<T> g(Shape{grad_out.dim(0), grad_out.dim(1), h, w});
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = grad_out.data() + p * 4 * h * w;
    T* dst = g.data() + p * h * w;
    for (std::size_t oy = 0; oy < 2 * h; ++oy) {
      for (std::size_t ox = 0; ox < 2 * w; ++ox) dst[(oy / 2) * w + ox / 2] += src[oy * 2 * w + ox];
    }
  }
  return g;
}

template <typename T>
SoftmaxCrossEntropy<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  require_rank(logits.shape(), 2, "softmax_cross_entropy logits");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (labels.size() != n) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(n) + " rows");
  }
  SoftmaxCrossEntropy<T> r{T{0}, Tensor<T>(logits.shape())};
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= c) {
      throw LabelError("label " + std::to_string(label) + " at row " + std::to_string(i) +
                       " outside [0, " + std::to_string(c) + ")");
    }
    const T* z = logits.data() + i * c;
    const T m = *std::max_element(z, z + c);
    T sum{0};
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(z[j] - m);
    const T lse = m + std::log(sum);
    T* p = r.probs.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) p[j] = std::exp(z[j] - lse);
    total += static_cast<double>(lse - z[label]);
  }
  r.loss = static_cast<T>(total / static_cast<double>(n));
  return r;
}

template <typename T>
Tensor<T> softmax_cross_entropy_backward(const Tensor<T>& probs, std::span<const int> labels) {
  const std::size_t n = probs.dim(0), c = probs.dim(1);
  Tensor<T> g = probs;
  const T inv_n = T{1} / static_cast<T>(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i * c + static_cast<std::size_t>(labels[i])] -= T{1};
    for (std::size_t j = 0; j < c; ++j) g[i * c + j] *= inv_n;
  }
  return g;
}

template <typename T>
T mse(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred.shape(), target.shape(), "mse");
  double acc = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    acc += d * d;
  }
  return static_cast<T>(acc / static_cast<double>(pred.size()));
}

template <typename T>
Tensor<T> mse_backward(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred.shape(), target.shape(), "mse");
  Tensor<T> g(pred.shape());
  const T k = T{2} / static_cast<T>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) g[i] = k * (pred[i] - target[i]);
  return g;
}

#define WAFER_INSTANTIATE_OPS(T)                                                                 \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int);     \
  template Conv2dGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                          int, int);                                             \
  template PoolResult<T> maxpool2d(const Tensor<T>&, int, int);                                  \
  template Tensor<T> maxpool2d_backward(const Tensor<T>&, std::span<const std::uint32_t>,        \
                                        const Shape&);                                           \
  template Tensor<T> batchnorm2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T, Mode,  \
                                 RunningStats<T>&, BatchNormCache<T>*);                          \
  template BatchNormGrads<T> batchnorm2d_backward(const Tensor<T>&, const Tensor<T>&,            \
                                                  const BatchNormCache<T>&);                     \
  template Tensor<T> dense(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                \
  template DenseGrads<T> dense_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);   \
  template Tensor<T> activation(const Tensor<T>&, Activation);                                   \
  template Tensor<T> activation_backward(const Tensor<T>&, const Tensor<T>&, Activation);        \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> scale(const Tensor<T>&, T);                                                 \
  template Tensor<T> concat_channels(std::span<const Tensor<T>* const>);                         \
  template std::vector<Tensor<T>> split_channels(const Tensor<T>&, std::span<const std::size_t>); \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                          \
  template Tensor<T> global_avg_pool_backward(const Tensor<T>&, const Shape&);                   \
  template Tensor<T> upsample2x(const Tensor<T>&);                                               \
  template Tensor<T> upsample2x_backward(const Tensor<T>&);                                      \
  template SoftmaxCrossEntropy<T> softmax_cross_entropy(const Tensor<T>&, std::span<const int>); \
  template Tensor<T> softmax_cross_entropy_backward(const Tensor<T>&, std::span<const int>);     \
  template T mse(const Tensor<T>&, const Tensor<T>&);                                            \
  template Tensor<T> mse_backward(const Tensor<T>&, const Tensor<T>&);

WAFER_INSTANTIATE_OPS(float)
WAFER_INSTANTIATE_OPS(double)

#undef WAFER_INSTANTIATE_OPS

}  // namespace wafer::core::ops
