#pragma once

// Independent reference implementations used by unit and acceptance tests.
// Deliberately naive: direct loops in long double, no shared code with src/.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wafer/core/tape.hpp"
#include "wafer/rng.hpp"

namespace oracle {

using wafer::core::Shape;
using wafer::core::Tensor;

template <typename T>
Tensor<T> random_tensor(Shape shape, wafer::Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

template <typename T>
std::vector<long double> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                                int stride, int pad, Shape& out_shape) {
  const long n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const long cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const long ho = (h + 2 * pad - kh) / stride + 1, wo = (wd + 2 * pad - kw) / stride + 1;
  out_shape = {static_cast<std::size_t>(n), static_cast<std::size_t>(cout),
               static_cast<std::size_t>(ho), static_cast<std::size_t>(wo)};
  std::vector<long double> out(n * cout * ho * wo);
  for (long i = 0; i < n; ++i)
    for (long o = 0; o < cout; ++o)
      for (long r = 0; r < ho; ++r)
        for (long c = 0; c < wo; ++c) {
          long double acc = b[o];
          for (long ci = 0; ci < cin; ++ci)
            for (long u = 0; u < kh; ++u)
              for (long v = 0; v < kw; ++v) {
                const long rr = r * stride - pad + u, cc = c * stride - pad + v;
                if (rr < 0 || rr >= h || cc < 0 || cc >= wd) continue;
                acc += static_cast<long double>(x[((i * cin + ci) * h + rr) * wd + cc]) *
                       w[((o * cin + ci) * kh + u) * kw + v];
              }
          out[((i * cout + o) * ho + r) * wo + c] = acc;
        }
  return out;
}

template <typename T>
std::vector<long double> maxpool2d(const Tensor<T>& x, int window, int stride, Shape& out_shape) {
  const long n = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3);
  const long ho = (h - window) / stride + 1, wo = (w - window) / stride + 1;
  out_shape = {static_cast<std::size_t>(n), static_cast<std::size_t>(ch),
               static_cast<std::size_t>(ho), static_cast<std::size_t>(wo)};
  std::vector<long double> out;
  for (long i = 0; i < n; ++i)
    for (long c = 0; c < ch; ++c)
      for (long r = 0; r < ho; ++r)
        for (long q = 0; q < wo; ++q) {
          long double m = -INFINITY;
          for (long u = 0; u < window; ++u)
            for (long v = 0; v < window; ++v)
              m = std::max<long double>(m, x[((i * ch + c) * h + r * stride + u) * w + q * stride + v]);
          out.push_back(m);
        }
  return out;
}

template <typename T>
std::vector<long double> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  const std::size_t n = x.dim(0), f = x.dim(1), o = w.dim(0);
  std::vector<long double> out(n * o);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < o; ++j) {
      long double acc = b[j];
      for (std::size_t k = 0; k < f; ++k) acc += static_cast<long double>(x[i * f + k]) * w[j * f + k];
      out[i * o + j] = acc;
    }
  return out;
}

/// Log-sum-exp evaluated in long double; returns (mean loss, probs).
template <typename T>
std::pair<long double, std::vector<long double>> softmax_ce(const Tensor<T>& logits,
                                                            const std::vector<int>& labels) {
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  std::vector<long double> probs(n * c);
  long double loss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    long double m = -INFINITY;
    for (std::size_t j = 0; j < c; ++j) m = std::max<long double>(m, logits[i * c + j]);
    long double s = 0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(static_cast<long double>(logits[i * c + j]) - m);
    const long double lse = m + std::log(s);
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(logits[i * c + j] - lse);
    loss += lse - logits[i * c + labels[i]];
  }
  return {loss / n, probs};
}

/// max over elements of |a - ref| / max(1, |ref|).
template <typename T>
double max_scaled_error(const Tensor<T>& actual, const std::vector<long double>& ref) {
  double worst = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const long double d = std::fabs(static_cast<long double>(actual[i]) - ref[i]);
    worst = std::max(worst, static_cast<double>(d / std::max<long double>(1, std::fabs(ref[i]))));
  }
  return worst;
}

// --- finite differences ---------------------------------------------------------

struct GradCheckResult {
  double max_rel_error = 0;
  std::size_t checked = 0;
  std::string worst;
};

using LossFn = std::function<wafer::core::GradTape<double>::Var(wafer::core::GradTape<double>&)>;

/// Central differences (step h) against reverse mode for sampled coordinates
/// of each target parameter. `loss` must read targets via tape.parameter().
///
/// The probes replay the activation regions and pooling argmaxes of the base
/// point, so each difference quotient is taken on the same linear piece that
/// reverse mode differentiates, even when +-h would cross a ReLU kink.
/// Relative error is |a - n| / max(|a|, |n|, floor).
inline GradCheckResult gradcheck(const LossFn& loss,
                                 const std::vector<wafer::core::Parameter<double>*>& targets,
                                 std::size_t per_tensor, std::uint64_t seed, double h = 1e-4,
                                 double floor = 1e-6) {
  using Tape = wafer::core::GradTape<double>;
  for (auto* p : targets) p->zero_grad();
  Tape::Decisions base;
  {
    Tape tape;
    tape.record_decisions();
    auto l = loss(tape);
    tape.backward(l);
    base = tape.decisions();
  }
  auto eval = [&] {
    Tape tape(false);
    tape.replay_decisions(base);
    auto l = loss(tape);
    return tape.value(l)[0];
  };

  GradCheckResult res;
  wafer::Rng rng(seed);
  for (auto* p : targets) {
    const std::size_t n = p->value.size();
    const bool exhaustive = n <= per_tensor;
    for (std::size_t a = 0; a < (exhaustive ? n : per_tensor); ++a) {
      const std::size_t i = exhaustive ? a : rng.index(n);
      const double orig = p->value[i];
      p->value[i] = orig + h;
      const double fp = eval();
      p->value[i] = orig - h;
      const double fm = eval();
      p->value[i] = orig;
      const double numeric = (fp - fm) / (2 * h);
      const double analytic = p->gradient[i];
      const double rel = std::fabs(analytic - numeric) /
                         std::max({std::fabs(analytic), std::fabs(numeric), floor});
      ++res.checked;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst = p->name + "[" + std::to_string(i) + "] analytic " + std::to_string(analytic) +
                    " numeric " + std::to_string(numeric);
      }
    }
  }
  return res;
}

}  // namespace oracle
