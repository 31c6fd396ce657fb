#include "wafer/eval/metrics.hpp"

#include <numeric>
#include <string>

#include "wafer/errors.hpp"

namespace wafer::eval {

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(cells.begin(), cells.end(), std::uint64_t{0}); }

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < classes; ++i) s += at(i, i);
  return s;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t t) const {
  std::uint64_t s = 0;
  for (std::size_t p = 0; p < classes; ++p) s += at(t, p);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t p) const {
  std::uint64_t s = 0;
  for (std::size_t t = 0; t < classes; ++t) s += at(t, p);
  return s;
}

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels, std::size_t classes) {
  if (preds.size() != labels.size()) {
    throw IndexError("confusion: " + std::to_string(preds.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix cm(classes);
  const int c = static_cast<int>(classes);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= c) {
      throw IndexError("label " + std::to_string(labels[i]) + " at index " + std::to_string(i) + " outside [0, " +
                       std::to_string(c) + ")");
    }
    if (preds[i] < 0 || preds[i] >= c) {
      throw IndexError("prediction " + std::to_string(preds[i]) + " at index " + std::to_string(i) +
                       " outside [0, " + std::to_string(c) + ")");
    }
    ++cm.at(static_cast<std::size_t>(labels[i]), static_cast<std::size_t>(preds[i]));
  }
  return cm;
}

MetricsReport weighted_metrics(const ConfusionMatrix& cm) {
  const std::uint64_t n = cm.total();
  if (n == 0) throw MetricsError("cannot compute metrics of an empty confusion matrix");
  auto ratio = [](std::uint64_t a, std::uint64_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / b; };

  MetricsReport r;
  r.per_class.resize(cm.classes);
  double wp = 0, wf = 0;
  for (std::size_t c = 0; c < cm.classes; ++c) {
    auto& m = r.per_class[c];
    const std::uint64_t tp = cm.at(c, c);
    m.support = cm.row_sum(c);
    m.precision = ratio(tp, cm.col_sum(c));
    m.recall = ratio(tp, m.support);
    const double denom = m.precision + m.recall;
    m.f1 = denom > 0 ? 2 * m.precision * m.recall / denom : 0.0;
    wp += static_cast<double>(m.support) * m.precision;
    wf += static_cast<double>(m.support) * m.f1;
  }
  r.precision = wp / static_cast<double>(n);
  r.f1 = wf / static_cast<double>(n);
  r.accuracy = ratio(cm.trace(), n);
  r.recall = r.accuracy;
  return r;
}

}  // namespace wafer::eval
