#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace wafer::eval {

/// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::uint64_t> cells;  // row-major classes x classes

  explicit ConfusionMatrix(std::size_t c = 0) : classes(c), cells(c * c, 0) {}
  std::uint64_t& at(std::size_t t, std::size_t p) { return cells[t * classes + p]; }
  std::uint64_t at(std::size_t t, std::size_t p) const { return cells[t * classes + p]; }
  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(std::size_t t) const;
  std::uint64_t col_sum(std::size_t p) const;
};

/// Throws IndexError if any prediction or label is outside [0, classes) or
/// the spans differ in length.
ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels, std::size_t classes);

struct ClassMetrics {
  double precision = 0, recall = 0, f1 = 0;
  std::uint64_t support = 0;
};

struct MetricsReport {
  std::vector<ClassMetrics> per_class;
  double precision = 0, recall = 0, f1 = 0, accuracy = 0;
};

/// Per-class precision/recall/F1 (0/0 taken as 0) and support-weighted
/// averages. Weighted recall is summed as sum(TP)/N, which is the weighted
/// definition with support * TP / support cancelled, so it equals accuracy
/// exactly. Throws MetricsError for an empty matrix.
MetricsReport weighted_metrics(const ConfusionMatrix& cm);

}  // namespace wafer::eval
