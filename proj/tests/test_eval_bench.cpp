#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "support/temp_dir.hpp"
#include "wafer/errors.hpp"
#include "wafer/eval/bench.hpp"
#include "wafer/eval/metrics.hpp"
#include "wafer/eval/report.hpp"
#include "wafer/rng.hpp"
#include "wafer/zoo/weights.hpp"

using namespace wafer;
using namespace wafer::eval;
namespace fs = std::filesystem;

namespace {

struct OracleMetrics {
  long double precision = 0, recall = 0, f1 = 0, accuracy = 0;
};

// Counts straight from the sample lists; shares nothing with ConfusionMatrix.
OracleMetrics counting_oracle(const std::vector<int>& preds, const std::vector<int>& labels, int classes) {
  OracleMetrics m;
  const auto n = static_cast<long double>(labels.size());
  long double correct = 0;
  for (int c = 0; c < classes; ++c) {
    long double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (preds[i] == c && labels[i] == c) ++tp;
      if (preds[i] == c && labels[i] != c) ++fp;
      if (preds[i] != c && labels[i] == c) ++fn;
    }
    const long double p = tp + fp > 0 ? tp / (tp + fp) : 0;
    const long double r = tp + fn > 0 ? tp / (tp + fn) : 0;
    const long double f = p + r > 0 ? 2 * p * r / (p + r) : 0;
    const long double support = tp + fn;
    m.precision += support * p / n;
    m.recall += support * r / n;
    m.f1 += support * f / n;
    correct += tp;
  }
  m.accuracy = correct / n;
  return m;
}

std::pair<std::vector<int>, std::vector<int>> random_pairs(Rng& rng, std::size_t n, int classes) {
  std::vector<int> p(n), l(n);
  for (std::size_t i = 0; i < n; ++i) {
    l[i] = static_cast<int>(rng.index(static_cast<std::size_t>(classes)));
    // bias towards correct predictions so the metrics are not all near chance
    p[i] = rng.uniform(0, 1) < 0.6 ? l[i] : static_cast<int>(rng.index(static_cast<std::size_t>(classes)));
  }
  return {p, l};
}

}  // namespace

TEST(Confusion, CountsAndErrors) {
  const std::vector<int> l{0, 1, 2, 2};
  auto perfect = confusion(l, l, 3);
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t p = 0; p < 3; ++p) EXPECT_EQ(perfect.at(t, p), t == p ? (t == 2 ? 2u : 1u) : 0u);

  auto empty = confusion(std::vector<int>{}, std::vector<int>{}, 4);
  EXPECT_EQ(empty.total(), 0u);
  EXPECT_EQ(empty.cells.size(), 16u);

  EXPECT_THROW(confusion(std::vector<int>{3}, std::vector<int>{0}, 3), IndexError);
  EXPECT_THROW(confusion(std::vector<int>{0}, std::vector<int>{-1}, 3), IndexError);
  EXPECT_THROW(confusion(std::vector<int>{0, 1}, std::vector<int>{0}, 3), IndexError);
}

TEST(Confusion, RowSumsEqualLabelCounts) {
  Rng rng(5);
  auto [p, l] = random_pairs(rng, 1000, 8);
  auto cm = confusion(p, l, 8);
  EXPECT_EQ(cm.total(), 1000u);
  for (int c = 0; c < 8; ++c) {
    EXPECT_EQ(cm.row_sum(static_cast<std::size_t>(c)), static_cast<std::uint64_t>(std::count(l.begin(), l.end(), c)));
    EXPECT_EQ(cm.col_sum(static_cast<std::size_t>(c)), static_cast<std::uint64_t>(std::count(p.begin(), p.end(), c)));
  }
}

TEST(WeightedMetrics, WorkedExample) {
  auto r = weighted_metrics(confusion(std::vector<int>{0, 1, 1, 1, 0}, std::vector<int>{0, 0, 1, 1, 1}, 2));
  EXPECT_DOUBLE_EQ(r.per_class[0].precision, 0.5);
  EXPECT_DOUBLE_EQ(r.per_class[0].recall, 0.5);
  EXPECT_DOUBLE_EQ(r.per_class[0].f1, 0.5);
  EXPECT_EQ(r.per_class[0].support, 2u);
  EXPECT_DOUBLE_EQ(r.per_class[1].f1, 2.0 / 3.0);
  EXPECT_EQ(r.per_class[1].support, 3u);
  EXPECT_NEAR(r.f1, 0.6, 1e-15);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.6);
}

TEST(WeightedMetrics, PerfectAndAbsentClass) {
  const std::vector<int> l{0, 1, 2, 0, 1, 2};
  auto r = weighted_metrics(confusion(l, l, 3));
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.f1, 1.0);
  EXPECT_EQ(r.accuracy, 1.0);

  // class 2 is neither true nor predicted
  auto a = weighted_metrics(confusion(std::vector<int>{0, 1}, std::vector<int>{1, 1}, 3));
  EXPECT_EQ(a.per_class[2].precision, 0.0);
  EXPECT_EQ(a.per_class[2].recall, 0.0);
  EXPECT_EQ(a.per_class[2].f1, 0.0);
  EXPECT_EQ(a.per_class[0].precision, 0.0);

  EXPECT_THROW(weighted_metrics(ConfusionMatrix(3)), MetricsError);
}

TEST(WeightedMetrics, MatchesCountingOracleOn200Instances) {
  Rng rng(11);
  const int sizes[] = {3, 5, 8};
  for (int trial = 0; trial < 200; ++trial) {
    const int c = sizes[trial % 3];
    auto [p, l] = random_pairs(rng, 1 + rng.index(400), c);
    auto cm = confusion(p, l, static_cast<std::size_t>(c));
    auto r = weighted_metrics(cm);
    auto o = counting_oracle(p, l, c);
    EXPECT_NEAR(r.precision, static_cast<double>(o.precision), 1e-12);
    EXPECT_NEAR(r.recall, static_cast<double>(o.recall), 1e-12);
    EXPECT_NEAR(r.f1, static_cast<double>(o.f1), 1e-12);
    EXPECT_NEAR(r.accuracy, static_cast<double>(o.accuracy), 1e-12);
    // exact identity, not just close
    EXPECT_EQ(r.recall, r.accuracy);
    for (double v : {r.precision, r.recall, r.f1, r.accuracy}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(WeightedMetrics, InvariantUnderConsistentRelabeling) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto [p, l] = random_pairs(rng, 300, 8);
    std::vector<int> perm(8);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<int> pp(p.size()), pl(l.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      pp[i] = perm[static_cast<std::size_t>(p[i])];
      pl[i] = perm[static_cast<std::size_t>(l[i])];
    }
    auto a = weighted_metrics(confusion(p, l, 8));
    auto b = weighted_metrics(confusion(pp, pl, 8));
    EXPECT_NEAR(a.precision, b.precision, 1e-12);
    EXPECT_NEAR(a.f1, b.f1, 1e-12);
    EXPECT_EQ(a.recall, b.recall);
    EXPECT_EQ(a.accuracy, b.accuracy);
  }
}

// --- latency and size ------------------------------------------------------------

TEST(Latency, SummaryStatistics) {
  auto s = summarize_latency({5, 1, 4, 2, 3, 10, 9, 8, 7, 6});
  EXPECT_DOUBLE_EQ(s.median_ms, 5.5);
  EXPECT_DOUBLE_EQ(s.p90_ms, 9.0);  // nearest rank: ceil(0.9 * 10) = 9th
  auto odd = summarize_latency({3, 1, 2});
  EXPECT_DOUBLE_EQ(odd.median_ms, 2.0);
  EXPECT_DOUBLE_EQ(odd.p90_ms, 3.0);
  EXPECT_THROW(summarize_latency({}), StatsError);
}

TEST(Latency, PositiveAndStable) {
  auto m = zoo::build_model<float>(zoo::ArchId::BaseNet8, 8, 128, 1);
  EXPECT_THROW(measure_latency(m, 0, 5), ConfigError);
  auto a = measure_latency(m, 3, 20);
  auto b = measure_latency(m, 3, 20);
  EXPECT_EQ(a.samples_ms.size(), 20u);
  EXPECT_GT(a.median_ms, 0.0);
  EXPECT_GE(a.p90_ms, a.median_ms);
  EXPECT_LT(std::fabs(a.median_ms - b.median_ms) / std::min(a.median_ms, b.median_ms), 0.5);
}

TEST(Latency, EveryArchitectureHasPositiveMedian) {
  using zoo::ArchId;
  for (ArchId arch : {ArchId::BaseNet, ArchId::BaseNet8, ArchId::BaseNet8Plus, ArchId::IncNet, ArchId::ResiNet}) {
    auto m = zoo::build_model<float>(arch, 8, 64, 1);
    EXPECT_GT(measure_latency(m, 1, 10).median_ms, 0.0) << zoo::arch_name(arch);
  }
}

TEST(ModelSize, FormatArithmetic) {
  testing_support::TempDir dir;
  auto m = zoo::build_model<float>(zoo::ArchId::BaseNet8, 8, 256);
  auto r = bench_model(m, dir / "b8.bin", 1, 10);
  const double expect = 4.0 * static_cast<double>(zoo::count_params(m)) / 1e6;
  EXPECT_EQ(r.params, zoo::count_params(m));
  EXPECT_NEAR(r.size_mb, expect, 0.05 * expect);
  EXPECT_GT(r.size_mb, expect);
  EXPECT_DOUBLE_EQ(model_size_mb(dir / "b8.bin"), static_cast<double>(fs::file_size(dir / "b8.bin")) / 1e6);

  auto body = std::make_unique<zoo::Sequential<float>>();
  body->emplace<zoo::Flatten<float>>();
  zoo::Model<float> empty("empty", {1, 2, 2}, std::move(body));
  zoo::save_weights(empty, dir / "e.bin");
  EXPECT_DOUBLE_EQ(model_size_mb(dir / "e.bin"), 6e-6);

  EXPECT_THROW(model_size_mb(dir / "missing.bin"), FileError);
}

// --- report ------------------------------------------------------------------------

TEST(Report, HalfEvenRounding) {
  EXPECT_EQ(round3_half_even(0.0625), "0.062");
  EXPECT_EQ(round3_half_even(0.1875), "0.188");
  EXPECT_EQ(round3_half_even(0.953), "0.953");
  EXPECT_EQ(round3_half_even(1.0), "1.000");
  EXPECT_EQ(round3_half_even(0.9996), "1.000");
  EXPECT_EQ(round3_half_even(0.0), "0.000");
  EXPECT_EQ(round3_half_even(-0.0001), "0.000");
  EXPECT_EQ(round3_half_even(-0.0625), "-0.062");
  // 0.0005 is stored slightly above the tie, so it rounds up
  EXPECT_EQ(round3_half_even(0.0005), "0.001");
  EXPECT_EQ(row_label(0, 3), "0a");
  EXPECT_EQ(row_label(9, 8), "9c");
}

TEST(Report, CsvShapeAndRoundTrip) {
  testing_support::TempDir dir;
  ResultsRow one{.experiment_id = 0, .arch = "BaseNet", .classes = 3, .seed = 42, .precision = 0.1 + 0.2,
                 .recall = 1.0 / 3.0, .f1 = 0.95345678901234, .accuracy = 1.0 / 3.0, .params = 1707208,
                 .size_mb = 6.828913, .latency_ms = 1.234567890123};
  emit_report({one}, dir.path());
  {
    std::ifstream in(dir / "results.csv", std::ios::binary);
    std::string text((std::istreambuf_iterator<char>(in)), {});
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
    EXPECT_EQ(text.find('\r'), std::string::npos);
    EXPECT_EQ(text.rfind(kResultsHeader, 0), 0u);
  }

  ResultsRow bench{.experiment_id = 10, .arch = "VGG16", .classes = 8, .seed = 42, .params = 138357544,
                   .size_mb = 553.4, .latency_ms = 900};
  ResultsRow failed{.experiment_id = 6, .arch = "BaseNet", .classes = 5, .seed = 7,
                    .error = "oversample: class \"crack\", too few samples"};
  emit_report({one, bench, failed}, dir.path());
  auto back = read_results_csv(dir / "results.csv");
  ASSERT_EQ(back.size(), 3u);
  EXPECT_NEAR(*back[0].precision, *one.precision, 1e-9);
  EXPECT_NEAR(*back[0].f1, *one.f1, 1e-9);
  EXPECT_NEAR(back[0].latency_ms, one.latency_ms, 1e-9);
  EXPECT_NEAR(back[0].size_mb, one.size_mb, 1e-9);
  EXPECT_EQ(back[0].params, one.params);
  EXPECT_EQ(back[0].seed, 42u);
  EXPECT_FALSE(back[1].f1.has_value());
  EXPECT_EQ(back[1].params, 138357544u);
  EXPECT_EQ(back[2].error, failed.error);

  std::ifstream md(dir / "results.md");
  std::string text((std::istreambuf_iterator<char>(md)), {});
  EXPECT_NE(text.find("0.953"), std::string::npos);
  EXPECT_NE(text.find("n/a"), std::string::npos);
  EXPECT_NE(text.find("10^6 bytes"), std::string::npos);
  EXPECT_NE(text.find("| 0a "), std::string::npos);
  EXPECT_NE(text.find("| 10c "), std::string::npos);

  EXPECT_THROW(emit_report({}, dir.path()), ConfigError);
}

TEST(Report, MalformedCsvNamesLine) {
  testing_support::TempDir dir;
  std::ofstream(dir / "bad.csv") << kResultsHeader << "\n0,BaseNet,3,1,x,0,0,0,1,1,1,\n";
  try {
    read_results_csv(dir / "bad.csv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }
}
