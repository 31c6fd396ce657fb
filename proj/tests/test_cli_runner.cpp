#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "support/temp_dir.hpp"
#include "wafer/errors.hpp"
#include "wafer/pipeline/config.hpp"
#include "wafer/pipeline/experiment.hpp"

using namespace wafer;
using namespace wafer::pipeline;
namespace fs = std::filesystem;

namespace {

const synth::Dataset& small_data() {
  static const synth::Dataset ds =
      synth::generate_in_memory(synth::scale_counts(synth::kDefaultCounts, 0.1), 3, {.size = 64});
  return ds;
}

RunConfig quick(const fs::path& out) {
  RunConfig c;
  c.out_dir = out;
  c.resolution = 32;
  c.train.epochs = 2;
  c.train.batch_size = 32;
  c.ae_epochs = 1;
  c.bench_warmup = 0;
  c.bench_reps = 10;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Config, EmptyFileGivesPublishedDefaults) {
  RunConfig c;
  apply_config_text(c, "", "empty");
  EXPECT_EQ(c.train.epochs, 200);
  EXPECT_EQ(c.train.batch_size, 64);
  EXPECT_DOUBLE_EQ(c.train.weight_decay, 1e-4);
  EXPECT_EQ(c.train.patience, 10);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, FileThenFlagsPrecedence) {
  RunConfig c;
  apply_config_text(c,
                    "# comment line\n"
                    "epochs = 200   # trailing comment\n"
                    "  lr=0.0005\n"
                    "milestones = 5, 9\n"
                    "multistep = true\n"
                    "data_dir = /tmp/wafers\n",
                    "run.cfg");
  EXPECT_EQ(c.train.epochs, 200);
  EXPECT_DOUBLE_EQ(c.train.base_lr, 5e-4);
  EXPECT_EQ(c.train.milestones, (std::vector<int>{5, 9}));
  EXPECT_EQ(c.multistep, std::optional<bool>(true));
  EXPECT_EQ(c.data_dir, fs::path("/tmp/wafers"));
  apply_setting(c, "epochs", "5", "flag");
  EXPECT_EQ(c.train.epochs, 5);
}

TEST(Config, ErrorsCarryLineNumbers) {
  RunConfig c;
  try {
    apply_config_text(c, "epochs = 3\n\nbogus = 1\n", "run.cfg");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("run.cfg:3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(apply_config_text(c, "epochs = five\n", "x"), ParseError);
  EXPECT_THROW(apply_config_text(c, "epochs\n", "x"), ParseError);
  EXPECT_THROW(apply_config_text(c, "allow_untrained_vgg = maybe\n", "x"), ParseError);

  RunConfig v;
  apply_config_text(v, "epochs = -1\n", "x");
  EXPECT_THROW(v.validate(), ConfigError);
  v = {};
  v.experiment = 13;
  EXPECT_THROW(v.validate(), ConfigError);
  v = {};
  v.classes = 4;
  EXPECT_THROW(v.validate(), ConfigError);
}

TEST(ExperimentMap, TotalOverValidIds) {
  for (int id = 0; id <= 12; ++id) EXPECT_EQ(experiment_spec(id).id, id);
  EXPECT_THROW(experiment_spec(13), ConfigError);
  EXPECT_THROW(experiment_spec(-1), ConfigError);
  EXPECT_EQ(experiment_spec(9).arch, zoo::ArchId::BaseNet8Plus);
  EXPECT_TRUE(experiment_spec(9).standard_augmentation);
  for (int id : {10, 11, 12}) EXPECT_TRUE(experiment_spec(id).bench_only);
}

TEST(RunExperiment, VggIsBenchOnlyWithoutFlag) {
  testing_support::TempDir dir;
  auto cfg = quick(dir.path());
  cfg.experiment = 10;
  const auto row = run_experiment(cfg, small_data());
  EXPECT_FALSE(row.f1.has_value());
  EXPECT_FALSE(row.accuracy.has_value());
  EXPECT_EQ(row.arch, "VGG16");
  EXPECT_GT(row.params, 100'000'000u);
  EXPECT_GT(row.latency_ms, 0.0);
  // the half-gigabyte scratch file does not linger
  for (const auto& e : fs::recursive_directory_iterator(dir.path())) EXPECT_FALSE(e.is_regular_file()) << e.path();
}

TEST(RunExperiment, RecipesNeverTouchValidationOrTest) {
  testing_support::TempDir dir;
  std::optional<std::pair<std::uint64_t, std::uint64_t>> hashes;
  for (int id : {0, 5, 6, 7, 8}) {
    auto cfg = quick(dir.path());
    cfg.experiment = id;
    cfg.classes = 8;
    RunArtifacts art;
    const auto row = run_experiment(cfg, small_data(), &art);
    ASSERT_TRUE(row.f1.has_value());
    if (!hashes) hashes = {art.val_hash, art.test_hash};
    EXPECT_EQ(art.val_hash, hashes->first) << id;
    EXPECT_EQ(art.test_hash, hashes->second) << id;
    if (id == 6 || id == 7) {
      EXPECT_GT(art.synthetic, 0u) << id;
    } else {
      EXPECT_EQ(art.synthetic, 0u) << id;
    }
    EXPECT_TRUE(fs::exists(art.weights));
    EXPECT_TRUE(fs::exists(art.run_dir / "history.csv"));
  }
}

TEST(RunExperiment, SameConfigSameNumbers) {
  testing_support::TempDir a, b;
  auto ca = quick(a.path()), cb = quick(b.path());
  ca.classes = cb.classes = 5;
  ca.experiment = cb.experiment = 9;
  RunArtifacts aa, ab;
  const auto ra = run_experiment(ca, small_data(), &aa);
  const auto rb = run_experiment(cb, small_data(), &ab);
  EXPECT_EQ(ra.f1, rb.f1);
  EXPECT_EQ(ra.precision, rb.precision);
  EXPECT_EQ(ra.accuracy, rb.accuracy);
  EXPECT_EQ(ra.params, rb.params);
  EXPECT_EQ(ra.size_mb, rb.size_mb);
  EXPECT_EQ(slurp(aa.weights), slurp(ab.weights));
}

TEST(RunExperiment, ErrorsAreTaggedWithStage) {
  testing_support::TempDir dir;
  auto cfg = quick(dir.path());
  cfg.data_dir = dir / "absent";
  try {
    run_experiment(cfg);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "load");
    EXPECT_FALSE(e.is_config_error());
  }

  cfg.experiment = 6;
  cfg.ae_epochs = 0;  // untrained autoencoder cannot decode
  try {
    run_experiment(cfg, small_data());
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "oversample");
  }

  cfg = quick(dir.path());
  cfg.experiment = 1;
  cfg.resolution = 48;  // BaseNet8 needs a power of two
  try {
    run_experiment(cfg, small_data());
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "preprocess");
    EXPECT_TRUE(e.is_config_error());
  }
}

TEST(Suite, RowsFollowTheCrossProduct) {
  testing_support::TempDir dir;
  auto cfg = quick(dir.path());
  cfg.train.epochs = 1;
  std::size_t streamed = 0;
  const auto rows = run_suite(cfg, small_data(), {.ids = {0}, .tasks = {3, 5, 8}, .on_row = [&](const auto&) {
                                                    ++streamed;
                                                  }});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(streamed, 3u);
  const int tasks[] = {3, 5, 8};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(rows[i].classes, tasks[i]);
    EXPECT_EQ(rows[i].seed, 42u);
    EXPECT_TRUE(rows[i].error.empty());
  }
  const auto md = slurp(dir / "results.md");
  for (const char* label : {"| 0a ", "| 0b ", "| 0c "}) EXPECT_NE(md.find(label), std::string::npos) << label;
  EXPECT_EQ(eval::read_results_csv(dir / "results.csv").size(), 3u);

  EXPECT_THROW(run_suite(cfg, small_data(), {.ids = {}, .tasks = {3}}), ConfigError);
  EXPECT_THROW(run_suite(cfg, small_data(), {.ids = {0, 14}, .tasks = {3}}), ConfigError);
}

TEST(Suite, FailedRunIsRecordedAndSuiteContinues) {
  testing_support::TempDir dir;
  auto cfg = quick(dir.path());
  cfg.train.epochs = 1;
  cfg.ae_epochs = 0;  // makes id 6 fail
  const auto rows =
      run_suite(cfg, small_data(), {.ids = {0, 6, 8}, .tasks = {3}, .seeds = {1, 2}, .parallel = 2});
  ASSERT_EQ(rows.size(), 6u);
  std::size_t failed = 0;
  for (const auto& r : rows) {
    if (r.experiment_id == 6) {
      EXPECT_FALSE(r.error.empty());
      EXPECT_NE(r.error.find("oversample"), std::string::npos) << r.error;
      EXPECT_FALSE(r.f1.has_value());
      ++failed;
    } else {
      EXPECT_TRUE(r.error.empty()) << r.error;
      EXPECT_TRUE(r.f1.has_value());
    }
  }
  EXPECT_EQ(failed, 2u);
  EXPECT_EQ(rows[0].seed, 1u);
  EXPECT_EQ(rows[1].seed, 2u);
  EXPECT_EQ(eval::read_results_csv(dir / "results.csv")[2].experiment_id, 6);
}
