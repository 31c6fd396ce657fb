#include "wafer/pipeline/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <mutex>

#include "wafer/augment/compose.hpp"
#include "wafer/augment/transforms.hpp"
#include "wafer/deepsmote/autoencoder.hpp"
#include "wafer/deepsmote/smote.hpp"
#include "wafer/eval/bench.hpp"
#include "wafer/rng.hpp"
#include "wafer/synth/preprocess.hpp"
#include "wafer/synth/split.hpp"
#include "wafer/util/parallel.hpp"

namespace fs = std::filesystem;

namespace wafer::pipeline {

namespace {

using synth::WaferClass;
using zoo::ArchId;

const ExperimentSpec kSpecs[] = {
    {.id = 0, .arch = ArchId::BaseNet, .title = "baseline"},
    {.id = 1, .arch = ArchId::BaseNet8, .title = "more capacity"},
    {.id = 2, .arch = ArchId::BaseNet8Plus, .title = "relu6, batchnorm, multi-step lr"},
    {.id = 3, .arch = ArchId::IncNet, .title = "inception-like"},
    {.id = 4, .arch = ArchId::ResiNet, .title = "residual"},
    {.id = 5, .arch = ArchId::BaseNet, .standard_augmentation = true, .title = "standard augmentation"},
    {.id = 6, .arch = ArchId::BaseNet, .oversampling = Oversampling::deepsmote, .title = "deepsmote"},
    {.id = 7, .arch = ArchId::BaseNet, .oversampling = Oversampling::composition, .title = "composed images"},
    {.id = 8, .arch = ArchId::BaseNet, .color_invert = true, .title = "color invert"},
    {.id = 9, .arch = ArchId::BaseNet8Plus, .standard_augmentation = true, .title = "combined"},
    {.id = 10, .arch = ArchId::VGG16, .freeze_backbone = true, .bench_only = true, .title = "vgg16 feature extraction"},
    {.id = 11, .arch = ArchId::VGG16, .bench_only = true, .title = "vgg16 fine-tuning"},
    {.id = 12, .arch = ArchId::VGG16, .standard_augmentation = true, .bench_only = true,
     .title = "vgg16 fine-tuning, standard augmentation"},
};

constexpr int kVggResolution = 224;

// Timed sections never overlap, even when a suite runs experiments in parallel.
std::mutex g_timing;

template <typename F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what(), std::current_exception());
  }
}

train::TrainSet to_train_set(const synth::Dataset& ds, int res, bool invert) {
  train::TrainSet set;
  set.images.reserve(ds.size());
  set.labels.reserve(ds.size());
  const auto side = static_cast<std::size_t>(res);
  for (const auto& s : ds.samples) {
    auto px = synth::resize_bilinear(s.image, side, side);
    synth::ImageF img(side, side);
    for (std::size_t i = 0; i < px.size(); ++i) img.pixels[i] = px[i] / 255.0f;
    set.images.push_back(invert ? augment::color_invert(img) : std::move(img));
    set.labels.push_back(s.label);
  }
  return set;
}

void normalize_set(train::TrainSet& set, const synth::NormStats& st) {
  const float mean = static_cast<float>(st.mean.at(0));
  const float inv = static_cast<float>(1.0 / st.std.at(0));
  for (auto& img : set.images)
    for (auto& p : img.pixels) p = (p - mean) * inv;
}

synth::Dataset oversample(const RunConfig& cfg, const ExperimentSpec& spec, const synth::Dataset& full,
                          const synth::Dataset& train) {
  std::vector<WaferClass> targets;
  for (WaferClass c : {WaferClass::Circle, WaferClass::Splinter}) {
    if (std::find(train.classes.begin(), train.classes.end(), c) != train.classes.end()) targets.push_back(c);
  }
  const std::size_t target = cfg.oversample_target.value_or(full.count(WaferClass::Circle));
  if (spec.oversampling == Oversampling::composition) {
    return augment::oversample_by_composition(train, targets, target, derive_seed({cfg.seed, 0xc0}));
  }

  // the autoencoder sees every training image, synthesis is per class
  std::vector<synth::ImageF> images;
  for (WaferClass c : train.classes) {
    auto part = deepsmote::class_images(train, c, cfg.ae_resolution);
    images.insert(images.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  auto pair = deepsmote::build_autoencoder<float>(cfg.ae_latent, cfg.ae_resolution, derive_seed({cfg.seed, 0xae}));
  deepsmote::train_autoencoder(pair, images,
                               {.epochs = cfg.ae_epochs, .seed = derive_seed({cfg.seed, 0xae, 1})});
  synth::Dataset out = train;
  for (WaferClass c : targets) {
    const std::size_t have = out.count(c);
    if (have >= target) continue;
    if (have < 2) throw SpecError("class " + std::string(synth::class_name(c)) + " has fewer than 2 training samples");
    deepsmote::SmoteSpec s{.k = std::min<int>(cfg.smote_k, static_cast<int>(have) - 1),
                           .seed = derive_seed({cfg.seed, synth::code(c), 0x5e})};
    out = deepsmote::oversample_deepsmote(out, c, target, pair, s);
  }
  return out;
}

void bench_into(eval::ResultsRow& row, zoo::Model<float>& model, const fs::path& weights, int warmup, int reps) {
  std::lock_guard lock(g_timing);
  const auto b = eval::bench_model(model, weights, warmup, reps);
  row.params = b.params;
  row.size_mb = b.size_mb;
  row.latency_ms = b.latency.median_ms;
}

}  // namespace

bool StageError::is_config_error() const {
  try {
    std::rethrow_exception(cause_);
  } catch (const ConfigError&) {
    return true;
  } catch (const ParseError&) {
    return true;
  } catch (...) {
    return false;
  }
}

const ExperimentSpec& experiment_spec(int id) {
  if (id < 0 || id > 12) throw ConfigError("unknown experiment id " + std::to_string(id) + " (valid: 0..12)");
  return kSpecs[id];
}

std::string run_name(const RunConfig& cfg) {
  return eval::row_label(cfg.experiment, cfg.classes) + "_s" + std::to_string(cfg.seed);
}

eval::ResultsRow bench_row(ArchId arch, int classes, int resolution, int warmup, int reps, const fs::path& scratch) {
  auto model = zoo::build_model<float>(arch, classes, resolution);
  eval::ResultsRow row;
  row.arch = std::string(zoo::arch_name(arch));
  row.classes = classes;
  fs::create_directories(scratch);
  const fs::path weights = scratch / (row.arch + "_bench.bin");
  bench_into(row, model, weights, warmup, reps);
  std::error_code ec;
  fs::remove(weights, ec);
  return row;
}

eval::ResultsRow run_experiment(const RunConfig& cfg, const synth::Dataset& full, RunArtifacts* artifacts) {
  stage("config", [&] { cfg.validate(); });
  const ExperimentSpec& spec = experiment_spec(cfg.experiment);
  RunArtifacts local;
  RunArtifacts& art = artifacts ? *artifacts : local;
  art.run_dir = cfg.out_dir / "runs" / run_name(cfg);
  stage("output", [&] { fs::create_directories(art.run_dir); });

  eval::ResultsRow row;
  row.experiment_id = cfg.experiment;
  row.arch = std::string(zoo::arch_name(spec.arch));
  row.classes = cfg.classes;
  row.seed = cfg.seed;

  if (spec.bench_only && !cfg.allow_untrained_vgg) {
    auto b = stage("bench", [&] {
      return bench_row(spec.arch, cfg.classes, kVggResolution, cfg.bench_warmup, cfg.bench_reps, art.run_dir);
    });
    row.params = b.params;
    row.size_mb = b.size_mb;
    row.latency_ms = b.latency_ms;
    return row;
  }

  auto split = stage("split", [&] {
    return synth::stratified_split(synth::class_subset(full, cfg.classes), {}, cfg.seed);
  });
  art.val_hash = synth::manifest_hash(split.val);
  art.test_hash = synth::manifest_hash(split.test);

  if (spec.oversampling != Oversampling::none) {
    const std::size_t before = split.train.size();
    split.train = stage("oversample", [&] { return oversample(cfg, spec, full, split.train); });
    art.synthetic = split.train.size() - before;
  }
  art.train_size = split.train.size();

  const int res = spec.arch == ArchId::VGG16 ? kVggResolution : cfg.resolution;
  augment::AugmentPipeline pipeline;
  train::TrainSet tr, va, te;
  stage("preprocess", [&] {
    zoo::check_resolution(spec.arch, res);
    tr = to_train_set(split.train, res, spec.color_invert);
    va = to_train_set(split.val, res, spec.color_invert);
    te = to_train_set(split.test, res, spec.color_invert);
    if (spec.standard_augmentation) {
      // statistics come from the training split only
      pipeline.norm = augment::compute_norm_stats(tr.images);
      normalize_set(va, *pipeline.norm);
      normalize_set(te, *pipeline.norm);
    }
  });

  auto model = stage("build", [&] { return zoo::build_model<float>(spec.arch, cfg.classes, res, cfg.seed); });
  if (spec.freeze_backbone) {
    // only the final dense layer (weight and bias) learns
    auto& params = model.parameters();
    for (std::size_t i = 0; i + 2 < params.size(); ++i) params[i]->trainable = false;
  }
  art.history = stage("train", [&] {
    train::TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    tc.multistep = cfg.multistep.value_or(model.multistep_default);
    train::TrainOptions opts;
    if (spec.standard_augmentation) opts.augment = &pipeline;
    opts.progress_csv = art.run_dir / "history.csv";
    return train::train_model(model, tr, va, tc, opts);
  });
  for (auto* p : model.parameters()) p->trainable = true;

  stage("evaluate", [&] {
    if (synth::manifest_hash(split.val) != art.val_hash || synth::manifest_hash(split.test) != art.test_hash) {
      throw StateError("validation or test membership changed during the run");
    }
    const auto r = train::evaluate(model, te);
    row.precision = r.metrics.precision;
    row.recall = r.metrics.recall;
    row.f1 = r.metrics.f1;
    row.accuracy = r.metrics.accuracy;
  });

  art.weights = art.run_dir / "weights.bin";
  stage("bench", [&] { bench_into(row, model, art.weights, cfg.bench_warmup, cfg.bench_reps); });
  return row;
}

eval::ResultsRow run_experiment(const RunConfig& cfg, RunArtifacts* artifacts) {
  const auto full = stage("load", [&] { return synth::load_dataset(cfg.data_dir); });
  return run_experiment(cfg, full, artifacts);
}

std::vector<eval::ResultsRow> run_suite(const RunConfig& base, const synth::Dataset& full, const SuiteOptions& opts) {
  if (opts.ids.empty() || opts.tasks.empty()) throw ConfigError("suite needs at least one id and one task");
  for (int id : opts.ids) experiment_spec(id);
  for (int t : opts.tasks) synth::task_classes(t);
  const std::vector<std::uint64_t> seeds = opts.seeds.empty() ? std::vector<std::uint64_t>{42} : opts.seeds;

  std::vector<RunConfig> jobs;
  for (int id : opts.ids)
    for (int t : opts.tasks)
      for (std::uint64_t s : seeds) {
        RunConfig c = base;
        c.experiment = id;
        c.classes = t;
        c.seed = s;
        jobs.push_back(std::move(c));
      }

  std::vector<eval::ResultsRow> rows(jobs.size());
  std::mutex report_mutex;
  util::parallel_for(
      jobs.size(),
      [&](std::size_t i) {
        const RunConfig& c = jobs[i];
        eval::ResultsRow row;
        try {
          row = run_experiment(c, full);
        } catch (const std::exception& e) {
          row = {};
          row.experiment_id = c.experiment;
          row.arch = std::string(zoo::arch_name(experiment_spec(c.experiment).arch));
          row.classes = c.classes;
          row.seed = c.seed;
          row.error = e.what();
        }
        rows[i] = row;
        if (opts.on_row) {
          std::lock_guard lock(report_mutex);
          opts.on_row(row);
        }
      },
      std::max(1u, opts.parallel));

  eval::emit_report(rows, base.out_dir);
  return rows;
}

synth::Dataset generate_data(const RunConfig& cfg) {
  cfg.validate();
  return synth::generate_dataset(synth::scale_counts(synth::kDefaultCounts, cfg.scale), cfg.data_seed, cfg.data_dir,
                                 {.size = cfg.image_size, .threads = cfg.threads});
}

}  // namespace wafer::pipeline
