// waferlab: dataset generation, experiment runs, suites, benchmarks and reports.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "wafer/errors.hpp"
#include "wafer/eval/report.hpp"
#include "wafer/pipeline/experiment.hpp"
#include "wafer/synth/dataset.hpp"

namespace fs = std::filesystem;
using namespace wafer;
using pipeline::RunConfig;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitPartial = 2;
constexpr int kExitFailed = 3;

// Flags that mirror config keys. Values are applied after the config file.
struct ConfigFlags {
  std::string file;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> named;  // key, value
  bool allow_vgg = false;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", file, "key = value config file")->check(CLI::ExistingFile);
    app->add_option("--set", sets, "override any config key, as key=value");
    add(app, "-e,--experiment", "experiment", "experiment id 0..12");
    add(app, "--classes", "classes", "task size: 3, 5 or 8");
    add(app, "--seed", "seed", "run seed (split, init, batches)");
    add(app, "--data-seed", "data_seed", "dataset generation seed");
    add(app, "--data-dir", "data_dir", "dataset directory");
    add(app, "-o,--out-dir", "out_dir", "output directory");
    add(app, "--scale", "scale", "dataset size relative to the reference counts");
    add(app, "--image-size", "image_size", "generated image side");
    add(app, "--resolution", "resolution", "model input side");
    add(app, "--epochs", "epochs", "maximum training epochs");
    add(app, "--batch-size", "batch_size", "minibatch size");
    add(app, "--lr", "lr", "base learning rate");
    add(app, "--patience", "patience", "early stopping patience");
    add(app, "--threads", "threads", "dataset generation workers");
    app->add_flag("--allow-untrained-vgg", allow_vgg, "train randomly initialized VGG16 for ids 10-12");
  }

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto* slot = &values_[key];
    app->add_option(flag, *slot, help + " [" + key + "]")->each([this, key](const std::string&) {
      order_.push_back(key);
    });
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!file.empty()) pipeline::apply_config_file(cfg, file);
    for (const auto& key : order_) pipeline::apply_setting(cfg, key, values_.at(key), "flag " + key);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ParseError("--set expects key=value, got '" + kv + "'");
      pipeline::apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1), "--set");
    }
    if (allow_vgg) cfg.allow_untrained_vgg = true;
    cfg.validate();
    return cfg;
  }

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
};

template <typename N>
std::vector<N> parse_list(const std::string& text, const std::string& what) {
  std::vector<N> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || v < 0) throw ParseError("bad entry '" + item + "' in " + what);
    out.push_back(static_cast<N>(v));
  }
  return out;
}

void print_row(const eval::ResultsRow& r) {
  auto m = [](const std::optional<double>& v) { return v ? eval::round3_half_even(*v) : std::string("n/a"); };
  std::printf("%-4s %-13s seed=%-6llu P=%s R=%s F1=%s Acc=%s params=%zu size=%.2fMB latency=%.2fms%s%s\n",
              eval::row_label(r.experiment_id, r.classes).c_str(), r.arch.c_str(),
              static_cast<unsigned long long>(r.seed), m(r.precision).c_str(), m(r.recall).c_str(),
              m(r.f1).c_str(), m(r.accuracy).c_str(), r.params, r.size_mb, r.latency_ms,
              r.error.empty() ? "" : "  ERROR: ", r.error.c_str());
  std::fflush(stdout);
}

synth::Dataset obtain_data(const RunConfig& cfg, bool generate) {
  if (generate && !fs::exists(cfg.data_dir / "manifest.csv")) {
    std::printf("generating dataset in %s\n", cfg.data_dir.string().c_str());
    return pipeline::generate_data(cfg);
  }
  return synth::load_dataset(cfg.data_dir);
}

bool is_config_failure(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParseError*>(&e)) return true;
  if (const auto* s = dynamic_cast<const pipeline::StageError*>(&e)) return s->is_config_error();
  return false;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wafer defect classification experiments"};
  app.require_subcommand(1);

  ConfigFlags gen_flags, run_flags, suite_flags, bench_flags;

  auto* gen = app.add_subcommand("gen-data", "render the synthetic dataset");
  gen_flags.attach(gen);

  auto* run = app.add_subcommand("run", "run one experiment");
  run_flags.attach(run);
  bool run_gen = false;
  run->add_flag("--gen-data", run_gen, "generate the dataset first if it is missing");

  auto* suite = app.add_subcommand("suite", "run ids x tasks x seeds and write the report");
  suite_flags.attach(suite);
  std::string ids_text = "0", tasks_text = "3,5,8", seeds_text;
  unsigned parallel = 1;
  bool suite_gen = false;
  suite->add_option("--ids", ids_text, "experiment ids, comma separated, or 'all'");
  suite->add_option("--tasks", tasks_text, "task sizes, comma separated");
  suite->add_option("--seeds", seeds_text, "run seeds, comma separated (default 42)");
  suite->add_option("--parallel", parallel, "experiments run concurrently")->check(CLI::PositiveNumber);
  suite->add_flag("--gen-data", suite_gen, "generate the dataset first if it is missing");

  auto* bench = app.add_subcommand("bench", "parameter count, size and latency of untrained models");
  bench_flags.attach(bench);
  std::string archs_text = "basenet,basenet8,basenet8plus,incnet,resinet,vgg16";
  bench->add_option("--archs", archs_text, "architectures, comma separated");

  auto* report = app.add_subcommand("report", "merge results.csv files into one report");
  std::vector<std::string> inputs;
  std::string report_out = "results";
  report->add_option("inputs", inputs, "results.csv files or directories holding one")->required();
  report->add_option("-o,--out-dir", report_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) {
      const auto cfg = gen_flags.resolve();
      const auto ds = pipeline::generate_data(cfg);
      std::printf("wrote %zu images to %s\n", ds.size(), cfg.data_dir.string().c_str());
      for (auto c : ds.classes) std::printf("  %-12s %zu\n", std::string(synth::class_name(c)).c_str(), ds.count(c));
      return kExitOk;
    }
    if (*run) {
      const auto cfg = run_flags.resolve();
      const auto data = obtain_data(cfg, run_gen);
      pipeline::RunArtifacts art;
      const auto row = pipeline::run_experiment(cfg, data, &art);
      eval::emit_report({row}, cfg.out_dir);
      print_row(row);
      return kExitOk;
    }
    if (*suite) {
      const auto cfg = suite_flags.resolve();
      pipeline::SuiteOptions opts;
      if (ids_text == "all") {
        for (int i = 0; i <= 12; ++i) opts.ids.push_back(i);
      } else {
        opts.ids = parse_list<int>(ids_text, "--ids");
      }
      opts.tasks = parse_list<int>(tasks_text, "--tasks");
      opts.seeds = parse_list<std::uint64_t>(seeds_text, "--seeds");
      opts.parallel = parallel;
      opts.on_row = print_row;
      const auto data = obtain_data(cfg, suite_gen);
      const auto rows = pipeline::run_suite(cfg, data, opts);
      std::size_t failed = 0;
      for (const auto& r : rows) failed += r.error.empty() ? 0 : 1;
      std::printf("%zu rows, %zu failed; report in %s\n", rows.size(), failed, cfg.out_dir.string().c_str());
      return failed ? kExitPartial : kExitOk;
    }
    if (*bench) {
      const auto cfg = bench_flags.resolve();
      std::stringstream ss(archs_text);
      std::string name;
      while (std::getline(ss, name, ',')) {
        const auto arch = zoo::parse_arch(name);
        const int res = arch == zoo::ArchId::VGG16 ? 224 : cfg.resolution;
        auto row = pipeline::bench_row(arch, cfg.classes, res, cfg.bench_warmup, cfg.bench_reps, cfg.out_dir);
        std::printf("%-13s res=%-4d params=%-11zu size=%9.2f MB  latency=%9.2f ms\n", row.arch.c_str(), res,
                    row.params, row.size_mb, row.latency_ms);
        std::fflush(stdout);
      }
      return kExitOk;
    }
    if (*report) {
      std::vector<eval::ResultsRow> rows;
      for (const auto& in : inputs) {
        fs::path p = in;
        if (fs::is_directory(p)) p /= "results.csv";
        auto part = eval::read_results_csv(p);
        rows.insert(rows.end(), part.begin(), part.end());
      }
      eval::emit_report(rows, report_out);
      std::printf("%zu rows -> %s\n", rows.size(), (fs::path(report_out) / "results.md").string().c_str());
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "waferlab: %s\n", e.what());
    return is_config_failure(e) ? kExitConfig : kExitFailed;
  }
  return kExitOk;
}
