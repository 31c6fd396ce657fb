#include "wafer/synth/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "wafer/errors.hpp"
#include "wafer/rng.hpp"
#include "wafer/util/parallel.hpp"

namespace fs = std::filesystem;

namespace wafer::synth {

std::vector<std::size_t> Dataset::counts() const {
  std::vector<std::size_t> out(classes.size(), 0);
  for (const auto& s : samples) ++out.at(static_cast<std::size_t>(s.label));
  return out;
}

std::size_t Dataset::count(WaferClass c) const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [c](const Sample& s) { return s.cls == c; }));
}

int Dataset::label_of(WaferClass c) const {
  const auto it = std::find(classes.begin(), classes.end(), c);
  if (it == classes.end()) {
    throw ConfigError("class " + std::string(class_name(c)) + " is not part of this dataset");
  }
  return static_cast<int>(it - classes.begin());
}

void Dataset::add(Sample s) {
  s.label = label_of(s.cls);
  samples.push_back(std::move(s));
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

Dataset empty_dataset(std::vector<WaferClass> classes) {
  Dataset ds;
  ds.classes = std::move(classes);
  return ds;
}

std::array<int, kNumClasses> scale_counts(const std::array<int, kNumClasses>& counts, double scale) {
  if (!(scale > 0) || !std::isfinite(scale)) throw ConfigError("scale must be positive and finite");
  std::array<int, kNumClasses> out{};
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (counts[i] < 0) throw ConfigError("negative sample count for " + std::string(class_name(kAllClasses[i])));
    if (counts[i] == 0) continue;
    // nudge absorbs representation error so x.5 exactly rounds up (0.1 * 1095 = 109.5)
    const int scaled = static_cast<int>(std::floor(counts[i] * scale + 0.5 + 1e-9));
    out[i] = std::max(4, scaled);
  }
  return out;
}

namespace {

std::string sample_stem(WaferClass c, int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_%05d", index);
  return std::string(class_name(c)) + buf;
}

Dataset render(const std::array<int, kNumClasses>& counts, std::uint64_t seed, const GenerateOptions& opts) {
  Dataset ds = empty_dataset({kAllClasses.begin(), kAllClasses.end()});
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (counts[c] < 0) throw ConfigError("negative sample count for " + std::string(class_name(kAllClasses[c])));
    for (int i = 0; i < counts[c]; ++i) {
      Sample s;
      s.cls = kAllClasses[c];
      s.name = "images/" + sample_stem(s.cls, i) + ".pgm";
      ds.add(std::move(s));
    }
  }
  // per-class running index is recoverable from position, so record it up front
  std::vector<std::pair<int, int>> keys;
  for (std::size_t c = 0; c < kNumClasses; ++c)
    for (int i = 0; i < counts[c]; ++i) keys.emplace_back(static_cast<int>(c), i);
  util::parallel_for(
      ds.samples.size(),
      [&](std::size_t k) {
        const auto [c, i] = keys[k];
        const auto seed_i = derive_seed({seed, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(i)});
        auto w = generate_wafer(kAllClasses[static_cast<std::size_t>(c)], seed_i, opts.size, opts.params);
        ds.samples[k].image = std::move(w.image);
        if (has_local_defect(w.cls)) ds.samples[k].mask = std::move(w.mask);
      },
      opts.threads);
  return ds;
}

fs::path mask_path(const fs::path& dir, const std::string& name) {
  return dir / "masks" / fs::path(name).filename();
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw FileError("cannot create directory " + p.string() + ": " + ec.message());
}

}  // namespace

Dataset generate_in_memory(const std::array<int, kNumClasses>& counts, std::uint64_t seed,
                           const GenerateOptions& opts) {
  return render(counts, seed, opts);
}

Dataset generate_dataset(const std::array<int, kNumClasses>& counts, std::uint64_t seed, const fs::path& out_dir,
                         const GenerateOptions& opts) {
  Dataset ds = render(counts, seed, opts);
  save_dataset(ds, out_dir);
  ds.manifest = out_dir / "manifest.csv";
  return ds;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  ensure_dir(dir / "images");
  bool any_mask = std::any_of(ds.samples.begin(), ds.samples.end(), [](const Sample& s) { return !s.mask.empty(); });
  if (any_mask) ensure_dir(dir / "masks");
  const fs::path manifest = dir / "manifest.csv";
  std::ofstream out(manifest, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot write " + manifest.string());
  out << "filename,label\n";
  for (const auto& s : ds.samples) {
    ensure_dir((dir / s.name).parent_path());
    write_pgm(dir / s.name, s.image);
    if (!s.mask.empty()) write_pgm(mask_path(dir, s.name), s.mask);
    out << s.name << ',' << class_name(s.cls) << '\n';
  }
  if (!out.flush()) throw FileError("write failed for " + manifest.string());
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw FileError("dataset directory not found: " + dir.string());
  const fs::path manifest = dir / "manifest.csv";
  std::ifstream in(manifest, std::ios::binary);
  if (!in) throw FileError("cannot open manifest " + manifest.string());

  Dataset ds = empty_dataset({kAllClasses.begin(), kAllClasses.end()});
  ds.manifest = manifest;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw ManifestError(manifest.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != "filename,label") fail("expected header 'filename,label', got '" + line + "'");
      continue;
    }
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      fail("expected 2 fields");
    }
    Sample s;
    s.name = line.substr(0, comma);
    if (s.name.empty()) fail("empty filename");
    try {
      s.cls = parse_class(line.substr(comma + 1));
    } catch (const ParseError& e) {
      fail(e.what());
    }
    s.image = read_pgm(dir / s.name);
    const fs::path mp = mask_path(dir, s.name);
    if (fs::exists(mp)) s.mask = read_pgm(mp);
    ds.add(std::move(s));
  }
  if (line_no == 0) fail("empty manifest (missing header)");
  return ds;
}

Dataset class_subset(const Dataset& ds, int task) {
  Dataset out = empty_dataset(task_classes(task));
  out.manifest = ds.manifest;
  for (const auto& s : ds.samples) {
    if (std::find(out.classes.begin(), out.classes.end(), s.cls) != out.classes.end()) out.add(s);
  }
  return out;
}

std::uint64_t manifest_hash(const Dataset& ds) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char b) {
    h ^= b;
    h *= 0x100000001b3ULL;
  };
  for (const auto& s : ds.samples) {
    for (char ch : s.name) mix(static_cast<unsigned char>(ch));
    mix(0);
    mix(static_cast<unsigned char>(code(s.cls)));
  }
  return h;
}

}  // namespace wafer::synth
