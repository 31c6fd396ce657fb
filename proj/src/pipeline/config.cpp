#include "wafer/pipeline/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "wafer/errors.hpp"

namespace wafer::pipeline {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename N>
N parse_number(const std::string& v, const std::string& where, const std::string& key) {
  N out{};
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || v.empty()) {
    throw ParseError(where + ": malformed value '" + v + "' for " + key);
  }
  return out;
}

bool parse_bool(const std::string& v, const std::string& where, const std::string& key) {
  std::string l = v;
  std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
  if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
  if (l == "false" || l == "0" || l == "no" || l == "off") return false;
  throw ParseError(where + ": expected a boolean for " + key + ", got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&, const std::string&)>;

template <typename N, typename F>
Setter num(F field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v, const std::string& w) {
    field(c) = parse_number<N>(v, w, k);
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"experiment", num<int>([](RunConfig& c) -> int& { return c.experiment; })},
      {"classes", num<int>([](RunConfig& c) -> int& { return c.classes; })},
      {"seed", num<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.seed; })},
      {"data_seed", num<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.data_seed; })},
      {"data_dir", [](RunConfig& c, auto&, const std::string& v, auto&) { c.data_dir = v; }},
      {"out_dir", [](RunConfig& c, auto&, const std::string& v, auto&) { c.out_dir = v; }},
      {"scale", num<double>([](RunConfig& c) -> double& { return c.scale; })},
      {"image_size", num<int>([](RunConfig& c) -> int& { return c.image_size; })},
      {"resolution", num<int>([](RunConfig& c) -> int& { return c.resolution; })},
      {"epochs", num<int>([](RunConfig& c) -> int& { return c.train.epochs; })},
      {"batch_size", num<int>([](RunConfig& c) -> int& { return c.train.batch_size; })},
      {"lr", num<double>([](RunConfig& c) -> double& { return c.train.base_lr; })},
      {"weight_decay", num<double>([](RunConfig& c) -> double& { return c.train.weight_decay; })},
      {"patience", num<int>([](RunConfig& c) -> int& { return c.train.patience; })},
      {"gamma", num<double>([](RunConfig& c) -> double& { return c.train.gamma; })},
      {"multistep",
       [](RunConfig& c, const std::string& k, const std::string& v, const std::string& w) {
         if (v == "auto") {
           c.multistep.reset();
         } else {
           c.multistep = parse_bool(v, w, k);
         }
       }},
      {"milestones",
       [](RunConfig& c, const std::string& k, const std::string& v, const std::string& w) {
         std::vector<int> ms;
         std::stringstream ss(v);
         std::string item;
         while (std::getline(ss, item, ',')) ms.push_back(parse_number<int>(trim(item), w, k));
         c.train.milestones = ms;
       }},
      {"oversample_target",
       [](RunConfig& c, const std::string& k, const std::string& v, const std::string& w) {
         if (v == "auto") {
           c.oversample_target.reset();
         } else {
           c.oversample_target = parse_number<std::size_t>(v, w, k);
         }
       }},
      {"ae_epochs", num<int>([](RunConfig& c) -> int& { return c.ae_epochs; })},
      {"ae_latent", num<int>([](RunConfig& c) -> int& { return c.ae_latent; })},
      {"ae_resolution", num<int>([](RunConfig& c) -> int& { return c.ae_resolution; })},
      {"smote_k", num<int>([](RunConfig& c) -> int& { return c.smote_k; })},
      {"bench_warmup", num<int>([](RunConfig& c) -> int& { return c.bench_warmup; })},
      {"bench_reps", num<int>([](RunConfig& c) -> int& { return c.bench_reps; })},
      {"allow_untrained_vgg",
       [](RunConfig& c, const std::string& k, const std::string& v, const std::string& w) {
         c.allow_untrained_vgg = parse_bool(v, w, k);
       }},
      {"threads", num<unsigned>([](RunConfig& c) -> unsigned& { return c.threads; })},
  };
  return table;
}

}  // namespace

void RunConfig::validate() const {
  if (experiment < 0 || experiment > 12) {
    throw ConfigError("experiment must be in 0..12, got " + std::to_string(experiment));
  }
  if (classes != 3 && classes != 5 && classes != 8) {
    throw ConfigError("classes must be 3, 5 or 8, got " + std::to_string(classes));
  }
  if (!(scale > 0) || scale > 100) throw ConfigError("scale must be in (0, 100]");
  if (image_size < 32) throw ConfigError("image_size must be >= 32");
  if (resolution < 8) throw ConfigError("resolution must be >= 8");
  train.validate();
  if (ae_epochs < 0) throw ConfigError("ae_epochs must be >= 0");
  if (ae_latent < 1) throw ConfigError("ae_latent must be >= 1");
  if (ae_resolution < 16 || ae_resolution % 16 != 0) throw ConfigError("ae_resolution must be a multiple of 16");
  if (smote_k < 1) throw ConfigError("smote_k must be >= 1");
  if (bench_warmup < 0) throw ConfigError("bench_warmup must be >= 0");
  if (bench_reps < 10) throw ConfigError("bench_reps must be >= 10");
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value, const std::string& where) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ParseError(where + ": unknown key '" + key + "'");
  it->second(cfg, key, value, where);
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no);
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(where + ": missing key");
    apply_setting(cfg, key, value, where);
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  apply_config_text(cfg, buf.str(), path.string());
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

}  // namespace wafer::pipeline
