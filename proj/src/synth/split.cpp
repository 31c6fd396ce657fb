#include "wafer/synth/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wafer/errors.hpp"
#include "wafer/rng.hpp"

namespace wafer::synth {

namespace {

void check_ratios(const SplitRatios& r) {
  if (!(r.train > 0 && r.val > 0 && r.test > 0)) throw SplitError("split ratios must be positive");
  if (std::fabs(r.train + r.val + r.test - 1.0) > 1e-9) throw SplitError("split ratios must sum to 1");
}

}  // namespace

std::array<std::size_t, 3> allocate(std::size_t n, const SplitRatios& ratios) {
  check_ratios(ratios);
  const std::array<double, 3> q = {ratios.train * n, ratios.val * n, ratios.test * n};
  std::array<std::size_t, 3> out{};
  std::array<double, 3> frac{};
  for (int i = 0; i < 3; ++i) {
    const double f = std::floor(q[i] + 1e-9);
    out[i] = static_cast<std::size_t>(f);
    frac[i] = q[i] - f;
  }
  std::size_t left = n - (out[0] + out[1] + out[2]);
  std::array<int, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b] + 1e-12; });
  for (int k = 0; left > 0; k = (k + 1) % 3, --left) ++out[order[k]];
  if (n >= 3) {
    for (int i = 0; i < 3; ++i) {
      if (out[i] > 0) continue;
      const auto big = std::max_element(out.begin(), out.end()) - out.begin();
      --out[big];
      ++out[i];
    }
  }
  return out;
}

Split stratified_split(const Dataset& ds, const SplitRatios& ratios, std::uint64_t seed) {
  check_ratios(ratios);
  // part[i] = 0/1/2 for train/val/test
  std::vector<int> part(ds.size(), 0);
  for (std::size_t label = 0; label < ds.classes.size(); ++label) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.samples[i].label == static_cast<int>(label)) members.push_back(i);
    }
    if (members.empty()) continue;
    const WaferClass cls = ds.classes[label];
    if (members.size() < 3) {
      throw SplitError("class " + std::string(class_name(cls)) + " has " + std::to_string(members.size()) +
                       " samples, fewer than the 3 split parts");
    }
    Rng rng(derive_seed({seed, static_cast<std::uint64_t>(code(cls))}));
    rng.shuffle(members);
    const auto alloc = allocate(members.size(), ratios);
    for (std::size_t k = 0; k < members.size(); ++k) {
      part[members[k]] = k < alloc[0] ? 0 : (k < alloc[0] + alloc[1] ? 1 : 2);
    }
  }
  Split out{empty_dataset(ds.classes), empty_dataset(ds.classes), empty_dataset(ds.classes)};
  Dataset* parts[3] = {&out.train, &out.val, &out.test};
  for (std::size_t i = 0; i < ds.size(); ++i) parts[part[i]]->samples.push_back(ds.samples[i]);
  return out;
}

}  // namespace wafer::synth
