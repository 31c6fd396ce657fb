#include "wafer/deepsmote/smote.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "wafer/errors.hpp"
#include "wafer/rng.hpp"
#include "wafer/synth/preprocess.hpp"

namespace wafer::deepsmote {

std::vector<std::vector<std::size_t>> nearest_neighbors(const std::vector<Latent>& points, int k) {
  if (k < 1) throw SpecError("SMOTE needs k >= 1, got " + std::to_string(k));
  if (static_cast<std::size_t>(k) >= points.size()) {
    throw SpecError("SMOTE k = " + std::to_string(k) + " must be below the population size " +
                    std::to_string(points.size()));
  }
  const std::size_t n = points.size(), dim = points[0].size();
  for (const auto& p : points) {
    if (p.size() != dim) throw DimensionError("latents differ in dimension");
  }
  std::vector<std::vector<std::size_t>> out(n);
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t i = 0; i < n; ++i) {
    dist.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double d = 0;
      for (std::size_t t = 0; t < dim; ++t) d += (points[i][t] - points[j][t]) * (points[i][t] - points[j][t]);
      dist.emplace_back(d, j);
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    for (int t = 0; t < k; ++t) out[i].push_back(dist[static_cast<std::size_t>(t)].second);
  }
  return out;
}

SmoteResult smote_latent(const std::vector<Latent>& latents, const SmoteSpec& spec) {
  const auto nn = nearest_neighbors(latents, spec.k);
  if (spec.fixed_lambda && !(*spec.fixed_lambda >= 0 && *spec.fixed_lambda <= 1)) {
    throw SpecError("fixed lambda must lie in [0, 1]");
  }
  Rng rng(spec.seed);
  SmoteResult r;
  for (std::size_t s = 0; s < spec.n; ++s) {
    const std::size_t i = rng.index(latents.size());
    const std::size_t j = nn[i][rng.index(nn[i].size())];
    const double lambda = spec.fixed_lambda.value_or(rng.uniform());
    Latent z(latents[i].size());
    for (std::size_t t = 0; t < z.size(); ++t) z[t] = latents[i][t] + lambda * (latents[j][t] - latents[i][t]);
    r.points.push_back(std::move(z));
    r.parents.emplace_back(i, j);
    r.lambdas.push_back(lambda);
  }
  return r;
}

std::vector<synth::ImageF> class_images(const synth::Dataset& ds, synth::WaferClass cls, int res) {
  std::vector<synth::ImageF> out;
  const auto r = static_cast<std::size_t>(res);
  for (const auto& s : ds.samples) {
    if (s.cls != cls) continue;
    auto img = synth::resize_image(s.image, r, r);
    for (auto& p : img.pixels) p /= 255.0f;
    out.push_back(std::move(img));
  }
  return out;
}

template <typename T>
synth::Dataset oversample_deepsmote(const synth::Dataset& ds, synth::WaferClass cls, std::size_t target_count,
                                    AutoencoderPair<T>& pair, SmoteSpec spec) {
  if (!pair.trained) throw UsageError("DeepSMOTE oversampling needs a trained autoencoder");
  ds.label_of(cls);
  const std::size_t have = ds.count(cls);
  if (have == 0) throw ConfigError("class " + std::string(synth::class_name(cls)) + " has no samples to oversample");
  if (target_count <= have) return ds;

  const auto source = class_images(ds, cls, pair.resolution);
  spec.n = target_count - have;
  const auto synth_z = smote_latent(encode(pair, source), spec);
  const auto decoded = decode(pair, synth_z.points);

  // decoded images go back to the class's native image size
  const synth::Sample* ref = nullptr;
  for (const auto& s : ds.samples)
    if (s.cls == cls) {
      ref = &s;
      break;
    }
  synth::Dataset out = ds;
  for (std::size_t j = 0; j < decoded.size(); ++j) {
    auto unit = synth::resize_image(decoded[j], ref->image.height, ref->image.width);
    for (auto& p : unit.pixels) p = std::clamp(p, 0.0f, 1.0f) * 255.0f;
    synth::Sample s;
    char idx[32];
    std::snprintf(idx, sizeof idx, "_%05zu", j);
    s.name = "deepsmote/" + std::string(synth::class_name(cls)) + idx + ".pgm";
    s.cls = cls;
    s.image = synth::to_u8(unit);
    out.add(std::move(s));
  }
  return out;
}

template synth::Dataset oversample_deepsmote(const synth::Dataset&, synth::WaferClass, std::size_t,
                                             AutoencoderPair<float>&, SmoteSpec);
template synth::Dataset oversample_deepsmote(const synth::Dataset&, synth::WaferClass, std::size_t,
                                             AutoencoderPair<double>&, SmoteSpec);

}  // namespace wafer::deepsmote
