#include "wafer/deepsmote/autoencoder.hpp"

#include <cmath>

#include "wafer/errors.hpp"
#include "wafer/rng.hpp"
#include "wafer/train/optimizer.hpp"
#include "wafer/train/schedule.hpp"

namespace wafer::deepsmote {

namespace {

constexpr std::array<std::size_t, 4> kWidths{16, 32, 64, 128};

template <typename T>
core::Tensor<T> image_batch(const std::vector<synth::ImageF>& images, std::span<const std::size_t> idx, int res) {
  const std::size_t plane = static_cast<std::size_t>(res) * res;
  core::Tensor<T> out({idx.size(), 1, static_cast<std::size_t>(res), static_cast<std::size_t>(res)});
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto& img = images[idx[b]];
    if (img.height != static_cast<std::size_t>(res) || img.width != static_cast<std::size_t>(res)) {
      throw DimensionError("autoencoder expects " + std::to_string(res) + "x" + std::to_string(res) + " images, got " +
                           std::to_string(img.height) + "x" + std::to_string(img.width));
    }
    std::copy(img.pixels.begin(), img.pixels.end(), out.data() + b * plane);
  }
  return out;
}

template <typename T>
double full_mse(AutoencoderPair<T>& pair, const std::vector<synth::ImageF>& images) {
  constexpr std::size_t kChunk = 32;
  double sum = 0;
  std::size_t count = 0;
  for (std::size_t start = 0; start < images.size(); start += kChunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(images.size(), start + kChunk); ++i) idx.push_back(i);
    auto x = image_batch<T>(images, idx, pair.resolution);
    core::GradTape<T> tape(false);
    auto z = pair.encoder.forward(tape, tape.input(x), zoo::Mode::eval);
    auto y = pair.decoder.forward(tape, z, zoo::Mode::eval);
    const auto& out = tape.value(y);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double d = static_cast<double>(out[i]) - static_cast<double>(x[i]);
      sum += d * d;
    }
    count += out.size();
  }
  return sum / static_cast<double>(count);
}

}  // namespace

template <typename T>
AutoencoderPair<T> build_autoencoder(int latent_dim, int input_res, std::uint64_t seed) {
  if (input_res < 16 || input_res % 16 != 0) {
    throw ConfigError("autoencoder resolution must be a positive multiple of 16, got " + std::to_string(input_res));
  }
  if (latent_dim < 1) throw ConfigError("latent dimension must be >= 1");
  const auto res = static_cast<std::size_t>(input_res);
  const std::size_t bottom = res / 16;
  const std::size_t flat = kWidths.back() * bottom * bottom;

  auto enc = std::make_unique<zoo::Sequential<T>>();
  std::size_t cin = 1;
  for (std::size_t w : kWidths) {
    enc->template emplace<zoo::Conv2d<T>>(cin, w, 4, 2, 1);
    enc->template emplace<zoo::Act<T>>(zoo::Activation::relu);
    cin = w;
  }
  enc->template emplace<zoo::Flatten<T>>();
  enc->template emplace<zoo::Dense<T>>(flat, static_cast<std::size_t>(latent_dim));

  auto dec = std::make_unique<zoo::Sequential<T>>();
  dec->template emplace<zoo::Dense<T>>(static_cast<std::size_t>(latent_dim), flat);
  dec->template emplace<zoo::Act<T>>(zoo::Activation::relu);
  dec->template emplace<zoo::Reshape<T>>(core::Shape{kWidths.back(), bottom, bottom});
  cin = kWidths.back();
  for (int i = 3; i >= 0; --i) {
    const std::size_t cout = i == 0 ? 1 : kWidths[static_cast<std::size_t>(i - 1)];
    dec->template emplace<zoo::Upsample2x<T>>();
    dec->template emplace<zoo::Conv2d<T>>(cin, cout, 3, 1, 1);
    if (i > 0) dec->template emplace<zoo::Act<T>>(zoo::Activation::relu);
    cin = cout;
  }
  dec->template emplace<zoo::Scale<T>>(T(6));
  dec->template emplace<zoo::Act<T>>(zoo::Activation::relu6);
  dec->template emplace<zoo::Scale<T>>(T(1) / T(6));

  AutoencoderPair<T> pair{zoo::Model<T>("encoder", {1, res, res}, std::move(enc)),
                          zoo::Model<T>("decoder", {static_cast<std::size_t>(latent_dim)}, std::move(dec)),
                          latent_dim, input_res, false};
  pair.encoder.initialize(derive_seed({seed, 1}));
  pair.decoder.initialize(derive_seed({seed, 2}));
  return pair;
}

template <typename T>
AutoencoderHistory train_autoencoder(AutoencoderPair<T>& pair, const std::vector<synth::ImageF>& images,
                                     const AutoencoderConfig& cfg) {
  if (images.size() < 8) {
    throw ConfigError("autoencoder training needs at least 8 images, got " + std::to_string(images.size()));
  }
  if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
  std::vector<core::Parameter<T>*> params = pair.encoder.parameters();
  params.insert(params.end(), pair.decoder.parameters().begin(), pair.decoder.parameters().end());
  train::Adam<T> adam(params);

  AutoencoderHistory hist;
  hist.mse.push_back(full_mse(pair, images));
  auto best_enc = pair.encoder.snapshot();
  auto best_dec = pair.decoder.snapshot();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& idx : train::minibatches(images.size(), cfg.batch_size, epoch, cfg.seed)) {
      auto x = image_batch<T>(images, idx, pair.resolution);
      core::GradTape<T> tape;
      auto z = pair.encoder.forward(tape, tape.input(x), zoo::Mode::train);
      auto y = pair.decoder.forward(tape, z, zoo::Mode::train);
      auto loss = tape.mse(y, x);
      if (!std::isfinite(static_cast<double>(tape.value(loss)[0]))) {
        throw TrainingError("autoencoder loss diverged at epoch " + std::to_string(epoch + 1), epoch + 1);
      }
      pair.encoder.zero_grad();
      pair.decoder.zero_grad();
      tape.backward(loss);
      try {
        adam.step(cfg.lr, 0.0);
      } catch (const OptimizerError& e) {
        throw TrainingError(std::string("autoencoder: ") + e.what(), epoch + 1);
      }
    }
    const double mse = full_mse(pair, images);
    if (!std::isfinite(mse)) throw TrainingError("autoencoder loss diverged", epoch + 1);
    hist.mse.push_back(mse);
    if (mse < hist.best()) {
      hist.best_epoch = epoch + 1;
      best_enc = pair.encoder.snapshot();
      best_dec = pair.decoder.snapshot();
    }
  }
  pair.encoder.restore(best_enc);
  pair.decoder.restore(best_dec);
  if (cfg.epochs > 0) pair.trained = true;
  return hist;
}

template <typename T>
std::vector<std::vector<double>> encode(AutoencoderPair<T>& pair, const std::vector<synth::ImageF>& images) {
  std::vector<std::vector<double>> out;
  constexpr std::size_t kChunk = 32;
  for (std::size_t start = 0; start < images.size(); start += kChunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(images.size(), start + kChunk); ++i) idx.push_back(i);
    core::GradTape<T> tape(false);
    auto z = pair.encoder.forward(tape, tape.input(image_batch<T>(images, idx, pair.resolution)), zoo::Mode::eval);
    const auto& v = tape.value(z);
    const auto d = static_cast<std::size_t>(pair.latent_dim);
    for (std::size_t b = 0; b < idx.size(); ++b) out.emplace_back(v.data() + b * d, v.data() + (b + 1) * d);
  }
  return out;
}

template <typename T>
std::vector<synth::ImageF> decode(AutoencoderPair<T>& pair, const std::vector<std::vector<double>>& latents) {
  std::vector<synth::ImageF> out;
  const auto d = static_cast<std::size_t>(pair.latent_dim);
  const auto res = static_cast<std::size_t>(pair.resolution);
  constexpr std::size_t kChunk = 32;
  for (std::size_t start = 0; start < latents.size(); start += kChunk) {
    const std::size_t n = std::min(latents.size(), start + kChunk) - start;
    core::Tensor<T> z({n, d});
    for (std::size_t b = 0; b < n; ++b) {
      const auto& l = latents[start + b];
      if (l.size() != d) throw DimensionError("latent has " + std::to_string(l.size()) + " values, expected " + std::to_string(d));
      for (std::size_t k = 0; k < d; ++k) z[b * d + k] = static_cast<T>(l[k]);
    }
    core::GradTape<T> tape(false);
    auto y = pair.decoder.forward(tape, tape.input(std::move(z)), zoo::Mode::eval);
    const auto& v = tape.value(y);
    for (std::size_t b = 0; b < n; ++b) {
      synth::ImageF img(res, res);
      for (std::size_t k = 0; k < res * res; ++k) img.pixels[k] = static_cast<float>(v[b * res * res + k]);
      out.push_back(std::move(img));
    }
  }
  return out;
}

template AutoencoderPair<float> build_autoencoder(int, int, std::uint64_t);
template AutoencoderPair<double> build_autoencoder(int, int, std::uint64_t);
template AutoencoderHistory train_autoencoder(AutoencoderPair<float>&, const std::vector<synth::ImageF>&,
                                              const AutoencoderConfig&);
template AutoencoderHistory train_autoencoder(AutoencoderPair<double>&, const std::vector<synth::ImageF>&,
                                              const AutoencoderConfig&);
template std::vector<std::vector<double>> encode(AutoencoderPair<float>&, const std::vector<synth::ImageF>&);
template std::vector<std::vector<double>> encode(AutoencoderPair<double>&, const std::vector<synth::ImageF>&);
template std::vector<synth::ImageF> decode(AutoencoderPair<float>&, const std::vector<std::vector<double>>&);
template std::vector<synth::ImageF> decode(AutoencoderPair<double>&, const std::vector<std::vector<double>>&);

}  // namespace wafer::deepsmote
