#include "wafer/train/trainer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>

#include "wafer/errors.hpp"
#include "wafer/rng.hpp"

namespace wafer::train {

namespace {

constexpr std::uint64_t kAugmentStream = 0xa11c;

void check_labels(const TrainSet& set, std::size_t classes, const char* which) {
  if (set.labels.size() != set.images.size()) {
    throw DimensionError(std::string(which) + " set has " + std::to_string(set.images.size()) + " images but " +
                         std::to_string(set.labels.size()) + " labels");
  }
  for (int l : set.labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= classes) {
      throw LabelError(std::string(which) + " label " + std::to_string(l) + " outside the " +
                       std::to_string(classes) + "-class head");
    }
  }
}

}  // namespace

template <typename T>
core::Tensor<T> make_batch(const TrainSet& set, std::span<const std::size_t> indices, std::size_t channels,
                           const augment::AugmentPipeline* pipeline, std::uint64_t seed, std::uint64_t epoch) {
  if (indices.empty()) throw DimensionError("empty batch");
  const auto& first = set.images.at(indices[0]);
  const std::size_t h = first.height, w = first.width, plane = h * w;
  core::Tensor<T> out({indices.size(), channels, h, w});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const std::size_t i = indices[b];
    const auto& src = set.images.at(i);
    synth::ImageF aug;
    const synth::ImageF* img = &src;
    if (pipeline != nullptr) {
      aug = pipeline->apply(src, seed, i, epoch);
      img = &aug;
    }
    if (img->height != h || img->width != w) throw DimensionError("batch images differ in size");
    T* dst = out.data() + b * channels * plane;
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t k = 0; k < plane; ++k) dst[c * plane + k] = static_cast<T>(img->pixels[k]);
  }
  return out;
}

template <typename T>
EvalResult evaluate(zoo::Model<T>& model, const TrainSet& set) {
  const std::size_t classes = model.output_shape().at(0);
  check_labels(set, classes, "evaluation");
  EvalResult r;
  if (set.empty()) throw MetricsError("cannot evaluate an empty set");
  const std::size_t channels = model.input_shape().at(0);
  constexpr std::size_t kChunk = 64;
  double loss = 0;
  for (std::size_t start = 0; start < set.size(); start += kChunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = start; i < std::min(set.size(), start + kChunk); ++i) idx.push_back(i);
    auto pred = zoo::predict(model, make_batch<T>(set, idx, channels));
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const T* row = pred.logits.data() + b * classes;
      double mx = row[0];
      for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, static_cast<double>(row[c]));
      double s = 0;
      for (std::size_t c = 0; c < classes; ++c) s += std::exp(static_cast<double>(row[c]) - mx);
      loss += mx + std::log(s) - static_cast<double>(row[set.labels[idx[b]]]);
      r.predictions.push_back(pred.classes[b]);
    }
  }
  r.loss = loss / static_cast<double>(set.size());
  r.confusion = eval::confusion(r.predictions, set.labels, classes);
  r.metrics = eval::weighted_metrics(r.confusion);
  return r;
}

template <typename T>
TrainHistory train_model(zoo::Model<T>& model, const TrainSet& train, const TrainSet& val, const TrainConfig& cfg,
                         const TrainOptions& opts) {
  cfg.validate();
  if (train.empty()) throw TrainingError("training set is empty");
  if (val.empty()) throw TrainingError("validation set is empty");
  const std::size_t classes = model.output_shape().at(0);
  check_labels(train, classes, "training");
  check_labels(val, classes, "validation");
  const std::size_t channels = model.input_shape().at(0);

  std::ofstream log;
  if (opts.progress_csv) {
    log.open(*opts.progress_csv, std::ios::binary | std::ios::trunc);
    if (!log) throw FileError("cannot write progress log " + opts.progress_csv->string());
    log << "epoch,train_loss,val_loss,val_f1,lr\n";
  }

  Adam<T> adam(model.parameters());
  EarlyStopping stopper(cfg.patience, cfg.tolerance);
  TrainHistory hist;
  auto best_state = model.snapshot();
  const std::uint64_t aug_seed = derive_seed({cfg.seed, kAugmentStream});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_for_epoch(epoch, cfg);
    const auto batches = minibatches(train.size(), cfg.batch_size, epoch, cfg.seed);
    double loss_sum = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& idx = batches[b];
      auto x = make_batch<T>(train, idx, channels, opts.augment, aug_seed, static_cast<std::uint64_t>(epoch));
      std::vector<int> y;
      y.reserve(idx.size());
      for (std::size_t i : idx) y.push_back(train.labels[i]);

      auto fail = [&](const std::string& what) {
        return TrainingError(what + " (epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(b) + ")",
                             epoch + 1, static_cast<int>(b));
      };
      double lv = 0;
      try {
        core::GradTape<T> tape;
        auto logits = model.forward(tape, tape.input(std::move(x)), zoo::Mode::train);
        auto loss = tape.softmax_cross_entropy(logits, y);
        lv = tape.value(loss)[0];
        if (!std::isfinite(lv)) throw fail("non-finite training loss");
        model.zero_grad();
        tape.backward(loss);
        adam.step(lr, cfg.weight_decay);
      } catch (const OptimizerError& e) {
        throw fail(e.what());
      } catch (const NumericError& e) {
        throw fail(e.what());
      }
      loss_sum += lv * static_cast<double>(idx.size());
    }

    const auto v = evaluate(model, val);
    EpochRecord rec{epoch + 1, loss_sum / static_cast<double>(train.size()), v.loss, v.metrics.f1, lr};
    hist.epochs.push_back(rec);
    if (!std::isfinite(v.loss)) {
      throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch + 1), epoch + 1, -1);
    }
    if (log.is_open()) {
      log << std::setprecision(9) << rec.epoch << ',' << rec.train_loss << ',' << rec.val_loss << ',' << rec.val_f1
          << ',' << rec.lr << '\n';
      log.flush();
    }
    if (opts.on_epoch) opts.on_epoch(rec);
    if (stopper.update(v.loss)) best_state = model.snapshot();
    if (stopper.should_stop()) break;
  }
  hist.best_epoch = stopper.best_epoch();
  hist.best_val_loss = stopper.best_loss();
  model.restore(best_state);
  return hist;
}

template core::Tensor<float> make_batch(const TrainSet&, std::span<const std::size_t>, std::size_t,
                                        const augment::AugmentPipeline*, std::uint64_t, std::uint64_t);
template core::Tensor<double> make_batch(const TrainSet&, std::span<const std::size_t>, std::size_t,
                                         const augment::AugmentPipeline*, std::uint64_t, std::uint64_t);
template EvalResult evaluate(zoo::Model<float>&, const TrainSet&);
template EvalResult evaluate(zoo::Model<double>&, const TrainSet&);
template TrainHistory train_model(zoo::Model<float>&, const TrainSet&, const TrainSet&, const TrainConfig&,
                                  const TrainOptions&);
template TrainHistory train_model(zoo::Model<double>&, const TrainSet&, const TrainSet&, const TrainConfig&,
                                  const TrainOptions&);

}  // namespace wafer::train
