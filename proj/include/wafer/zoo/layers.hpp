#pragma once

#include <memory>
#include <string>
#include <vector>

#include "wafer/core/tape.hpp"
#include "wafer/rng.hpp"

namespace wafer::zoo {

using core::GradTape;
using core::Parameter;
using core::Shape;
using core::Tensor;
using core::shape_size;
using core::shape_str;
using core::ops::Activation;
using core::ops::Mode;

/// Non-trainable state that still belongs in checkpoints (batchnorm running stats).
template <typename T>
struct NamedBuffer {
  std::string name;
  Tensor<T>* tensor;
};

template <typename T>
struct StateRefs {
  std::vector<Parameter<T>*> params;
  std::vector<NamedBuffer<T>> buffers;
};

/// One node of a model graph. Shapes passed to output_shape() are per-sample
/// (no batch axis): [C, H, W] for feature maps, [F] for vectors.
template <typename T>
class Layer {
 public:
  using Var = typename GradTape<T>::Var;

  virtual ~Layer() = default;

  virtual Var forward(GradTape<T>& tape, Var x, Mode mode) = 0;
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual std::string describe() const = 0;
  /// Registers parameters/buffers under `prefix` and renames parameters to
  /// their full dotted path.
  virtual void collect(const std::string& prefix, StateRefs<T>& out) { (void)prefix, (void)out; }
  virtual void initialize(Rng& rng) { (void)rng; }
  /// Nested layers with their own prefix, for summaries.
  virtual void summarize(const std::string& prefix, const Shape& in,
                         std::vector<std::string>& lines) const;
};

template <typename T>
using LayerPtr = std::unique_ptr<Layer<T>>;

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  using typename Layer<T>::Var;
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, int stride = 1,
         int pad = 0);
  Var forward(GradTape<T>& tape, Var x, Mode mode) override;
  Shape output_shape(const Shape& in) const override;
  std::string describe() const override;
  void collect(const std::string& prefix, StateRefs<T>& out) override;
  void initialize(Rng& rng) override;

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

 private:
  std::size_t in_, out_, kernel_;
  int stride_, pad_;
  Parameter<T> weight_;
  Parameter<T> bias_;
};

template <typename T>
class BatchNorm2d final : public Layer<T> {
 public:
  using typename Layer<T>::Var;
  explicit BatchNorm2d(std::size_t channels);
  Var forward(GradTape<T>& tape, Var x, Mode mode) override;
  Shape output_shape(const Shape& in) const override;
  std::string describe() const override;
  void collect(const std::string& prefix, StateRefs<T>& out) override;

 private:
  std::size_t channels_;
  Parameter<T> gamma_;
  Parameter<T> beta_;
  core::ops::RunningStats<T> stats_;
};

template <typename T>
class Act final : public Layer<T> {
 public:
  using typename Layer<T>::Var;
  explicit Act(Activation kind) : kind_(kind) {}
  Var forward(GradTape<T>& tape, Var x, Mode) override { return tape.activation(x, kind_); }
  Shape output_shape(const Shape& in) const override { return in; }
  std::string describe() const override;

 private:
  Activation kind_;
};

template <typename T>
class MaxPool2d final : public Layer<T> {
 public:
  using typename Layer<T>::Var;
  MaxPool2d(int window, int stride) : window_(window), stride_(stride) {}
  Var forward(GradTape<T>& tape, Var x, Mode) override { return tape.maxpool2d(x, window_, stride_); }
  Shape output_shape(const Shape& in) const override;
  std::string describe() const override;

 private:
  int window_, stride_;
};

template <typename T>
class Flatten final : public Layer<T> {
 public:
  using typename Layer<T>::Var;
  Var forward(GradTape<T>& tape, Var x, Mode) override;
  Shape output_shape(const Shape& in) const override { return {core::shape_size(in)}; }
  std::string describe() const override { return "flatten"; }
};

/// Reinterprets a per-sample vector as a fixed per-sample shape.
template <typename T>
class Reshape final : public Layer<T> {
 public:
  using typename Layer<T>::Var;
  explicit Reshape(Shape per_sample) : shape_(std::move(per_sample)) {}
  Var forward(GradTape<T>& tape, Var x, Mode) override;
  Shape output_shape(const Shape& in) const override;
  std::string describe() const override { return "reshape " + core::shape_str(shape_); }

 private:
  Shape shape_;
};

template <typename T>
class Dense final : public Layer<T> {
 public:
  using typename Layer<T>::Var;
  Dense(std::size_t in_features, std::size_t out_features);
  Var forward(GradTape<T>& tape, Var x, Mode mode) override;
  Shape output_shape(const Shape& in) const override;
  std::string describe() const override;
  void collect(const std::string& prefix, StateRefs<T>& out) override;
  void initialize(Rng& rng) override;

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

 private:
  std::size_t in_, out_;
  Parameter<T> weight_;
  Parameter<T> bias_;
};

template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  using typename Layer<T>::Var;
  Var forward(GradTape<T>& tape, Var x, Mode) override { return tape.global_avg_pool(x); }
  Shape output_shape(const Shape& in) const override;
  std::string describe() const override { return "global average pool"; }
};

template <typename T>
class Upsample2x final : public Layer<T> {
 public:
  using typename Layer<T>::Var;
  Var forward(GradTape<T>& tape, Var x, Mode) override { return tape.upsample2x(x); }
  Shape output_shape(const Shape& in) const override;
  std::string describe() const override { return "nearest upsample x2"; }
};

template <typename T>
class Scale final : public Layer<T> {
 public:
  using typename Layer<T>::Var;
  explicit Scale(T factor) : factor_(factor) {}
  Var forward(GradTape<T>& tape, Var x, Mode) override { return tape.scale(x, factor_); }
  Shape output_shape(const Shape& in) const override { return in; }
  std::string describe() const override;

 private:
  T factor_;
};

template <typename T>
class Sequential final : public Layer<T> {
 public:
  using typename Layer<T>::Var;
  Sequential() = default;
  explicit Sequential(std::vector<LayerPtr<T>> layers) : layers_(std::move(layers)) {}

  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }
  void push(LayerPtr<T> layer) { layers_.push_back(std::move(layer)); }

  Var forward(GradTape<T>& tape, Var x, Mode mode) override;
  Shape output_shape(const Shape& in) const override;
  std::string describe() const override;
  void collect(const std::string& prefix, StateRefs<T>& out) override;
  void initialize(Rng& rng) override;
  void summarize(const std::string& prefix, const Shape& in,
                 std::vector<std::string>& lines) const override;

  std::size_t size() const { return layers_.size(); }
  Layer<T>& at(std::size_t i) { return *layers_.at(i); }

 private:
  std::vector<LayerPtr<T>> layers_;
};

/// Parallel paths over the same input, concatenated along channels.
template <typename T>
class InceptionBlock final : public Layer<T> {
 public:
  using typename Layer<T>::Var;
  explicit InceptionBlock(std::vector<std::unique_ptr<Sequential<T>>> paths)
      : paths_(std::move(paths)) {}
  Var forward(GradTape<T>& tape, Var x, Mode mode) override;
  Shape output_shape(const Shape& in) const override;
  std::string describe() const override;
  void collect(const std::string& prefix, StateRefs<T>& out) override;
  void initialize(Rng& rng) override;
  void summarize(const std::string& prefix, const Shape& in,
                 std::vector<std::string>& lines) const override;

 private:
  std::vector<std::unique_ptr<Sequential<T>>> paths_;
};

/// relu(main(x) + skip(x)); an absent skip path is the identity.
template <typename T>
class ResidualBlock final : public Layer<T> {
 public:
  using typename Layer<T>::Var;
  ResidualBlock(std::unique_ptr<Sequential<T>> main, std::unique_ptr<Sequential<T>> skip)
      : main_(std::move(main)), skip_(std::move(skip)) {}
  Var forward(GradTape<T>& tape, Var x, Mode mode) override;
  Shape output_shape(const Shape& in) const override;
  std::string describe() const override;
  void collect(const std::string& prefix, StateRefs<T>& out) override;
  void initialize(Rng& rng) override;
  void summarize(const std::string& prefix, const Shape& in,
                 std::vector<std::string>& lines) const override;

  Sequential<T>& main_path() { return *main_; }
  bool has_projection() const { return skip_ != nullptr; }

 private:
  std::unique_ptr<Sequential<T>> main_;
  std::unique_ptr<Sequential<T>> skip_;
};

}  // namespace wafer::zoo
