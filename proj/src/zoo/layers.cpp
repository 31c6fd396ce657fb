#include "wafer/zoo/layers.hpp"

#include <cmath>
#include <sstream>

namespace wafer::zoo {
namespace {

std::string join(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

template <typename T>
void register_param(const std::string& prefix, const char* local, Parameter<T>& p,
                    StateRefs<T>& out) {
  p.name = join(prefix, local);
  out.params.push_back(&p);
}

// He-uniform: U(-b, b) with b = sqrt(6 / fan_in).
template <typename T>
void kaiming_uniform(Tensor<T>& w, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  fill_uniform(w.data(), w.size(), -bound, bound, rng.next());
}

Shape require_image(const Shape& in, const char* what) {
  if (in.size() != 3) {
    throw DimensionError(std::string(what) + " expects a [C,H,W] feature map, got " +
                         core::shape_str(in));
  }
  return in;
}

}  // namespace

template <typename T>
void Layer<T>::summarize(const std::string& prefix, const Shape& in,
                         std::vector<std::string>& lines) const {
  lines.push_back(prefix + "  " + describe() + "  -> " + core::shape_str(output_shape(in)));
}

// --- Conv2d -----------------------------------------------------------------

template <typename T>
Conv2d<T>::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, int stride,
                  int pad)
    : in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      weight_("weight", Tensor<T>(Shape{out_channels, in_channels, kernel, kernel})),
      bias_("bias", Tensor<T>(Shape{out_channels})) {}

template <typename T>
typename Conv2d<T>::Var Conv2d<T>::forward(GradTape<T>& tape, Var x, Mode) {
  return tape.conv2d(x, tape.parameter(weight_), tape.parameter(bias_), stride_, pad_);
}

template <typename T>
Shape Conv2d<T>::output_shape(const Shape& in) const {
  require_image(in, "conv2d");
  if (in[0] != in_) {
    throw DimensionError("conv2d expects " + std::to_string(in_) + " input channels (axis 0), got " +
                         std::to_string(in[0]));
  }
  return {out_, core::ops::conv_out_size(in[1], kernel_, stride_, pad_, "height"),
          core::ops::conv_out_size(in[2], kernel_, stride_, pad_, "width")};
}

template <typename T>
std::string Conv2d<T>::describe() const {
  std::ostringstream s;
  s << "conv " << in_ << "->" << out_ << " " << kernel_ << "x" << kernel_ << " stride " << stride_
    << " pad " << pad_;
  return s.str();
}

template <typename T>
void Conv2d<T>::collect(const std::string& prefix, StateRefs<T>& out) {
  register_param(prefix, "weight", weight_, out);
  register_param(prefix, "bias", bias_, out);
}

template <typename T>
void Conv2d<T>::initialize(Rng& rng) {
  kaiming_uniform(weight_.value, in_ * kernel_ * kernel_, rng);
  bias_.value.fill(T{0});
}

// --- BatchNorm2d --------------------------------------------------------------

template <typename T>
BatchNorm2d<T>::BatchNorm2d(std::size_t channels)
    : channels_(channels),
      gamma_("gamma", Tensor<T>(Shape{channels}, T{1})),
      beta_("beta", Tensor<T>(Shape{channels}, T{0})),
      stats_(channels) {}

template <typename T>
typename BatchNorm2d<T>::Var BatchNorm2d<T>::forward(GradTape<T>& tape, Var x, Mode mode) {
  return tape.batchnorm2d(x, tape.parameter(gamma_), tape.parameter(beta_),
                          static_cast<T>(core::ops::kBatchNormEps), mode, stats_);
}

template <typename T>
Shape BatchNorm2d<T>::output_shape(const Shape& in) const {
  require_image(in, "batchnorm2d");
  if (in[0] != channels_) {
    throw DimensionError("batchnorm2d expects " + std::to_string(channels_) +
                         " channels (axis 0), got " + std::to_string(in[0]));
  }
  return in;
}

template <typename T>
std::string BatchNorm2d<T>::describe() const {
  return "batchnorm " + std::to_string(channels_);
}

template <typename T>
void BatchNorm2d<T>::collect(const std::string& prefix, StateRefs<T>& out) {
  register_param(prefix, "gamma", gamma_, out);
  register_param(prefix, "beta", beta_, out);
  out.buffers.push_back({join(prefix, "running_mean"), &stats_.mean});
  out.buffers.push_back({join(prefix, "running_var"), &stats_.var});
}

// --- simple layers ------------------------------------------------------------

template <typename T>
std::string Act<T>::describe() const {
  return kind_ == Activation::relu ? "relu" : "relu6";
}

template <typename T>
Shape MaxPool2d<T>::output_shape(const Shape& in) const {
  require_image(in, "maxpool2d");
  if (static_cast<std::size_t>(window_) > in[1] || static_cast<std::size_t>(window_) > in[2]) {
    throw DimensionError("maxpool2d window " + std::to_string(window_) + " larger than " +
                         core::shape_str(in));
  }
  const auto w = static_cast<std::size_t>(window_);
  return {in[0], core::ops::conv_out_size(in[1], w, stride_, 0, "height"),
          core::ops::conv_out_size(in[2], w, stride_, 0, "width")};
}

template <typename T>
std::string MaxPool2d<T>::describe() const {
  return "maxpool " + std::to_string(window_) + "x" + std::to_string(window_) + " stride " +
         std::to_string(stride_);
}

template <typename T>
typename Flatten<T>::Var Flatten<T>::forward(GradTape<T>& tape, Var x, Mode) {
  const Shape& s = tape.value(x).shape();
  return tape.reshape(x, Shape{s[0], tape.value(x).size() / s[0]});
}

template <typename T>
typename Reshape<T>::Var Reshape<T>::forward(GradTape<T>& tape, Var x, Mode) {
  Shape s{tape.value(x).dim(0)};
  s.insert(s.end(), shape_.begin(), shape_.end());
  return tape.reshape(x, std::move(s));
}

template <typename T>
Shape Reshape<T>::output_shape(const Shape& in) const {
  if (core::shape_size(in) != core::shape_size(shape_)) {
    throw DimensionError("reshape " + core::shape_str(in) + " to " + core::shape_str(shape_));
  }
  return shape_;
}

template <typename T>
Dense<T>::Dense(std::size_t in_features, std::size_t out_features)
    : in_(in_features),
      out_(out_features),
      weight_("weight", Tensor<T>(Shape{out_features, in_features})),
      bias_("bias", Tensor<T>(Shape{out_features})) {}

template <typename T>
typename Dense<T>::Var Dense<T>::forward(GradTape<T>& tape, Var x, Mode) {
  return tape.dense(x, tape.parameter(weight_), tape.parameter(bias_));
}

template <typename T>
Shape Dense<T>::output_shape(const Shape& in) const {
  if (in.size() != 1 || in[0] != in_) {
    throw DimensionError("dense expects [" + std::to_string(in_) + "] features, got " +
                         core::shape_str(in));
  }
  return {out_};
}

template <typename T>
std::string Dense<T>::describe() const {
  return "dense " + std::to_string(in_) + "->" + std::to_string(out_);
}

template <typename T>
void Dense<T>::collect(const std::string& prefix, StateRefs<T>& out) {
  register_param(prefix, "weight", weight_, out);
  register_param(prefix, "bias", bias_, out);
}

template <typename T>
void Dense<T>::initialize(Rng& rng) {
  kaiming_uniform(weight_.value, in_, rng);
  bias_.value.fill(T{0});
}

template <typename T>
Shape GlobalAvgPool<T>::output_shape(const Shape& in) const {
  require_image(in, "global_avg_pool");
  return {in[0]};
}

template <typename T>
Shape Upsample2x<T>::output_shape(const Shape& in) const {
  require_image(in, "upsample2x");
  return {in[0], in[1] * 2, in[2] * 2};
}

template <typename T>
std::string Scale<T>::describe() const {
  std::ostringstream s;
  s << "scale x" << factor_;
  return s.str();
}

// --- containers -----------------------------------------------------------------

template <typename T>
typename Sequential<T>::Var Sequential<T>::forward(GradTape<T>& tape, Var x, Mode mode) {
  for (auto& layer : layers_) x = layer->forward(tape, x, mode);
  return x;
}

template <typename T>
Shape Sequential<T>::output_shape(const Shape& in) const {
  Shape s = in;
  for (const auto& layer : layers_) s = layer->output_shape(s);
  return s;
}

template <typename T>
std::string Sequential<T>::describe() const {
  return "sequential(" + std::to_string(layers_.size()) + ")";
}

template <typename T>
void Sequential<T>::collect(const std::string& prefix, StateRefs<T>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->collect(join(prefix, std::to_string(i)), out);
  }
}

template <typename T>
void Sequential<T>::initialize(Rng& rng) {
  for (auto& layer : layers_) layer->initialize(rng);
}

template <typename T>
void Sequential<T>::summarize(const std::string& prefix, const Shape& in,
                              std::vector<std::string>& lines) const {
  Shape s = in;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->summarize(join(prefix, std::to_string(i)), s, lines);
    s = layers_[i]->output_shape(s);
  }
}

template <typename T>
typename InceptionBlock<T>::Var InceptionBlock<T>::forward(GradTape<T>& tape, Var x, Mode mode) {
  std::vector<Var> outs;
  outs.reserve(paths_.size());
  for (auto& path : paths_) outs.push_back(path->forward(tape, x, mode));
  return tape.concat_channels(outs);
}

template <typename T>
Shape InceptionBlock<T>::output_shape(const Shape& in) const {
  Shape total;
  for (const auto& path : paths_) {
    const Shape s = path->output_shape(in);
    if (total.empty()) {
      total = s;
    } else {
      if (s[1] != total[1] || s[2] != total[2]) {
        throw DimensionError("inception paths disagree on spatial size: " + core::shape_str(s) +
                             " vs " + core::shape_str(total));
      }
      total[0] += s[0];
    }
  }
  return total;
}

template <typename T>
std::string InceptionBlock<T>::describe() const {
  return "inception(" + std::to_string(paths_.size()) + " paths)";
}

template <typename T>
void InceptionBlock<T>::collect(const std::string& prefix, StateRefs<T>& out) {
  for (std::size_t i = 0; i < paths_.size(); ++i) {
    paths_[i]->collect(join(prefix, "path" + std::to_string(i + 1)), out);
  }
}

template <typename T>
void InceptionBlock<T>::initialize(Rng& rng) {
  for (auto& path : paths_) path->initialize(rng);
}

template <typename T>
void InceptionBlock<T>::summarize(const std::string& prefix, const Shape& in,
                                  std::vector<std::string>& lines) const {
  Layer<T>::summarize(prefix, in, lines);
  for (std::size_t i = 0; i < paths_.size(); ++i) {
    paths_[i]->summarize(join(prefix, "path" + std::to_string(i + 1)), in, lines);
  }
}

template <typename T>
typename ResidualBlock<T>::Var ResidualBlock<T>::forward(GradTape<T>& tape, Var x, Mode mode) {
  Var main = main_->forward(tape, x, mode);
  Var skip = skip_ ? skip_->forward(tape, x, mode) : x;
  return tape.activation(tape.add(main, skip), Activation::relu);
}

template <typename T>
Shape ResidualBlock<T>::output_shape(const Shape& in) const {
  const Shape main = main_->output_shape(in);
  const Shape skip = skip_ ? skip_->output_shape(in) : in;
  if (main != skip) {
    throw DimensionError("residual paths disagree: main " + core::shape_str(main) + " vs skip " +
                         core::shape_str(skip));
  }
  return main;
}

template <typename T>
std::string ResidualBlock<T>::describe() const {
  return skip_ ? "residual (projection skip)" : "residual (identity skip)";
}

template <typename T>
void ResidualBlock<T>::collect(const std::string& prefix, StateRefs<T>& out) {
  main_->collect(join(prefix, "main"), out);
  if (skip_) skip_->collect(join(prefix, "skip"), out);
}

template <typename T>
void ResidualBlock<T>::initialize(Rng& rng) {
  main_->initialize(rng);
  if (skip_) skip_->initialize(rng);
}

template <typename T>
void ResidualBlock<T>::summarize(const std::string& prefix, const Shape& in,
                                 std::vector<std::string>& lines) const {
  Layer<T>::summarize(prefix, in, lines);
  main_->summarize(join(prefix, "main"), in, lines);
  if (skip_) skip_->summarize(join(prefix, "skip"), in, lines);
}

#define WAFER_INSTANTIATE_LAYERS(T) \
  template class Layer<T>;          \
  template class Conv2d<T>;         \
  template class BatchNorm2d<T>;    \
  template class Act<T>;            \
  template class MaxPool2d<T>;      \
  template class Flatten<T>;        \
  template class Reshape<T>;        \
  template class Dense<T>;          \
  template class GlobalAvgPool<T>;  \
  template class Upsample2x<T>;     \
  template class Scale<T>;          \
  template class Sequential<T>;     \
  template class InceptionBlock<T>; \
  template class ResidualBlock<T>;

WAFER_INSTANTIATE_LAYERS(float)
WAFER_INSTANTIATE_LAYERS(double)

#undef WAFER_INSTANTIATE_LAYERS

}  // namespace wafer::zoo
