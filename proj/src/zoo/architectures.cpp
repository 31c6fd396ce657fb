// Layer plans for every architecture. Channel widths and FC sizes are module
// decisions; only VGG16 follows a published canonical configuration.

#include <array>

#include "wafer/zoo/model.hpp"

namespace wafer::zoo {
namespace {

template <typename T>
using Seq = Sequential<T>;

template <typename T>
void conv_act(Seq<T>& s, std::size_t cin, std::size_t cout, std::size_t k, Activation act,
              bool batchnorm = false) {
  s.template emplace<Conv2d<T>>(cin, cout, k, 1, static_cast<int>(k / 2));
  if (batchnorm) s.template emplace<BatchNorm2d<T>>(cout);
  s.template emplace<Act<T>>(act);
}

template <typename T>
std::unique_ptr<Seq<T>> basenet(std::size_t classes, std::size_t res) {
  auto s = std::make_unique<Seq<T>>();
  conv_act(*s, 1, 8, 5, Activation::relu);
  s->template emplace<MaxPool2d<T>>(2, 2);
  conv_act(*s, 8, 8, 5, Activation::relu);
  s->template emplace<MaxPool2d<T>>(2, 2);
  s->template emplace<Flatten<T>>();
  s->template emplace<Dense<T>>(8 * (res / 4) * (res / 4), 256);
  s->template emplace<Act<T>>(Activation::relu);
  s->template emplace<Dense<T>>(256, classes);
  return s;
}

// Pools after a conv only while the map is still larger than 1x1, so the
// plan also fits inputs below 256.
template <typename T>
std::unique_ptr<Seq<T>> basenet8(std::size_t classes, std::size_t res, bool plus) {
  constexpr std::array<std::size_t, 8> widths{8, 16, 32, 64, 128, 256, 512, 512};
  const Activation act = plus ? Activation::relu6 : Activation::relu;
  auto s = std::make_unique<Seq<T>>();
  std::size_t cin = 1, spatial = res;
  for (std::size_t w : widths) {
    conv_act(*s, cin, w, 3, act, plus);
    if (spatial > 1) {
      s->template emplace<MaxPool2d<T>>(2, 2);
      spatial /= 2;
    }
    cin = w;
  }
  s->template emplace<Flatten<T>>();
  s->template emplace<Dense<T>>(512 * spatial * spatial, 256);
  s->template emplace<Act<T>>(act);
  s->template emplace<Dense<T>>(256, classes);
  return s;
}

template <typename T>
std::unique_ptr<InceptionBlock<T>> inception(std::size_t cin, std::size_t width) {
  const std::size_t w = width / 4;
  std::vector<std::unique_ptr<Seq<T>>> paths;
  for (std::size_t k : {1, 3, 5}) {
    auto p = std::make_unique<Seq<T>>();
    conv_act(*p, cin, w, k, Activation::relu);
    paths.push_back(std::move(p));
  }
  auto p = std::make_unique<Seq<T>>();
  conv_act(*p, cin, w, 9, Activation::relu);
  conv_act(*p, w, w, 9, Activation::relu);
  paths.push_back(std::move(p));
  return std::make_unique<InceptionBlock<T>>(std::move(paths));
}

template <typename T>
std::unique_ptr<Seq<T>> incnet(std::size_t classes) {
  constexpr std::array<std::size_t, 4> widths{32, 64, 128, 256};
  auto s = std::make_unique<Seq<T>>();
  conv_act(*s, 1, 16, 3, Activation::relu);
  s->template emplace<MaxPool2d<T>>(2, 2);
  std::size_t cin = 16;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i > 0) s->template emplace<MaxPool2d<T>>(2, 2);
    s->push(inception<T>(cin, widths[i]));
    cin = widths[i];
  }
  s->template emplace<GlobalAvgPool<T>>();
  s->template emplace<Dense<T>>(cin, classes);
  return s;
}

template <typename T>
std::unique_ptr<ResidualBlock<T>> residual(std::size_t cin, std::size_t width) {
  auto main = std::make_unique<Seq<T>>();
  conv_act(*main, cin, width, 3, Activation::relu);
  main->template emplace<Conv2d<T>>(width, width, 3, 1, 1);
  std::unique_ptr<Seq<T>> skip;
  if (cin != width) {
    skip = std::make_unique<Seq<T>>();
    skip->template emplace<Conv2d<T>>(cin, width, 1, 1, 0);
  }
  return std::make_unique<ResidualBlock<T>>(std::move(main), std::move(skip));
}

// Downsampling uses pool2 between blocks: a stride-2 3x3 pad-1 conv on an
// even map leaves a remainder, which conv2d rejects.
template <typename T>
std::unique_ptr<Seq<T>> resinet(std::size_t classes) {
  constexpr std::array<std::size_t, 4> widths{16, 32, 64, 128};
  auto s = std::make_unique<Seq<T>>();
  conv_act(*s, 1, 16, 3, Activation::relu);
  s->template emplace<MaxPool2d<T>>(2, 2);
  std::size_t cin = 16;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i > 0) s->template emplace<MaxPool2d<T>>(2, 2);
    s->push(residual<T>(cin, widths[i]));
    cin = widths[i];
  }
  s->template emplace<GlobalAvgPool<T>>();
  s->template emplace<Dense<T>>(cin, classes);
  return s;
}

template <typename T>
std::unique_ptr<Seq<T>> vgg16(std::size_t classes) {
  constexpr int M = 0;
  constexpr std::array<int, 18> plan{64,  64,  M,   128, 128, M,   256, 256, 256,
                                     M,   512, 512, 512, M,   512, 512, 512, M};
  auto s = std::make_unique<Seq<T>>();
  std::size_t cin = 3;
  for (int c : plan) {
    if (c == M) {
      s->template emplace<MaxPool2d<T>>(2, 2);
    } else {
      conv_act(*s, cin, static_cast<std::size_t>(c), 3, Activation::relu);
      cin = static_cast<std::size_t>(c);
    }
  }
  s->template emplace<Flatten<T>>();
  s->template emplace<Dense<T>>(512 * 7 * 7, 4096);
  s->template emplace<Act<T>>(Activation::relu);
  s->template emplace<Dense<T>>(4096, 4096);
  s->template emplace<Act<T>>(Activation::relu);
  s->template emplace<Dense<T>>(4096, classes);
  return s;
}

}  // namespace

template <typename T>
Model<T> build_model(ArchId arch, int num_classes, int input_res, std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("num_classes must be at least 2, got " + std::to_string(num_classes));
  check_resolution(arch, input_res);
  const auto classes = static_cast<std::size_t>(num_classes);
  const auto res = static_cast<std::size_t>(input_res);
  std::unique_ptr<Seq<T>> body;
  switch (arch) {
    case ArchId::BaseNet: body = basenet<T>(classes, res); break;
    case ArchId::BaseNet8: body = basenet8<T>(classes, res, false); break;
    case ArchId::BaseNet8Plus: body = basenet8<T>(classes, res, true); break;
    case ArchId::IncNet: body = incnet<T>(classes); break;
    case ArchId::ResiNet: body = resinet<T>(classes); break;
    case ArchId::VGG16: body = vgg16<T>(classes); break;
  }
  Model<T> model(std::string(arch_name(arch)), Shape{input_channels(arch), res, res}, std::move(body));
  model.arch = arch;
  model.multistep_default = arch == ArchId::BaseNet8Plus;
  model.initialize(seed);
  return model;
}

template Model<float> build_model(ArchId, int, int, std::uint64_t);
template Model<double> build_model(ArchId, int, int, std::uint64_t);

}  // namespace wafer::zoo
