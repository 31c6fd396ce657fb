#include "wafer/zoo/model.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

namespace wafer::zoo {

std::string_view arch_name(ArchId arch) {
  switch (arch) {
    case ArchId::BaseNet: return "BaseNet";
    case ArchId::BaseNet8: return "BaseNet8";
    case ArchId::BaseNet8Plus: return "BaseNet8Plus";
    case ArchId::IncNet: return "IncNet";
    case ArchId::ResiNet: return "ResiNet";
    case ArchId::VGG16: return "VGG16";
  }
  return "?";
}

ArchId parse_arch(std::string_view name) {
  auto lower = [](std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
  };
  const std::string key = lower(name);
  for (ArchId a : kAllArchs) {
    if (lower(arch_name(a)) == key) return a;
  }
  throw ConfigError("unknown architecture '" + std::string(name) + "'");
}

std::size_t input_channels(ArchId arch) { return arch == ArchId::VGG16 ? 3 : 1; }

void check_resolution(ArchId arch, int res) {
  const std::string where = std::string(arch_name(arch)) + " at resolution " + std::to_string(res);
  if (res <= 0) throw ConfigError(where + ": resolution must be positive");
  switch (arch) {
    case ArchId::BaseNet:
      if (res % 4 != 0) throw ConfigError(where + ": needs a multiple of 4");
      return;
    case ArchId::BaseNet8:
    case ArchId::BaseNet8Plus:
      if (res < 2 || (res & (res - 1)) != 0) throw ConfigError(where + ": needs a power of two");
      return;
    case ArchId::IncNet:
    case ArchId::ResiNet:
      if (res % 16 != 0) throw ConfigError(where + ": needs a multiple of 16");
      return;
    case ArchId::VGG16:
      if (res != 224) throw ConfigError(where + ": VGG16 is fixed at 224");
      return;
  }
}

template <typename T>
Model<T>::Model(std::string name, Shape input_shape, std::unique_ptr<Sequential<T>> body)
    : name_(std::move(name)), input_shape_(std::move(input_shape)), body_(std::move(body)) {
  output_shape_ = body_->output_shape(input_shape_);
  body_->collect("", state_);
  std::vector<std::string> names;
  for (auto* p : state_.params) names.push_back(p->name);
  for (auto& b : state_.buffers) names.push_back(b.name);
  std::sort(names.begin(), names.end());
  if (auto it = std::adjacent_find(names.begin(), names.end()); it != names.end()) {
    throw StateError("duplicate tensor name '" + *it + "' in model " + name_);
  }
}

template <typename T>
typename Model<T>::Var Model<T>::forward(GradTape<T>& tape, Var x, Mode mode) {
  const Shape& s = tape.value(x).shape();
  if (s.size() != input_shape_.size() + 1 || !std::equal(input_shape_.begin(), input_shape_.end(),
                                                         s.begin() + 1)) {
    throw DimensionError(name_ + " expects input [N]" + shape_str(input_shape_) + ", got " +
                         shape_str(s));
  }
  return body_->forward(tape, x, mode);
}

template <typename T>
void Model<T>::zero_grad() {
  for (auto* p : state_.params) p->zero_grad();
}

template <typename T>
void Model<T>::initialize(std::uint64_t seed) {
  Rng rng(seed);
  body_->initialize(rng);
}

template <typename T>
typename Model<T>::State Model<T>::snapshot() const {
  State out;
  out.reserve(state_.params.size() + state_.buffers.size());
  for (auto* p : state_.params) out.push_back(p->value);
  for (auto& b : state_.buffers) out.push_back(*b.tensor);
  return out;
}

template <typename T>
void Model<T>::restore(const State& state) {
  if (state.size() != state_.params.size() + state_.buffers.size()) {
    throw StateError("snapshot does not belong to model " + name_);
  }
  std::size_t i = 0;
  for (auto* p : state_.params) p->value = state[i++];
  for (auto& b : state_.buffers) *b.tensor = state[i++];
}

template <typename T>
std::vector<std::string> Model<T>::summary() const {
  std::vector<std::string> lines;
  lines.push_back(name_ + "  input " + shape_str(input_shape_));
  body_->summarize("", input_shape_, lines);
  lines.push_back("params " + std::to_string(count_params(*this)));
  return lines;
}

template <typename T>
std::size_t count_params(const Model<T>& model) {
  std::size_t n = 0;
  for (const auto* p : model.parameters()) {
    if (p->trainable) n += p->value.size();
  }
  return n;
}

template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& logits) {
  if (logits.rank() != 2) throw DimensionError("argmax_rows expects [N,C], got " + shape_str(logits.shape()));
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = logits.data() + i * c;
    out[i] = static_cast<int>(std::max_element(row, row + c) - row);
  }
  return out;
}

template <typename T>
Prediction<T> predict(Model<T>& model, const Tensor<T>& batch) {
  constexpr std::size_t kChunk = 32;
  if (batch.rank() == 0) throw DimensionError("predict on an empty batch");
  const std::size_t n = batch.dim(0);
  const std::size_t per = batch.size() / n;
  const std::size_t classes = shape_size(model.output_shape());
  std::vector<T> logits(n * classes);
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t m = std::min(kChunk, n - start);
    Shape s = batch.shape();
    s[0] = m;
    std::vector<T> chunk(batch.data() + start * per, batch.data() + (start + m) * per);
    GradTape<T> tape(false);
    auto x = tape.input(Tensor<T>(std::move(s), std::move(chunk)));
    auto y = model.forward(tape, x, Mode::eval);
    const Tensor<T>& out = tape.value(y);
    std::copy(out.data(), out.data() + out.size(), logits.begin() + start * classes);
  }
  Prediction<T> p{Tensor<T>(Shape{n, classes}, std::move(logits)), {}};
  p.classes = argmax_rows(p.logits);
  return p;
}

template class Model<float>;
template class Model<double>;
template std::size_t count_params(const Model<float>&);
template std::size_t count_params(const Model<double>&);
template std::vector<int> argmax_rows(const Tensor<float>&);
template std::vector<int> argmax_rows(const Tensor<double>&);
template Prediction<float> predict(Model<float>&, const Tensor<float>&);
template Prediction<double> predict(Model<double>&, const Tensor<double>&);

}  // namespace wafer::zoo
