#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wafer/zoo/layers.hpp"

namespace wafer::zoo {

enum class ArchId { BaseNet, BaseNet8, BaseNet8Plus, IncNet, ResiNet, VGG16 };

inline constexpr ArchId kAllArchs[] = {ArchId::BaseNet, ArchId::BaseNet8, ArchId::BaseNet8Plus,
                                       ArchId::IncNet,  ArchId::ResiNet,  ArchId::VGG16};

std::string_view arch_name(ArchId arch);
/// Case-insensitive; throws ConfigError for unknown names.
ArchId parse_arch(std::string_view name);
/// Throws ConfigError when `res` cannot be used with `arch`.
void check_resolution(ArchId arch, int res);
/// Input channels the architecture expects (3 for VGG16, 1 otherwise).
std::size_t input_channels(ArchId arch);

/// A layer graph plus its input contract. Parameters are renamed to unique
/// dotted paths on construction; the model owns every layer.
template <typename T>
class Model {
 public:
  using Var = typename GradTape<T>::Var;
  using State = std::vector<Tensor<T>>;

  Model(std::string name, Shape input_shape, std::unique_ptr<Sequential<T>> body);

  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const std::string& name() const { return name_; }
  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return output_shape_; }

  /// Forward over a batch [N, ...input_shape]; throws DimensionError otherwise.
  Var forward(GradTape<T>& tape, Var x, Mode mode);

  const std::vector<Parameter<T>*>& parameters() const { return state_.params; }
  const std::vector<NamedBuffer<T>>& buffers() const { return state_.buffers; }
  void zero_grad();

  /// Re-draws all weights from `seed` (Kaiming uniform, zero biases).
  void initialize(std::uint64_t seed);

  /// Every parameter value followed by every buffer, in registration order.
  State snapshot() const;
  void restore(const State& state);

  /// Copies values from a structurally identical model of another precision.
  template <typename U>
  void copy_state_from(const Model<U>& other);

  std::vector<std::string> summary() const;
  Sequential<T>& body() { return *body_; }

  std::optional<ArchId> arch;
  /// Default TrainConfig for this model enables the multi-step schedule.
  bool multistep_default = false;

 private:
  std::string name_;
  Shape input_shape_;
  Shape output_shape_;
  std::unique_ptr<Sequential<T>> body_;
  StateRefs<T> state_;
};

template <typename T>
template <typename U>
void Model<T>::copy_state_from(const Model<U>& other) {
  const auto& src_p = other.parameters();
  const auto& src_b = other.buffers();
  if (src_p.size() != state_.params.size() || src_b.size() != state_.buffers.size()) {
    throw DimensionError("copy_state_from: models differ in structure");
  }
  for (std::size_t i = 0; i < src_p.size(); ++i) {
    if (src_p[i]->value.shape() != state_.params[i]->value.shape()) {
      throw DimensionError("copy_state_from: shape mismatch at " + state_.params[i]->name);
    }
    state_.params[i]->value = src_p[i]->value.template cast<T>();
  }
  for (std::size_t i = 0; i < src_b.size(); ++i) {
    *state_.buffers[i].tensor = src_b[i].tensor->template cast<T>();
  }
}

/// Builds one of the documented architectures and initializes it from `seed`.
template <typename T>
Model<T> build_model(ArchId arch, int num_classes, int input_res, std::uint64_t seed = 0);

/// Sum of element counts over trainable parameters.
template <typename T>
std::size_t count_params(const Model<T>& model);

template <typename T>
struct Prediction {
  Tensor<T> logits;
  std::vector<int> classes;
};

/// Row-wise argmax, first index on ties.
template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& logits);

/// Eval-mode forward without gradient recording. Large batches are processed
/// in chunks; results are identical to a single pass.
template <typename T>
Prediction<T> predict(Model<T>& model, const Tensor<T>& batch);

extern template class Model<float>;
extern template class Model<double>;

}  // namespace wafer::zoo
