#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <unordered_map>
#include <vector>

#include "wafer/core/ops.hpp"
#include "wafer/core/tensor.hpp"

namespace wafer::core {

/// Reverse-mode recorder. Every op appends one node holding its output value
/// and a closure that pushes the output gradient onto its inputs; backward()
/// walks the nodes in exact reverse order of execution.
///
/// A non-recording tape (inference) keeps values but no closures or saved
/// intermediates, and refuses backward().
template <typename T>
class GradTape {
 public:
  struct Var {
    std::size_t id = std::numeric_limits<std::size_t>::max();
  };

  explicit GradTape(bool record = true) : record_(record) {}

  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Leaf holding data (e.g. an input batch). Receives a gradient slot.
  Var input(Tensor<T> value);

  /// Leaf bound to a parameter. Repeated calls return the same slot, so a
  /// parameter used several times accumulates into one gradient. The leaf
  /// reads the parameter's storage directly; do not mutate it mid-pass.
  Var parameter(Parameter<T>& p);

  Var conv2d(Var x, Var kernel, Var bias, int stride, int pad);
  Var maxpool2d(Var x, int window, int stride);
  Var batchnorm2d(Var x, Var gamma, Var beta, T eps, ops::Mode mode, ops::RunningStats<T>& stats);
  Var dense(Var x, Var weight, Var bias);
  Var activation(Var x, ops::Activation kind);
  Var add(Var a, Var b);
  Var scale(Var x, T factor);
  Var concat_channels(std::span<const Var> parts);
  Var global_avg_pool(Var x);
  Var upsample2x(Var x);
  Var reshape(Var x, Shape shape);
  Var sum(Var x);
  /// Scalar mean cross-entropy; the softmax probabilities are kept as aux().
  Var softmax_cross_entropy(Var logits, std::span<const int> labels);
  Var mse(Var pred, const Tensor<T>& target);

  const Tensor<T>& value(Var v) const {
    const Node& n = node(v);
    return n.param != nullptr ? n.param->value : n.value;
  }
  const Tensor<T>& grad(Var v) const { return node(v).grad; }
  const Tensor<T>& aux(Var v) const { return node(v).aux; }

  /// Seeds d(loss)/d(loss) = 1 and propagates. Parameter slots are added into
  /// Parameter::gradient. Throws StateError without a recorded forward.
  void backward(Var loss);

  /// Piecewise choices made during a forward pass: activation regions
  /// (0 below, 1 inside, 2 above the clamp) and pooling argmaxes, in op order.
  struct Decisions {
    std::vector<std::vector<std::uint8_t>> regions;
    std::vector<std::vector<std::uint32_t>> argmax;
  };

  /// Keeps a copy of every decision made from now on.
  void record_decisions() { log_decisions_ = true; }
  const Decisions& decisions() const noexcept { return decisions_; }

  /// Makes activation and pooling ops reuse `d` instead of deciding afresh,
  /// so the forward pass stays on one linear piece (finite-difference checks
  /// across kinks). Only for non-recording tapes.
  void replay_decisions(Decisions d);

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    Tensor<T> aux;
    Parameter<T>* param = nullptr;
    std::function<void(GradTape&, const Tensor<T>&)> backward;
  };

  Node& node(Var v);
  const Node& node(Var v) const;
  Var push(Tensor<T> value, const char* op);
  void accumulate(Var v, const Tensor<T>& g);

  bool record_;
  bool consumed_ = false;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::size_t> param_slots_;
  bool log_decisions_ = false;
  bool replay_ = false;
  std::size_t next_region_ = 0;
  std::size_t next_argmax_ = 0;
  Decisions decisions_;
};

extern template class GradTape<float>;
extern template class GradTape<double>;

}  // namespace wafer::core
