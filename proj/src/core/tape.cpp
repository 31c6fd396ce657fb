#include "wafer/core/tape.hpp"

#include <string>
#include <vector>

namespace wafer::core {

template <typename T>
typename GradTape<T>::Node& GradTape<T>::node(Var v) {
  if (v.id >= nodes_.size()) throw StateError("variable does not belong to this tape");
  return nodes_[v.id];
}

template <typename T>
const typename GradTape<T>::Node& GradTape<T>::node(Var v) const {
  if (v.id >= nodes_.size()) throw StateError("variable does not belong to this tape");
  return nodes_[v.id];
}

template <typename T>
typename GradTape<T>::Var GradTape<T>::push(Tensor<T> value, const char* op) {
  if (!value.all_finite()) throw NumericError(std::string(op) + " produced non-finite values");
  if (consumed_) throw StateError("tape already ran backward; record a new forward pass");
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, {}});
  return Var{nodes_.size() - 1};
}

template <typename T>
void GradTape<T>::accumulate(Var v, const Tensor<T>& g) {
  Node& n = nodes_[v.id];
  if (n.grad.empty()) {
    n.grad = g;
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
}

template <typename T>
void GradTape<T>::replay_decisions(Decisions d) {
  if (record_) throw StateError("decision replay needs a non-recording tape");
  decisions_ = std::move(d);
  replay_ = true;
  next_region_ = next_argmax_ = 0;
}

template <typename T>
typename GradTape<T>::Var GradTape<T>::input(Tensor<T> value) {
  return push(std::move(value), "input");
}

template <typename T>
typename GradTape<T>::Var GradTape<T>::parameter(Parameter<T>& p) {
  if (auto it = param_slots_.find(&p); it != param_slots_.end()) return Var{it->second};
  if (consumed_) throw StateError("tape already ran backward; record a new forward pass");
  nodes_.push_back(Node{{}, {}, {}, &p, {}});
  Var v{nodes_.size() - 1};
  param_slots_.emplace(&p, v.id);
  return v;
}

template <typename T>
typename GradTape<T>::Var GradTape<T>::conv2d(Var x, Var kernel, Var bias, int stride, int pad) {
  Var out = push(ops::conv2d(value(x), value(kernel), value(bias), stride, pad), "conv2d");
  if (record_) {
    nodes_[out.id].backward = [x, kernel, bias, stride, pad](GradTape& t, const Tensor<T>& g) {
      auto grads = ops::conv2d_backward(t.value(x), t.value(kernel), g, stride, pad);
      t.accumulate(x, grads.input);
      t.accumulate(kernel, grads.kernel);
      t.accumulate(bias, grads.bias);
    };
  }
  return out;
}

template <typename T>
typename GradTape<T>::Var GradTape<T>::maxpool2d(Var x, int window, int stride) {
  auto pooled = ops::maxpool2d(value(x), window, stride);
  if (replay_) {
    if (next_argmax_ >= decisions_.argmax.size()) throw StateError("replay ran out of pooling decisions");
    const auto& fixed = decisions_.argmax[next_argmax_++];
    if (fixed.size() != pooled.argmax.size()) throw StateError("replayed pooling shape differs");
    const Tensor<T>& in = value(x);
    for (std::size_t i = 0; i < fixed.size(); ++i) pooled.output[i] = in[fixed[i]];
    pooled.argmax = fixed;
  } else if (log_decisions_) {
    decisions_.argmax.push_back(pooled.argmax);
  }
  Var out = push(std::move(pooled.output), "maxpool2d");
  if (record_) {
    nodes_[out.id].backward = [x, argmax = std::move(pooled.argmax)](GradTape& t,
                                                                     const Tensor<T>& g) {
      t.accumulate(x, ops::maxpool2d_backward(g, argmax, t.value(x).shape()));
    };
  }
  return out;
}

template <typename T>
typename GradTape<T>::Var GradTape<T>::batchnorm2d(Var x, Var gamma, Var beta, T eps,
                                                   ops::Mode mode, ops::RunningStats<T>& stats) {
  ops::BatchNormCache<T> cache;
  Tensor<T> y = ops::batchnorm2d(value(x), value(gamma), value(beta), eps, mode, stats,
                                 record_ ? &cache : nullptr);
  Var out = push(std::move(y), "batchnorm2d");
  if (record_) {
    nodes_[out.id].backward = [x, gamma, beta, cache = std::move(cache)](GradTape& t,
                                                                         const Tensor<T>& g) {
      auto grads = ops::batchnorm2d_backward(g, t.value(gamma), cache);
      t.accumulate(x, grads.input);
      t.accumulate(gamma, grads.gamma);
      t.accumulate(beta, grads.beta);
    };
  }
  return out;
}

template <typename T>
typename GradTape<T>::Var GradTape<T>::dense(Var x, Var weight, Var bias) {
  Var out = push(ops::dense(value(x), value(weight), value(bias)), "dense");
  if (record_) {
    nodes_[out.id].backward = [x, weight, bias](GradTape& t, const Tensor<T>& g) {
      auto grads = ops::dense_backward(t.value(x), t.value(weight), g);
      t.accumulate(x, grads.input);
      t.accumulate(weight, grads.weight);
      t.accumulate(bias, grads.bias);
    };
  }
  return out;
}

template <typename T>
typename GradTape<T>::Var GradTape<T>::activation(Var x, ops::Activation kind) {
  const Tensor<T>& in = value(x);
  const T hi = kind == ops::Activation::relu6 ? T{6} : std::numeric_limits<T>::infinity();
  Tensor<T> y;
  if (replay_) {
    if (next_region_ >= decisions_.regions.size()) throw StateError("replay ran out of activation decisions");
    const auto& regions = decisions_.regions[next_region_++];
    if (regions.size() != in.size()) throw StateError("replayed activation shape differs");
    y = Tensor<T>(in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) {
      y[i] = regions[i] == 0 ? T{0} : (regions[i] == 1 ? in[i] : hi);
    }
  } else {
    if (log_decisions_) {
      std::vector<std::uint8_t> regions(in.size());
      for (std::size_t i = 0; i < in.size(); ++i) regions[i] = in[i] <= T{0} ? 0 : (in[i] < hi ? 1 : 2);
      decisions_.regions.push_back(std::move(regions));
    }
    y = ops::activation(in, kind);
  }
  Var out = push(std::move(y), "activation");
  if (record_) {
    nodes_[out.id].backward = [x, kind](GradTape& t, const Tensor<T>& g) {
      t.accumulate(x, ops::activation_backward(t.value(x), g, kind));
    };
  }
  return out;
}

template <typename T>
typename GradTape<T>::Var GradTape<T>::add(Var a, Var b) {
  Var out = push(ops::add(value(a), value(b)), "add");
  if (record_) {
    nodes_[out.id].backward = [a, b](GradTape& t, const Tensor<T>& g) {
      t.accumulate(a, g);
      t.accumulate(b, g);
    };
  }
  return out;
}

template <typename T>
typename GradTape<T>::Var GradTape<T>::scale(Var x, T factor) {
  Var out = push(ops::scale(value(x), factor), "scale");
  if (record_) {
    nodes_[out.id].backward = [x, factor](GradTape& t, const Tensor<T>& g) {
      t.accumulate(x, ops::scale(g, factor));
    };
  }
  return out;
}

template <typename T>
typename GradTape<T>::Var GradTape<T>::concat_channels(std::span<const Var> parts) {
  std::vector<const Tensor<T>*> values;
  std::vector<std::size_t> channels;
  for (Var p : parts) {
    values.push_back(&value(p));
    channels.push_back(value(p).shape().size() == 4 ? value(p).dim(1) : 0);
  }
  Var out = push(ops::concat_channels<T>(values), "concat_channels");
  if (record_) {
    nodes_[out.id].backward = [ids = std::vector<Var>(parts.begin(), parts.end()),
                               channels](GradTape& t, const Tensor<T>& g) {
      auto pieces = ops::split_channels(g, channels);
      for (std::size_t i = 0; i < ids.size(); ++i) t.accumulate(ids[i], pieces[i]);
    };
  }
  return out;
}

template <typename T>
typename GradTape<T>::Var GradTape<T>::global_avg_pool(Var x) {
  Var out = push(ops::global_avg_pool(value(x)), "global_avg_pool");
  if (record_) {
    nodes_[out.id].backward = [x](GradTape& t, const Tensor<T>& g) {
      t.accumulate(x, ops::global_avg_pool_backward(g, t.value(x).shape()));
    };
  }
  return out;
}

template <typename T>
typename GradTape<T>::Var GradTape<T>::upsample2x(Var x) {
  Var out = push(ops::upsample2x(value(x)), "upsample2x");
  if (record_) {
    nodes_[out.id].backward = [x](GradTape& t, const Tensor<T>& g) {
      t.accumulate(x, ops::upsample2x_backward(g));
    };
  }
  return out;
}

template <typename T>
typename GradTape<T>::Var GradTape<T>::reshape(Var x, Shape shape) {
  Var out = push(value(x).reshaped(std::move(shape)), "reshape");
  if (record_) {
    nodes_[out.id].backward = [x](GradTape& t, const Tensor<T>& g) {
      t.accumulate(x, g.reshaped(t.value(x).shape()));
    };
  }
  return out;
}

template <typename T>
typename GradTape<T>::Var GradTape<T>::sum(Var x) {
  T acc{0};
  for (T v : value(x).values()) acc += v;
  Var out = push(Tensor<T>(Shape{1}, std::vector<T>{acc}), "sum");
  if (record_) {
    nodes_[out.id].backward = [x](GradTape& t, const Tensor<T>& g) {
      t.accumulate(x, Tensor<T>(t.value(x).shape(), g[0]));
    };
  }
  return out;
}

template <typename T>
typename GradTape<T>::Var GradTape<T>::softmax_cross_entropy(Var logits, std::span<const int> labels) {
  auto r = ops::softmax_cross_entropy(value(logits), labels);
  Var out = push(Tensor<T>(Shape{1}, std::vector<T>{r.loss}), "softmax_cross_entropy");
  if (record_) {
    nodes_[out.id].backward = [logits, out, labels = std::vector<int>(labels.begin(), labels.end())](
                                  GradTape& t, const Tensor<T>& g) {
      Tensor<T> d = ops::softmax_cross_entropy_backward(t.aux(out), labels);
      t.accumulate(logits, ops::scale(d, g[0]));
    };
  }
  nodes_[out.id].aux = std::move(r.probs);
  return out;
}

template <typename T>
typename GradTape<T>::Var GradTape<T>::mse(Var pred, const Tensor<T>& target) {
  Var out = push(Tensor<T>(Shape{1}, std::vector<T>{ops::mse(value(pred), target)}), "mse");
  if (record_) {
    nodes_[out.id].backward = [pred, target](GradTape& t, const Tensor<T>& g) {
      t.accumulate(pred, ops::scale(ops::mse_backward(t.value(pred), target), g[0]));
    };
  }
  return out;
}

template <typename T>
void GradTape<T>::backward(Var loss) {
  if (!record_) throw StateError("backward on a non-recording tape");
  if (nodes_.empty() || loss.id >= nodes_.size()) {
    throw StateError("backward without a recorded forward pass");
  }
  if (consumed_) throw StateError("backward already ran on this tape");
  if (nodes_[loss.id].value.size() != 1) {
    throw StateError("backward needs a scalar loss, got " +
                     shape_str(nodes_[loss.id].value.shape()));
  }
  consumed_ = true;
  nodes_[loss.id].grad = Tensor<T>(Shape{1}, T{1});
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param != nullptr) {
      Tensor<T>& dst = n.param->gradient;
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += n.grad[k];
    }
  }
}

template class GradTape<float>;
template class GradTape<double>;

}  // namespace wafer::core
