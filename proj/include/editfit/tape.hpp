#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "editfit/feature_map.hpp"
#include "editfit/tensor.hpp"

namespace editfit {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t index = 0;
};

/// Handle to a parameter registered on a Tape.
struct ParamRef {
  std::size_t index = 0;
};

/// Gradients keyed by parameter name.
template <typename T>
using Gradients = std::map<std::string, std::vector<T>>;

/// Records one forward pass and replays it backwards.
///
/// Parameters are borrowed: the registered tensors must outlive the tape. Every
/// operation stores its inputs by index, so backprop visits nodes in exact reverse
/// execution order and accumulates gradients additively at fan-out. A tape can be
/// back-propagated once.
template <typename T>
class Tape {
 public:
  Var input(FeatureMap<T> value);
  ParamRef parameter(const NamedTensor<T>& tensor);

  Var conv1x1(Var x, ParamRef weight, ParamRef bias);
  /// Depth-wise k x k convolution, replicate padding; k is taken from the kernel shape.
  Var dwconv(Var x, ParamRef kernel, ParamRef bias);
  Var sine(Var x, T omega);
  Var relu(Var x);
  Var concat(Var a, Var b);
  Var add(Var a, Var b);
  Var fourier_encode(Var x, int bands);
  /// Mean absolute error against a constant target; produces a 1x1x1 scalar node.
  Var l1_loss(Var prediction, const FeatureMap<T>& target);

  const FeatureMap<T>& value(Var v) const { return nodes_.at(v.index).value; }
  T scalar(Var v) const;

  /// Back-propagates `seed * d(loss)` and returns gradients for every registered parameter.
  Gradients<T> backprop(Var loss, T seed = T(1));

  /// Gradient of the last backprop with respect to a recorded value.
  const FeatureMap<T>& grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op { Input, Conv1x1, DwConv, Sine, Relu, Concat, Add, Fourier, L1 };

  struct Node {
    Op op = Op::Input;
    std::size_t a = 0;
    std::size_t b = 0;
    std::size_t weight = 0;
    std::size_t bias = 0;
    T omega = T(0);
    int extra = 0;
    FeatureMap<T> value;
    FeatureMap<T> target;  // L1 only
  };

  Var push(Node node);
  const NamedTensor<T>& param(ParamRef p) const;
  void check_var(Var v) const;

  std::vector<Node> nodes_;
  std::vector<const NamedTensor<T>*> params_;
  std::vector<FeatureMap<T>> grads_;
  bool consumed_ = false;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace editfit
