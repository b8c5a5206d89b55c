#include "editfit/tape.hpp"

#include <cmath>
#include <string>

#include "editfit/errors.hpp"
#include "editfit/kernels.hpp"

namespace editfit {

namespace {

std::string dims(int c, int b, int h, int w) {
  return std::to_string(c) + "x" + std::to_string(b) + "x" + std::to_string(h) + "x" +
         std::to_string(w);
}

template <typename T>
std::string dims(const FeatureMap<T>& m) {
  return dims(m.channels, m.batch, m.height, m.width);
}

template <typename T>
void add_into(FeatureMap<T>& acc, const FeatureMap<T>& g) {
  if (acc.values.empty() && !g.values.empty()) {
    acc = g;
    return;
  }
  for (std::size_t i = 0; i < g.values.size(); ++i) acc.values[i] += g.values[i];
}

template <typename T>
void add_into(FeatureMap<T>& acc, FeatureMap<T>&& g) {
  if (acc.values.empty() && !g.values.empty()) {
    acc = std::move(g);
    return;
  }
  for (std::size_t i = 0; i < g.values.size(); ++i) acc.values[i] += g.values[i];
}

}  // namespace

template <typename T>
Var Tape<T>::push(Node node) {
  if (consumed_) throw StateError("tape already back-propagated; record a new forward pass");
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

template <typename T>
void Tape<T>::check_var(Var v) const {
  if (v.index >= nodes_.size()) throw StateError("value does not belong to this tape");
}

template <typename T>
const NamedTensor<T>& Tape<T>::param(ParamRef p) const {
  if (p.index >= params_.size()) throw StateError("parameter does not belong to this tape");
  return *params_[p.index];
}

template <typename T>
Var Tape<T>::input(FeatureMap<T> value) {
  Node n;
  n.op = Op::Input;
  n.value = std::move(value);
  return push(std::move(n));
}

template <typename T>
ParamRef Tape<T>::parameter(const NamedTensor<T>& tensor) {
  if (shape_size(tensor.shape) != tensor.values.size()) {
    throw ShapeError("parameter '" + tensor.name + "' declares shape " + shape_string(tensor.shape) +
                     " but holds " + std::to_string(tensor.values.size()) + " values");
  }
  params_.push_back(&tensor);
  return ParamRef{params_.size() - 1};
}

template <typename T>
Var Tape<T>::conv1x1(Var x, ParamRef weight, ParamRef bias) {
  check_var(x);
  const auto& in = nodes_[x.index].value;
  const auto& w = param(weight);
  const auto& b = param(bias);
  if (w.shape.size() != 2 || w.shape[1] != in.channels) {
    throw ShapeError("conv1x1 weight '" + w.name + "': expected [C_out x " +
                     std::to_string(in.channels) + "], got " + shape_string(w.shape));
  }
  if (b.shape != std::vector<int>{w.shape[0]}) {
    throw ShapeError("conv1x1 bias '" + b.name + "': expected [" + std::to_string(w.shape[0]) +
                     "], got " + shape_string(b.shape));
  }
  Node n;
  n.op = Op::Conv1x1;
  n.a = x.index;
  n.weight = weight.index;
  n.bias = bias.index;
  n.value = kernels::conv1x1<T>(in, w.values, b.values, w.shape[0]);
  return push(std::move(n));
}

template <typename T>
Var Tape<T>::dwconv(Var x, ParamRef kernel, ParamRef bias) {
  check_var(x);
  const auto& in = nodes_[x.index].value;
  const auto& k = param(kernel);
  const auto& b = param(bias);
  if (k.shape.size() != 3 || k.shape[0] != in.channels || k.shape[1] != k.shape[2] ||
      k.shape[1] % 2 == 0) {
    throw ShapeError("depth-wise kernel '" + k.name + "': expected [" + std::to_string(in.channels) +
                     " x k x k] with odd k, got " + shape_string(k.shape));
  }
  if (b.shape != std::vector<int>{in.channels}) {
    throw ShapeError("depth-wise bias '" + b.name + "': expected [" + std::to_string(in.channels) +
                     "], got " + shape_string(b.shape));
  }
  Node n;
  n.op = Op::DwConv;
  n.a = x.index;
  n.weight = kernel.index;
  n.bias = bias.index;
  n.extra = k.shape[1];
  n.value = kernels::dwconv<T>(in, k.values, b.values, k.shape[1]);
  return push(std::move(n));
}

template <typename T>
Var Tape<T>::sine(Var x, T omega) {
  check_var(x);
  Node n;
  n.op = Op::Sine;
  n.a = x.index;
  n.omega = omega;
  n.value = kernels::sine(nodes_[x.index].value, omega);
  return push(std::move(n));
}

template <typename T>
Var Tape<T>::relu(Var x) {
  check_var(x);
  Node n;
  n.op = Op::Relu;
  n.a = x.index;
  n.value = kernels::relu(nodes_[x.index].value);
  return push(std::move(n));
}

template <typename T>
Var Tape<T>::concat(Var a, Var b) {
  check_var(a);
  check_var(b);
  const auto& va = nodes_[a.index].value;
  const auto& vb = nodes_[b.index].value;
  if (!va.same_layout(vb)) {
    throw ShapeError("concat: spatial layouts differ (" + dims(va) + " vs " + dims(vb) + ")");
  }
  Node n;
  n.op = Op::Concat;
  n.a = a.index;
  n.b = b.index;
  n.value = FeatureMap<T>(va.channels + vb.channels, va.batch, va.height, va.width);
  std::copy(va.values.begin(), va.values.end(), n.value.values.begin());
  std::copy(vb.values.begin(), vb.values.end(), n.value.values.begin() + va.values.size());
  return push(std::move(n));
}

template <typename T>
Var Tape<T>::add(Var a, Var b) {
  check_var(a);
  check_var(b);
  const auto& va = nodes_[a.index].value;
  const auto& vb = nodes_[b.index].value;
  if (!va.same_shape(vb)) throw ShapeError("add: shapes differ (" + dims(va) + " vs " + dims(vb) + ")");
  Node n;
  n.op = Op::Add;
  n.a = a.index;
  n.b = b.index;
  n.value = va;
  for (std::size_t i = 0; i < vb.values.size(); ++i) n.value.values[i] += vb.values[i];
  return push(std::move(n));
}

template <typename T>
Var Tape<T>::fourier_encode(Var x, int bands) {
  check_var(x);
  if (bands < 1) throw ArgumentError("fourier_encode needs at least one band");
  Node n;
  n.op = Op::Fourier;
  n.a = x.index;
  n.extra = bands;
  n.value = kernels::fourier_encode(nodes_[x.index].value, bands);
  return push(std::move(n));
}

template <typename T>
Var Tape<T>::l1_loss(Var prediction, const FeatureMap<T>& target) {
  check_var(prediction);
  const auto& p = nodes_[prediction.index].value;
  if (!p.same_shape(target)) {
    throw ShapeError("l1_loss: prediction " + dims(p) + " vs target " + dims(target));
  }
  if (p.values.empty()) throw ShapeError("l1_loss: empty prediction");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    sum += std::abs(static_cast<double>(p.values[i]) - static_cast<double>(target.values[i]));
  }
  Node n;
  n.op = Op::L1;
  n.a = prediction.index;
  n.target = target;
  n.value = FeatureMap<T>(1, 1, 1, 1, static_cast<T>(sum / static_cast<double>(p.values.size())));
  return push(std::move(n));
}

template <typename T>
T Tape<T>::scalar(Var v) const {
  const auto& m = value(v);
  if (m.values.size() != 1) throw ShapeError("value is not a scalar: " + dims(m));
  return m.values[0];
}

template <typename T>
Gradients<T> Tape<T>::backprop(Var loss, T seed) {
  if (nodes_.empty()) throw StateError("backprop called before any forward pass was recorded");
  if (consumed_) throw StateError("tape already back-propagated; record a new forward pass");
  check_var(loss);
  if (nodes_[loss.index].value.values.size() != 1) {
    throw StateError("backprop needs a scalar loss, got " + dims(nodes_[loss.index].value));
  }
  consumed_ = true;

  std::vector<std::vector<T>> pgrads(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) pgrads[i].assign(params_[i]->values.size(), T(0));

  grads_.assign(nodes_.size(), FeatureMap<T>());
  grads_[loss.index] = FeatureMap<T>(1, 1, 1, 1, seed);

  for (std::size_t idx = loss.index + 1; idx-- > 0;) {
    Node& n = nodes_[idx];
    FeatureMap<T>& g = grads_[idx];
    if (g.values.empty()) continue;  // not on a path to the loss
    switch (n.op) {
      case Op::Input:
        break;
      case Op::Conv1x1: {
        const auto& w = *params_[n.weight];
        add_into(grads_[n.a], kernels::conv1x1_backward<T>(nodes_[n.a].value, w.values, g,
                                                            pgrads[n.weight], pgrads[n.bias]));
        break;
      }
      case Op::DwConv: {
        const auto& k = *params_[n.weight];
        add_into(grads_[n.a], kernels::dwconv_backward<T>(nodes_[n.a].value, k.values, n.extra, g,
                                                           pgrads[n.weight], pgrads[n.bias]));
        break;
      }
      case Op::Sine:
        add_into(grads_[n.a], kernels::sine_backward(nodes_[n.a].value, n.omega, g));
        break;
      case Op::Relu:
        add_into(grads_[n.a], kernels::relu_backward(nodes_[n.a].value, g));
        break;
      case Op::Concat: {
        const auto& va = nodes_[n.a].value;
        const auto& vb = nodes_[n.b].value;
        FeatureMap<T> ga(va.channels, va.batch, va.height, va.width);
        FeatureMap<T> gb(vb.channels, vb.batch, vb.height, vb.width);
        std::copy(g.values.begin(), g.values.begin() + va.values.size(), ga.values.begin());
        std::copy(g.values.begin() + va.values.size(), g.values.end(), gb.values.begin());
        add_into(grads_[n.a], std::move(ga));
        add_into(grads_[n.b], std::move(gb));
        break;
      }
      case Op::Add:
        add_into(grads_[n.a], g);
        add_into(grads_[n.b], g);
        break;
      case Op::Fourier:
        add_into(grads_[n.a], kernels::fourier_encode_backward(nodes_[n.a].value, n.extra, g));
        break;
      case Op::L1: {
        const auto& p = nodes_[n.a].value;
        FeatureMap<T> gp(p.channels, p.batch, p.height, p.width);
        const T scale = g.values[0] / static_cast<T>(p.values.size());
        for (std::size_t i = 0; i < p.values.size(); ++i) {
          const T d = p.values[i] - n.target.values[i];
          gp.values[i] = d > T(0) ? scale : (d < T(0) ? -scale : T(0));
        }
        add_into(grads_[n.a], std::move(gp));
        break;
      }
    }
  }

  Gradients<T> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto [it, inserted] = out.try_emplace(params_[i]->name, std::move(pgrads[i]));
    if (!inserted) {
      // same tensor registered twice: gradients add
      for (std::size_t j = 0; j < pgrads[i].size(); ++j) it->second[j] += pgrads[i][j];
    }
  }
  return out;
}

template <typename T>
const FeatureMap<T>& Tape<T>::grad(Var v) const {
  if (!consumed_) throw StateError("gradients requested before backprop");
  check_var(v);
  return grads_[v.index];
}

template class Tape<float>;
template class Tape<double>;

}  // namespace editfit
