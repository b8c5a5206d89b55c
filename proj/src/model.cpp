#include "editfit/model.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <unordered_map>

#include "editfit/errors.hpp"
#include "editfit/kernels.hpp"

namespace editfit {

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid model config: " + what); };
  if (branch_width < 1) fail("branch_width must be >= 1");
  if (trunk_width != 2 * branch_width) fail("trunk_width must equal 2 * branch_width");
  if (dw_kernel < 1 || dw_kernel % 2 == 0) fail("dw_kernel must be odd and >= 1");
  if (window_n < dw_kernel || window_n % 2 == 0) fail("window_n must be odd and >= dw_kernel");
  if (!(omega_first > 0.0f) || !(omega_hidden > 0.0f)) fail("omega values must be > 0");
  if (extra_depth < 0) fail("extra_depth must be >= 0");
  if (fourier_features && (fourier_bands < 1 || fourier_bands > 16)) {
    fail("fourier_bands must be in [1, 16]");
  }
  if (activation != Activation::Sine && activation != Activation::Relu) fail("unknown activation");
}

std::string describe(const ModelConfig& c) {
  std::ostringstream os;
  os << "branch_width=" << c.branch_width << " trunk_width=" << c.trunk_width
     << " window_n=" << c.window_n << " omega_first=" << c.omega_first
     << " omega_hidden=" << c.omega_hidden << " use_context=" << c.use_context
     << " use_residual=" << c.use_residual << " dw_kernel=" << c.dw_kernel
     << " fourier_features=" << c.fourier_features << " fourier_bands=" << c.fourier_bands
     << " extra_depth=" << c.extra_depth << " sine_after_dw=" << c.sine_after_dw
     << " activation=" << (c.activation == Activation::Sine ? "sine" : "relu")
     << " split_branches=" << c.split_branches;
  return os.str();
}

std::vector<LayerSpec> layer_layout(const ModelConfig& c) {
  c.validate();
  using Init = LayerSpec::Init;
  std::vector<LayerSpec> layers;
  auto dense = [&](std::string name, int in, int out, Init init) {
    layers.push_back({std::move(name), {out, in}, out, init, in});
  };
  const int bw = c.branch_width;
  const int tw = c.trunk_width;
  if (c.split_branches) {
    dense("rgb.0", c.rgb_input_channels(), bw, Init::First);
    dense("rgb.1", bw, bw, Init::Hidden);
    dense("coord.0", c.coord_input_channels(), bw, Init::First);
    dense("coord.1", bw, bw, Init::Hidden);
  } else {
    dense("joint.0", c.rgb_input_channels() + c.coord_input_channels(), tw, Init::First);
    dense("joint.1", tw, tw, Init::Hidden);
  }
  dense("context.in", tw, tw, Init::Hidden);
  if (c.use_context) {
    layers.push_back({"context.dw", {tw, c.dw_kernel, c.dw_kernel}, tw, Init::Hidden,
                      c.dw_kernel * c.dw_kernel});
  }
  dense("context.out", tw, tw, Init::Hidden);
  for (int i = 0; i < c.extra_depth; ++i) dense("trunk." + std::to_string(i), tw, tw, Init::Hidden);
  dense("head", tw, 3, Init::Zero);
  return layers;
}

std::size_t param_count(const ModelConfig& config) {
  std::size_t n = 0;
  for (const auto& l : layer_layout(config)) n += shape_size(l.weight_shape) + l.bias_size;
  return n;
}

std::size_t bias_count(const ModelConfig& config) {
  std::size_t n = 0;
  for (const auto& l : layer_layout(config)) n += l.bias_size;
  return n;
}

std::uint64_t mac_count(const ModelConfig& config, int height, int width) {
  return static_cast<std::uint64_t>(param_count(config) - bias_count(config)) *
         static_cast<std::uint64_t>(height) * static_cast<std::uint64_t>(width);
}

ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
  const auto layers = layer_layout(config);
  std::mt19937_64 rng(seed);
  ModelParams params{config, {}};
  for (const auto& l : layers) {
    NamedTensor<float> w{l.name + ".weight", l.weight_shape,
                         std::vector<float>(shape_size(l.weight_shape), 0.0f)};
    double bound = 0.0;
    if (config.activation == Activation::Relu) {
      bound = l.init == LayerSpec::Init::Zero ? 0.0 : std::sqrt(6.0 / l.fan_in);
    } else if (l.init == LayerSpec::Init::First) {
      bound = 1.0 / l.fan_in;
    } else if (l.init == LayerSpec::Init::Hidden) {
      bound = std::sqrt(6.0 / l.fan_in) / config.omega_hidden;
    }
    if (bound > 0.0) {
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : w.values) v = static_cast<float>(dist(rng));
    }
    params.tensors.push_back(std::move(w));
    params.tensors.push_back({l.name + ".bias", {l.bias_size}, std::vector<float>(l.bias_size, 0.0f)});
  }
  return params;
}

template <typename T>
const NamedTensor<T>& BasicModelParams<T>::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw ShapeError("model has no parameter '" + name + "'");
}

template <typename T>
NamedTensor<T>& BasicModelParams<T>::find(const std::string& name) {
  return const_cast<NamedTensor<T>&>(std::as_const(*this).find(name));
}

template <typename T>
bool BasicModelParams<T>::contains(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return true;
  }
  return false;
}

template <typename T>
std::size_t BasicModelParams<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.values.size();
  return n;
}

template struct BasicModelParams<float>;
template struct BasicModelParams<double>;

namespace {

// The network graph is written once against an executor so that the recording
// and tape-free paths cannot drift apart.
template <typename T>
class TapeExec {
 public:
  using Value = Var;

  TapeExec(Tape<T>& tape, const BasicModelParams<T>& params) : tape_(tape) {
    for (const auto& t : params.tensors) refs_.emplace(t.name, tape.parameter(t));
  }
  Value conv(Value x, const std::string& layer) {
    return tape_.conv1x1(x, ref(layer + ".weight"), ref(layer + ".bias"));
  }
  Value dw(Value x, const std::string& layer) {
    return tape_.dwconv(x, ref(layer + ".weight"), ref(layer + ".bias"));
  }
  Value sine(Value x, T omega) { return tape_.sine(x, omega); }
  Value relu(Value x) { return tape_.relu(x); }
  Value concat(Value a, Value b) { return tape_.concat(a, b); }
  Value add(Value a, Value b) { return tape_.add(a, b); }
  Value fourier(Value x, int bands) { return tape_.fourier_encode(x, bands); }

 private:
  ParamRef ref(const std::string& name) const {
    auto it = refs_.find(name);
    if (it == refs_.end()) throw ShapeError("model has no parameter '" + name + "'");
    return it->second;
  }
  Tape<T>& tape_;
  std::unordered_map<std::string, ParamRef> refs_;
};

template <typename T>
class EagerExec {
 public:
  using Value = FeatureMap<T>;

  explicit EagerExec(const BasicModelParams<T>& params) : params_(params) {}

  Value conv(const Value& x, const std::string& layer) {
    const auto& w = params_.find(layer + ".weight");
    const auto& b = params_.find(layer + ".bias");
    if (w.shape.size() != 2 || w.shape[1] != x.channels) {
      throw ShapeError("conv1x1 weight '" + w.name + "': expected [C_out x " +
                       std::to_string(x.channels) + "], got " + shape_string(w.shape));
    }
    return kernels::conv1x1<T>(x, w.values, b.values, w.shape[0]);
  }
  Value dw(const Value& x, const std::string& layer) {
    const auto& k = params_.find(layer + ".weight");
    const auto& b = params_.find(layer + ".bias");
    if (k.shape.size() != 3 || k.shape[0] != x.channels) {
      throw ShapeError("depth-wise kernel '" + k.name + "': channel mismatch");
    }
    return kernels::dwconv<T>(x, k.values, b.values, k.shape[1]);
  }
  Value sine(const Value& x, T omega) { return kernels::sine(x, omega); }
  Value relu(const Value& x) { return kernels::relu(x); }
  Value concat(const Value& a, const Value& b) {
    Value out(a.channels + b.channels, a.batch, a.height, a.width);
    std::copy(a.values.begin(), a.values.end(), out.values.begin());
    std::copy(b.values.begin(), b.values.end(), out.values.begin() + a.values.size());
    return out;
  }
  Value add(Value a, const Value& b) {
    for (std::size_t i = 0; i < a.values.size(); ++i) a.values[i] += b.values[i];
    return a;
  }
  Value fourier(const Value& x, int bands) { return kernels::fourier_encode(x, bands); }

 private:
  const BasicModelParams<T>& params_;
};

template <typename T, typename Exec>
typename Exec::Value build_network(Exec& ex, const ModelConfig& c, const typename Exec::Value& rgb,
                                   const typename Exec::Value& coords) {
  using Value = typename Exec::Value;
  const T omega_first = static_cast<T>(c.omega_first);
  const T omega_hidden = static_cast<T>(c.omega_hidden);
  auto act = [&](const Value& x, T omega) {
    return c.activation == Activation::Sine ? ex.sine(x, omega) : ex.relu(x);
  };
  auto layer = [&](const Value& x, const std::string& name, T omega) {
    return act(ex.conv(x, name), omega);
  };

  Value rgb_in = c.fourier_features ? ex.fourier(rgb, c.fourier_bands) : rgb;
  Value coord_in = c.fourier_features ? ex.fourier(coords, c.fourier_bands) : coords;

  Value features;
  if (c.split_branches) {
    Value r = layer(layer(rgb_in, "rgb.0", omega_first), "rgb.1", omega_hidden);
    Value p = layer(layer(coord_in, "coord.0", omega_first), "coord.1", omega_hidden);
    features = ex.concat(r, p);
  } else {
    features = layer(layer(ex.concat(rgb_in, coord_in), "joint.0", omega_first), "joint.1",
                     omega_hidden);
  }

  features = layer(features, "context.in", omega_hidden);
  if (c.use_context) {
    features = ex.dw(features, "context.dw");
    if (c.sine_after_dw) features = act(features, omega_hidden);
  }
  features = layer(features, "context.out", omega_hidden);
  for (int i = 0; i < c.extra_depth; ++i) {
    features = layer(features, "trunk." + std::to_string(i), omega_hidden);
  }
  Value out = ex.conv(features, "head");
  if (c.use_residual) out = ex.add(out, rgb);
  return out;
}

template <typename T>
void check_inputs(const FeatureMap<T>& rgb, const FeatureMap<T>& coords) {
  if (rgb.channels != 3) throw ShapeError("rgb input must have 3 channels, got " + std::to_string(rgb.channels));
  if (coords.channels != 2) {
    throw ShapeError("coordinate input must have 2 channels, got " + std::to_string(coords.channels));
  }
  if (!rgb.same_layout(coords)) throw ShapeError("rgb and coordinate inputs are not spatially aligned");
}

}  // namespace

template <typename T>
Var forward_model(Tape<T>& tape, const BasicModelParams<T>& params, Var rgb, Var coords) {
  check_inputs(tape.value(rgb), tape.value(coords));
  TapeExec<T> ex(tape, params);
  return build_network<T>(ex, params.config, rgb, coords);
}

template <typename T>
FeatureMap<T> forward_model(const BasicModelParams<T>& params, const FeatureMap<T>& rgb,
                            const FeatureMap<T>& coords) {
  check_inputs(rgb, coords);
  EagerExec<T> ex(params);
  return build_network<T>(ex, params.config, rgb, coords);
}

template Var forward_model(Tape<float>&, const BasicModelParams<float>&, Var, Var);
template Var forward_model(Tape<double>&, const BasicModelParams<double>&, Var, Var);
template FeatureMap<float> forward_model(const BasicModelParams<float>&, const FeatureMap<float>&,
                                         const FeatureMap<float>&);
template FeatureMap<double> forward_model(const BasicModelParams<double>&,
                                          const FeatureMap<double>&, const FeatureMap<double>&);

}  // namespace editfit
