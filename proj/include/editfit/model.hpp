#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "editfit/feature_map.hpp"
#include "editfit/tape.hpp"
#include "editfit/tensor.hpp"

namespace editfit {

enum class Activation : std::int32_t { Sine = 0, Relu = 1 };

/// Architecture of the context-aware edit network.
///
/// Default layout (11,491 scalars):
///   rgb branch    3 -> 32 -> 32        coord branch  2 -> 32 -> 32
///   concat 64 -> context module [1x1 64->64, depth-wise kxk, 1x1 64->64]
///   optional extra 1x1 64->64 layers, then head 1x1 64->3 added to the input colour.
/// `split_branches = false` replaces the two branches by one joint 5 -> 64 -> 64 branch and
/// `activation = Relu` swaps every sine for a ReLU; both exist for the component ladder.
struct ModelConfig {
  std::int32_t branch_width = 32;
  std::int32_t trunk_width = 64;
  std::int32_t window_n = 13;
  float omega_first = 30.0f;
  float omega_hidden = 30.0f;
  bool use_context = true;
  bool use_residual = true;
  std::int32_t dw_kernel = 3;
  bool fourier_features = false;
  std::int32_t extra_depth = 0;
  bool sine_after_dw = true;
  Activation activation = Activation::Sine;
  bool split_branches = true;
  std::int32_t fourier_bands = 4;

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;

  /// Channels entering the first rgb / coordinate layer (after optional encoding).
  int rgb_input_channels() const { return fourier_features ? 3 * 2 * fourier_bands : 3; }
  int coord_input_channels() const { return fourier_features ? 2 * 2 * fourier_bands : 2; }

  /// Border a tile must carry for exact tiled evaluation.
  int halo() const { return use_context ? (dw_kernel - 1) / 2 : 0; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Human-readable `key=value` dump of every field.
std::string describe(const ModelConfig& config);

template <typename T>
struct BasicModelParams {
  ModelConfig config;
  std::vector<NamedTensor<T>> tensors;  // fixed serialization order

  const NamedTensor<T>& find(const std::string& name) const;
  NamedTensor<T>& find(const std::string& name);
  bool contains(const std::string& name) const;
  std::size_t scalar_count() const;

  template <typename U>
  BasicModelParams<U> cast() const {
    BasicModelParams<U> out{config, {}};
    for (const auto& t : tensors) {
      out.tensors.push_back({t.name, t.shape, std::vector<U>(t.values.begin(), t.values.end())});
    }
    return out;
  }

  friend bool operator==(const BasicModelParams& a, const BasicModelParams& b) {
    if (!(a.config == b.config) || a.tensors.size() != b.tensors.size()) return false;
    for (std::size_t i = 0; i < a.tensors.size(); ++i) {
      const auto& x = a.tensors[i];
      const auto& y = b.tensors[i];
      if (x.name != y.name || x.shape != y.shape || x.values != y.values) return false;
    }
    return true;
  }
};

using ModelParams = BasicModelParams<float>;

/// Layer description used for allocation, counting and serialization order.
struct LayerSpec {
  std::string name;     // tensors are "<name>.weight" and "<name>.bias"
  std::vector<int> weight_shape;
  int bias_size = 0;
  enum class Init { First, Hidden, Zero } init = Init::Hidden;
  int fan_in = 0;
};

std::vector<LayerSpec> layer_layout(const ModelConfig& config);

/// SIREN-style initialisation; deterministic for a given seed. The head is zero, so
/// a residual model starts as the identity map.
ModelParams init_model(const ModelConfig& config, std::uint64_t seed);

std::size_t param_count(const ModelConfig& config);
std::size_t bias_count(const ModelConfig& config);

/// Multiply-accumulates for evaluating an h x w image: (params - biases) * h * w.
std::uint64_t mac_count(const ModelConfig& config, int height, int width);

/// Records the network on `tape`. `rgb` is 3 x B x h x w, `coords` 2 x B x h x w.
template <typename T>
Var forward_model(Tape<T>& tape, const BasicModelParams<T>& params, Var rgb, Var coords);

/// Tape-free evaluation (inference path).
template <typename T>
FeatureMap<T> forward_model(const BasicModelParams<T>& params, const FeatureMap<T>& rgb,
                            const FeatureMap<T>& coords);

extern template struct BasicModelParams<float>;
extern template struct BasicModelParams<double>;

}  // namespace editfit
