#pragma once

// Forward and backward kernels shared by the recording tape and the tape-free
// inference path. Backward kernels accumulate parameter gradients (+=) and
// overwrite the returned input gradient.

#include <span>

#include "editfit/feature_map.hpp"

namespace editfit::kernels {

/// out[o] = bias[o] + sum_i weight[o * C_in + i] * in[i]
template <typename T>
FeatureMap<T> conv1x1(const FeatureMap<T>& in, std::span<const T> weight, std::span<const T> bias,
                      int out_channels);

template <typename T>
FeatureMap<T> conv1x1_backward(const FeatureMap<T>& in, std::span<const T> weight,
                               const FeatureMap<T>& grad_out, std::span<T> grad_weight,
                               std::span<T> grad_bias);

/// Per-channel k x k correlation with edge-clamp padding, applied to each batch entry separately.
template <typename T>
FeatureMap<T> dwconv(const FeatureMap<T>& in, std::span<const T> kernel, std::span<const T> bias,
                     int ksize);

template <typename T>
FeatureMap<T> dwconv_backward(const FeatureMap<T>& in, std::span<const T> kernel, int ksize,
                              const FeatureMap<T>& grad_out, std::span<T> grad_kernel,
                              std::span<T> grad_bias);

template <typename T>
FeatureMap<T> sine(const FeatureMap<T>& in, T omega);

template <typename T>
FeatureMap<T> sine_backward(const FeatureMap<T>& in, T omega, const FeatureMap<T>& grad_out);

template <typename T>
FeatureMap<T> relu(const FeatureMap<T>& in);

template <typename T>
FeatureMap<T> relu_backward(const FeatureMap<T>& in, const FeatureMap<T>& grad_out);

/// Sinusoidal encoding: channel c expands to [sin(2^j pi x), cos(2^j pi x)] for j < bands.
template <typename T>
FeatureMap<T> fourier_encode(const FeatureMap<T>& in, int bands);

template <typename T>
FeatureMap<T> fourier_encode_backward(const FeatureMap<T>& in, int bands,
                                      const FeatureMap<T>& grad_out);

}  // namespace editfit::kernels
