#include "editfit/kernels.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace editfit::kernels {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;

template <typename T>
ConstMatMap<T> as_matrix(const FeatureMap<T>& m) {
  return {m.values.data(), m.channels, static_cast<Eigen::Index>(m.plane())};
}

template <typename T>
MatMap<T> as_matrix(FeatureMap<T>& m) {
  return {m.values.data(), m.channels, static_cast<Eigen::Index>(m.plane())};
}

template <typename T>
auto as_array(const FeatureMap<T>& m) {
  return Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>(m.values.data(),
                                                              static_cast<Eigen::Index>(m.size()));
}

template <typename T>
auto as_array(FeatureMap<T>& m) {
  return Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>(m.values.data(),
                                                        static_cast<Eigen::Index>(m.size()));
}

// Sum of a[i] * (b ? b[i] : 1) in a fixed lane order. Eigen's own reductions peel up
// to the first aligned address, which makes the rounding depend on where the buffer lives.
template <typename T>
T stable_dot(const T* a, const T* b, std::size_t n) {
  namespace ei = Eigen::internal;
  using P = typename ei::packet_traits<T>::type;
  constexpr std::size_t kLanes = ei::packet_traits<T>::size;
  P acc[4] = {ei::pset1<P>(T(0)), ei::pset1<P>(T(0)), ei::pset1<P>(T(0)), ei::pset1<P>(T(0))};
  auto load_b = [&](std::size_t i) { return b ? ei::ploadu<P>(b + i) : ei::pset1<P>(T(1)); };
  std::size_t i = 0;
  for (; i + 4 * kLanes <= n; i += 4 * kLanes) {
    for (std::size_t k = 0; k < 4; ++k) {
      acc[k] = ei::pmadd(ei::ploadu<P>(a + i + k * kLanes), load_b(i + k * kLanes), acc[k]);
    }
  }
  for (; i + kLanes <= n; i += kLanes) acc[0] = ei::pmadd(ei::ploadu<P>(a + i), load_b(i), acc[0]);
  T total = ei::predux(ei::padd(ei::padd(acc[0], acc[1]), ei::padd(acc[2], acc[3])));
  for (; i < n; ++i) total += a[i] * (b ? b[i] : T(1));
  return total;
}

// sin/cos of scale*x. Every element, the tail included, goes through the same packet
// routine, so results do not depend on buffer alignment or position.
template <typename T>
void scaled_trig(const T* x, T scale, std::size_t n, T* sin_out, T* cos_out) {
  namespace ei = Eigen::internal;
  if constexpr (ei::packet_traits<T>::HasSin && ei::packet_traits<T>::HasCos) {
    using P = typename ei::packet_traits<T>::type;
    constexpr std::size_t kLanes = ei::packet_traits<T>::size;
    const P s = ei::pset1<P>(scale);
    auto step = [&](const T* in, T* so, T* co) {
      const P a = ei::pmul(ei::ploadu<P>(in), s);
      if (so) ei::pstoreu(so, ei::psin(a));
      if (co) ei::pstoreu(co, ei::pcos(a));
    };
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) step(x + i, sin_out ? sin_out + i : nullptr, cos_out ? cos_out + i : nullptr);
    if (i < n) {
      std::array<T, kLanes> a{}, so{}, co{};
      std::copy(x + i, x + n, a.begin());
      step(a.data(), so.data(), co.data());
      if (sin_out) std::copy_n(so.begin(), n - i, sin_out + i);
      if (cos_out) std::copy_n(co.begin(), n - i, cos_out + i);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const T a = x[i] * scale;
      if (sin_out) sin_out[i] = std::sin(a);
      if (cos_out) cos_out[i] = std::cos(a);
    }
  }
}

}  // namespace

template <typename T>
FeatureMap<T> conv1x1(const FeatureMap<T>& in, std::span<const T> weight, std::span<const T> bias,
                      int out_channels) {
  FeatureMap<T> out(out_channels, in.batch, in.height, in.width);
  ConstMatMap<T> w(weight.data(), out_channels, in.channels);
  auto y = as_matrix(out);
  if (in.channels > 0) {
    // Leftover pixels go through other GEMM micro-kernels with a different
    // summation order. 48 is a multiple of every micro-tile height, so padding
    // the tail to a full group keeps each pixel's result position-independent.
    constexpr Eigen::Index kGroup = 48;
    const auto x = as_matrix(in);
    const Eigen::Index n = x.cols();
    const Eigen::Index full = n - n % kGroup;
    if (full > 0) y.leftCols(full).noalias() = w * x.leftCols(full);
    if (full < n) {
      RowMat<T> xt = RowMat<T>::Zero(x.rows(), kGroup);
      xt.leftCols(n - full) = x.rightCols(n - full);
      const RowMat<T> yt = w * xt;
      y.rightCols(n - full) = yt.leftCols(n - full);
    }
  }
  for (int o = 0; o < out_channels; ++o) y.row(o).array() += bias[o];
  return out;
}

template <typename T>
FeatureMap<T> conv1x1_backward(const FeatureMap<T>& in, std::span<const T> weight,
                               const FeatureMap<T>& grad_out, std::span<T> grad_weight,
                               std::span<T> grad_bias) {
  const int out_channels = grad_out.channels;
  ConstMatMap<T> w(weight.data(), out_channels, in.channels);
  auto dy = as_matrix(grad_out);
  MatMap<T> dw(grad_weight.data(), out_channels, in.channels);
  if (in.channels > 0) dw.noalias() += dy * as_matrix(in).transpose();
  for (int o = 0; o < out_channels; ++o) grad_bias[o] += stable_dot(grad_out.channel(o).data(), static_cast<const T*>(nullptr), grad_out.plane());
  FeatureMap<T> grad_in(in.channels, in.batch, in.height, in.width);
  if (in.channels > 0) as_matrix(grad_in).noalias() = w.transpose() * dy;
  return grad_in;
}

namespace {

// Depth-wise convolution works on an edge-replicated copy of every batch entry laid
// out back to back, so each kernel tap is one long shifted multiply-add.
struct PaddedLayout {
  int h, w, r, ph, pw;
  std::size_t per_entry() const { return static_cast<std::size_t>(ph) * pw; }
};

template <typename T>
void pad_channel(const T* src, int batch, const PaddedLayout& L, T* dst) {
  for (int b = 0; b < batch; ++b) {
    const T* s = src + static_cast<std::size_t>(b) * L.h * L.w;
    T* d = dst + b * L.per_entry();
    for (int y = 0; y < L.ph; ++y) {
      const T* row = s + static_cast<std::size_t>(std::clamp(y - L.r, 0, L.h - 1)) * L.w;
      T* out = d + static_cast<std::size_t>(y) * L.pw;
      for (int x = 0; x < L.r; ++x) out[x] = row[0];
      std::copy(row, row + L.w, out + L.r);
      for (int x = L.r + L.w; x < L.pw; ++x) out[x] = row[L.w - 1];
    }
  }
}

// dst[i] = init + sum_t k[t] * src[i + shift[t]]
template <typename T, int Taps>
void gather_fixed(const T* __restrict src, const std::ptrdiff_t* shift, const T* k, T init,
                  T* __restrict dst, std::ptrdiff_t count) {
  std::array<std::ptrdiff_t, Taps> s;
  std::array<T, Taps> kk;
  for (int t = 0; t < Taps; ++t) {
    s[t] = shift[t];
    kk[t] = k[t];
  }
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    T acc = init;
    for (int t = 0; t < Taps; ++t) acc += kk[t] * src[i + s[t]];
    dst[i] = acc;
  }
}

template <typename T>
void gather_taps(const T* src, const std::vector<std::ptrdiff_t>& shift, const T* k, T init, T* dst,
                 std::ptrdiff_t count) {
  switch (shift.size()) {
    case 1: return gather_fixed<T, 1>(src, shift.data(), k, init, dst, count);
    case 9: return gather_fixed<T, 9>(src, shift.data(), k, init, dst, count);
    case 25: return gather_fixed<T, 25>(src, shift.data(), k, init, dst, count);
    default: break;
  }
  std::fill(dst, dst + count, init);
  for (std::size_t t = 0; t < shift.size(); ++t) {
    const T kv = k[t];
    const T* s = src + shift[t];
    for (std::ptrdiff_t i = 0; i < count; ++i) dst[i] += kv * s[i];
  }
}

std::vector<std::ptrdiff_t> tap_shifts(int ksize, int pw, int sign) {
  const int r = ksize / 2;
  std::vector<std::ptrdiff_t> out;
  for (int dy = 0; dy < ksize; ++dy) {
    for (int dx = 0; dx < ksize; ++dx) {
      out.push_back(sign * (static_cast<std::ptrdiff_t>(dy - r) * pw + (dx - r)));
    }
  }
  return out;
}

}  // namespace

template <typename T>
FeatureMap<T> dwconv(const FeatureMap<T>& in, std::span<const T> kernel, std::span<const T> bias,
                     int ksize) {
  FeatureMap<T> out(in.channels, in.batch, in.height, in.width);
  const int r = ksize / 2;
  const PaddedLayout L{in.height, in.width, r, in.height + 2 * r, in.width + 2 * r};
  const std::size_t total = L.per_entry() * in.batch;
  // Outputs are computed at padded positions [first, total - first) so every tap stays in range.
  const std::ptrdiff_t first = static_cast<std::ptrdiff_t>(r) * L.pw + r;
  const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(total) - 2 * first;
  const auto shifts = tap_shifts(ksize, L.pw, 1);
  std::vector<T> padded(total);
  std::vector<T> acc(total);
  for (int c = 0; c < in.channels; ++c) {
    pad_channel(in.channel(c).data(), in.batch, L, padded.data());
    const T* k = kernel.data() + static_cast<std::size_t>(c) * ksize * ksize;
    gather_taps(padded.data() + first, shifts, k, bias[c], acc.data() + first, count);
    T* dst = out.channel(c).data();
    for (int b = 0; b < in.batch; ++b) {
      for (int y = 0; y < L.h; ++y) {
        const T* row = acc.data() + b * L.per_entry() + static_cast<std::size_t>(y + r) * L.pw + r;
        std::copy(row, row + L.w, dst + (static_cast<std::size_t>(b) * L.h + y) * L.w);
      }
    }
  }
  return out;
}

template <typename T>
FeatureMap<T> dwconv_backward(const FeatureMap<T>& in, std::span<const T> kernel, int ksize,
                              const FeatureMap<T>& grad_out, std::span<T> grad_kernel,
                              std::span<T> grad_bias) {
  FeatureMap<T> grad_in(in.channels, in.batch, in.height, in.width);
  const int r = ksize / 2;
  const PaddedLayout L{in.height, in.width, r, in.height + 2 * r, in.width + 2 * r};
  const std::size_t total = L.per_entry() * in.batch;
  const std::ptrdiff_t first = static_cast<std::ptrdiff_t>(r) * L.pw + r;
  const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(total) - 2 * first;
  const auto shifts = tap_shifts(ksize, L.pw, 1);
  const auto back_shifts = tap_shifts(ksize, L.pw, -1);
  std::vector<T> padded(total);
  // Output gradient in the padded layout with a margin of `first` zeros on each side.
  std::vector<T> gbuf(total + 2 * first, T(0));
  T* gout = gbuf.data() + first;
  std::vector<T> gpad(total);
  for (int c = 0; c < in.channels; ++c) {
    pad_channel(in.channel(c).data(), in.batch, L, padded.data());
    const T* g = grad_out.channel(c).data();
    T bias_acc = 0;
    for (int b = 0; b < in.batch; ++b) {
      for (int y = 0; y < L.h; ++y) {
        const T* row = g + (static_cast<std::size_t>(b) * L.h + y) * L.w;
        T* dst = gout + b * L.per_entry() + static_cast<std::size_t>(y + r) * L.pw + r;
        for (int x = 0; x < L.w; ++x) {
          dst[x] = row[x];
          bias_acc += row[x];
        }
      }
    }
    grad_bias[c] += bias_acc;

    const T* k = kernel.data() + static_cast<std::size_t>(c) * ksize * ksize;
    T* gk = grad_kernel.data() + static_cast<std::size_t>(c) * ksize * ksize;
    for (std::size_t t = 0; t < shifts.size(); ++t) {
      gk[t] += stable_dot(gout + first, padded.data() + first + shifts[t], count);
    }
    gather_taps(gout, back_shifts, k, T(0), gpad.data(), static_cast<std::ptrdiff_t>(total));

    // Fold the padded-input gradient back onto the pixels it replicated.
    T* gi = grad_in.channel(c).data();
    for (int b = 0; b < in.batch; ++b) {
      const T* gp = gpad.data() + b * L.per_entry();
      T* dst = gi + static_cast<std::size_t>(b) * L.h * L.w;
      for (int y = 0; y < L.ph; ++y) {
        T* out = dst + static_cast<std::size_t>(std::clamp(y - r, 0, L.h - 1)) * L.w;
        const T* row = gp + static_cast<std::size_t>(y) * L.pw;
        for (int x = 0; x < r; ++x) out[0] += row[x];
        for (int x = 0; x < L.w; ++x) out[x] += row[x + r];
        for (int x = r + L.w; x < L.pw; ++x) out[L.w - 1] += row[x];
      }
    }
  }
  return grad_in;
}

template <typename T>
FeatureMap<T> sine(const FeatureMap<T>& in, T omega) {
  FeatureMap<T> out(in.channels, in.batch, in.height, in.width);
  scaled_trig(in.values.data(), omega, in.size(), out.values.data(), static_cast<T*>(nullptr));
  return out;
}

template <typename T>
FeatureMap<T> sine_backward(const FeatureMap<T>& in, T omega, const FeatureMap<T>& grad_out) {
  FeatureMap<T> grad_in(in.channels, in.batch, in.height, in.width);
  scaled_trig(in.values.data(), omega, in.size(), static_cast<T*>(nullptr), grad_in.values.data());
  as_array(grad_in) = as_array(grad_out) * as_array(grad_in) * omega;
  return grad_in;
}

template <typename T>
FeatureMap<T> relu(const FeatureMap<T>& in) {
  FeatureMap<T> out(in.channels, in.batch, in.height, in.width);
  as_array(out) = as_array(in).max(T(0));
  return out;
}

template <typename T>
FeatureMap<T> relu_backward(const FeatureMap<T>& in, const FeatureMap<T>& grad_out) {
  FeatureMap<T> grad_in(in.channels, in.batch, in.height, in.width);
  as_array(grad_in) = (as_array(in) > T(0)).select(as_array(grad_out), T(0));
  return grad_in;
}

template <typename T>
FeatureMap<T> fourier_encode(const FeatureMap<T>& in, int bands) {
  FeatureMap<T> out(in.channels * 2 * bands, in.batch, in.height, in.width);
  for (int c = 0; c < in.channels; ++c) {
    for (int j = 0; j < bands; ++j) {
      const T freq = std::numbers::pi_v<T> * static_cast<T>(1 << j);
      const int o = (c * bands + j) * 2;
      scaled_trig(in.channel(c).data(), freq, in.plane(), out.channel(o).data(), out.channel(o + 1).data());
    }
  }
  return out;
}

template <typename T>
FeatureMap<T> fourier_encode_backward(const FeatureMap<T>& in, int bands,
                                      const FeatureMap<T>& grad_out) {
  FeatureMap<T> grad_in(in.channels, in.batch, in.height, in.width);
  const auto n = static_cast<Eigen::Index>(in.plane());
  std::vector<T> sines(in.plane()), cosines(in.plane());
  for (int c = 0; c < in.channels; ++c) {
    Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> gx(grad_in.channel(c).data(), n);
    const Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> s(sines.data(), n), co(cosines.data(), n);
    for (int j = 0; j < bands; ++j) {
      const T freq = std::numbers::pi_v<T> * static_cast<T>(1 << j);
      const int o = (c * bands + j) * 2;
      Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> gs(grad_out.channel(o).data(), n);
      Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> gc(grad_out.channel(o + 1).data(), n);
      scaled_trig(in.channel(c).data(), freq, in.plane(), sines.data(), cosines.data());
      gx += freq * (gs * co - gc * s);
    }
  }
  return grad_in;
}

#define EDITFIT_INSTANTIATE(T)                                                                    \
  template FeatureMap<T> conv1x1(const FeatureMap<T>&, std::span<const T>, std::span<const T>,    \
                                 int);                                                            \
  template FeatureMap<T> conv1x1_backward(const FeatureMap<T>&, std::span<const T>,               \
                                          const FeatureMap<T>&, std::span<T>, std::span<T>);      \
  template FeatureMap<T> dwconv(const FeatureMap<T>&, std::span<const T>, std::span<const T>,     \
                                int);                                                             \
  template FeatureMap<T> dwconv_backward(const FeatureMap<T>&, std::span<const T>, int,           \
                                         const FeatureMap<T>&, std::span<T>, std::span<T>);       \
  template FeatureMap<T> sine(const FeatureMap<T>&, T);                                           \
  template FeatureMap<T> sine_backward(const FeatureMap<T>&, T, const FeatureMap<T>&);            \
  template FeatureMap<T> relu(const FeatureMap<T>&);                                              \
  template FeatureMap<T> relu_backward(const FeatureMap<T>&, const FeatureMap<T>&);               \
  template FeatureMap<T> fourier_encode(const FeatureMap<T>&, int);                               \
  template FeatureMap<T> fourier_encode_backward(const FeatureMap<T>&, int, const FeatureMap<T>&);

EDITFIT_INSTANTIATE(float)
EDITFIT_INSTANTIATE(double)

#undef EDITFIT_INSTANTIATE

}  // namespace editfit::kernels
