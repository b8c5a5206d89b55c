#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace editfit {

/// Planar activation block: `batch` stacked C x h x w maps stored channel-major as
/// [channel][batch][y][x], so a 1x1 convolution over the whole batch is one GEMM.
template <typename T>
struct FeatureMap {
  int channels = 0;
  int batch = 1;
  int height = 0;
  int width = 0;
  std::vector<T> values;

  FeatureMap() = default;
  FeatureMap(int c, int b, int h, int w, T fill = T(0))
      : channels(c), batch(b), height(h), width(w),
        values(static_cast<std::size_t>(c) * b * h * w, fill) {}
  FeatureMap(int c, int h, int w, T fill = T(0)) : FeatureMap(c, 1, h, w, fill) {}

  /// Elements per channel (batch * height * width).
  std::size_t plane() const { return static_cast<std::size_t>(batch) * height * width; }
  std::size_t size() const { return values.size(); }

  std::span<T> channel(int c) { return {values.data() + c * plane(), plane()}; }
  std::span<const T> channel(int c) const { return {values.data() + c * plane(), plane()}; }

  T& at(int c, int b, int y, int x) { return values[index(c, b, y, x)]; }
  T at(int c, int b, int y, int x) const { return values[index(c, b, y, x)]; }
  T& at(int c, int y, int x) { return at(c, 0, y, x); }
  T at(int c, int y, int x) const { return at(c, 0, y, x); }

  bool same_layout(const FeatureMap& o) const {
    return batch == o.batch && height == o.height && width == o.width;
  }
  bool same_shape(const FeatureMap& o) const { return channels == o.channels && same_layout(o); }

  /// Copy of batch entries [first, last).
  FeatureMap slice_batch(int first, int last) const {
    FeatureMap out(channels, last - first, height, width);
    const std::size_t per = static_cast<std::size_t>(height) * width;
    for (int c = 0; c < channels; ++c) {
      const T* src = values.data() + c * plane() + first * per;
      std::copy(src, src + out.plane(), out.values.data() + c * out.plane());
    }
    return out;
  }

  template <typename U>
  FeatureMap<U> cast() const {
    FeatureMap<U> out(channels, batch, height, width);
    for (std::size_t i = 0; i < values.size(); ++i) out.values[i] = static_cast<U>(values[i]);
    return out;
  }

 private:
  std::size_t index(int c, int b, int y, int x) const {
    return ((static_cast<std::size_t>(c) * batch + b) * height + y) * width + x;
  }
};

}  // namespace editfit
