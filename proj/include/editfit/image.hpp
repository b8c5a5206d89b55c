#pragma once

#include <cstddef>
#include <vector>

namespace editfit {

/// Linear-light RGB image, values in [0,1], interleaved row-major (y, x, c).
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, float fill = 0.0f)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, fill) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }

  float& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  float at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Normalized pixel coordinates, planar: channel 0 holds x, channel 1 holds y, both in [-1,1].
struct CoordField {
  int height = 0;
  int width = 0;
  std::vector<float> data;  // 2 * height * width

  float x(int row, int col) const { return data[static_cast<std::size_t>(row) * width + col]; }
  float y(int row, int col) const {
    return data[static_cast<std::size_t>(height) * width + static_cast<std::size_t>(row) * width + col];
  }
};

}  // namespace editfit
