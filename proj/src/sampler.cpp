#include "editfit/sampler.hpp"

#include <string>

#include "editfit/errors.hpp"
#include "editfit/imageio.hpp"

namespace editfit {

ReferencePair make_reference_pair(Image before, Image after) {
  if (before.height != after.height || before.width != after.width) {
    throw ShapeError("reference pair size mismatch: before " + std::to_string(before.height) + "x" +
                     std::to_string(before.width) + ", after " + std::to_string(after.height) +
                     "x" + std::to_string(after.width));
  }
  CoordField coords = make_coord_grid(before.height, before.width);
  return {std::move(before), std::move(after), std::move(coords)};
}

WindowBatch sample_windows(std::span<const ReferencePair> pairs, int count, int window, Rng& rng) {
  if (pairs.empty()) throw ArgumentError("sample_windows needs at least one reference pair");
  if (count < 1) throw ArgumentError("window count must be >= 1");
  if (window < 1 || window % 2 == 0) throw ArgumentError("window size must be odd");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Image& img = pairs[i].before;
    if (img.height < window || img.width < window) {
      throw ArgumentError("reference pair " + std::to_string(i) + " (" + std::to_string(img.height) +
                          "x" + std::to_string(img.width) + ") is smaller than the " +
                          std::to_string(window) + "x" + std::to_string(window) + " window");
    }
    if (pairs[i].after.height != img.height || pairs[i].after.width != img.width) {
      throw ShapeError("reference pair " + std::to_string(i) + " has mismatched before/after sizes");
    }
  }

  const int r = (window - 1) / 2;
  WindowBatch batch;
  batch.count = count;
  batch.window = window;
  batch.rgb = FeatureMap<float>(3, count, window, window);
  batch.coords = FeatureMap<float>(2, count, window, window);
  batch.target = FeatureMap<float>(3, count, window, window);
  batch.origins.reserve(count);

  std::uniform_int_distribution<std::size_t> pick_pair(0, pairs.size() - 1);
  for (int b = 0; b < count; ++b) {
    const int p = static_cast<int>(pick_pair(rng));
    const ReferencePair& pair = pairs[p];
    const int h = pair.before.height;
    const int w = pair.before.width;
    const int cy = std::uniform_int_distribution<int>(r, h - 1 - r)(rng);
    const int cx = std::uniform_int_distribution<int>(r, w - 1 - r)(rng);
    batch.origins.push_back({p, cy, cx});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int dy = 0; dy < window; ++dy) {
      const int y = cy - r + dy;
      for (int dx = 0; dx < window; ++dx) {
        const int x = cx - r + dx;
        for (int c = 0; c < 3; ++c) {
          batch.rgb.at(c, b, dy, dx) = pair.before.at(y, x, c);
          batch.target.at(c, b, dy, dx) = pair.after.at(y, x, c);
        }
        const std::size_t idx = static_cast<std::size_t>(y) * w + x;
        batch.coords.at(0, b, dy, dx) = pair.coords.data[idx];
        batch.coords.at(1, b, dy, dx) = pair.coords.data[plane + idx];
      }
    }
  }
  return batch;
}

FeatureMap<float> image_to_planar(const Image& image, int y0, int x0, int h, int w) {
  FeatureMap<float> out(3, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = image.at(y0 + y, x0 + x, c);
    }
  }
  return out;
}

FeatureMap<float> image_to_planar(const Image& image) {
  return image_to_planar(image, 0, 0, image.height, image.width);
}

FeatureMap<float> coords_to_planar(const CoordField& coords, int y0, int x0, int h, int w) {
  FeatureMap<float> out(2, h, w);
  const std::size_t plane = static_cast<std::size_t>(coords.height) * coords.width;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y0 + y) * coords.width + (x0 + x);
      out.at(0, y, x) = coords.data[idx];
      out.at(1, y, x) = coords.data[plane + idx];
    }
  }
  return out;
}

FeatureMap<float> coords_to_planar(const CoordField& coords) {
  return coords_to_planar(coords, 0, 0, coords.height, coords.width);
}

}  // namespace editfit
