#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "editfit/feature_map.hpp"
#include "editfit/image.hpp"

namespace editfit {

using Rng = std::mt19937_64;

/// A before/after example with the coordinate grid of its (shared) dimensions.
struct ReferencePair {
  Image before;
  Image after;
  CoordField coords;
};

/// Throws ShapeError when the two images differ in size.
ReferencePair make_reference_pair(Image before, Image after);

struct WindowOrigin {
  int pair = 0;
  int center_y = 0;
  int center_x = 0;
};

/// B stacked n x n windows; each FeatureMap has batch = B.
struct WindowBatch {
  int count = 0;
  int window = 0;
  FeatureMap<float> rgb;     // 3 x B x n x n, from `before`
  FeatureMap<float> coords;  // 2 x B x n x n
  FeatureMap<float> target;  // 3 x B x n x n, from `after`
  std::vector<WindowOrigin> origins;
};

/// Uniform pair choice, then a uniform centre among those whose window fits in the image.
WindowBatch sample_windows(std::span<const ReferencePair> pairs, int count, int window, Rng& rng);

/// Planar copies of an Image region (rows [y0,y0+h), cols [x0,x0+w)) for the model.
FeatureMap<float> image_to_planar(const Image& image, int y0, int x0, int h, int w);
FeatureMap<float> image_to_planar(const Image& image);
FeatureMap<float> coords_to_planar(const CoordField& coords, int y0, int x0, int h, int w);
FeatureMap<float> coords_to_planar(const CoordField& coords);

}  // namespace editfit
