#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "editfit/image.hpp"
#include "editfit/sampler.hpp"

namespace editfit {

/// Peak 1.0; returns +infinity for identical images. Throws ShapeError on size mismatch.
double psnr(const Image& a, const Image& b);

/// Mean SSIM (11x11 Gaussian, sigma 1.5, K1 0.01, K2 0.03, range 1) over valid window
/// positions, computed per channel and averaged. Needs min side >= 11.
double ssim(const Image& a, const Image& b);

struct Histogram3D {
  int bins = 8;
  std::vector<double> counts;  // bins^3, index (r * bins + g) * bins + b, sums to 1

  double at(int r, int g, int b) const { return counts[(static_cast<std::size_t>(r) * bins + g) * bins + b]; }
};

Histogram3D color_hist3d(const Image& image, int bins = 8);

/// L1 distance between normalized histograms of equal bin count.
double histogram_distance(const Histogram3D& a, const Histogram3D& b);

struct ReferenceChoice {
  std::size_t index = 0;
  double distance = 0.0;
};

/// Candidate whose `before` histogram is closest to the input's; ties go to the lowest index.
ReferenceChoice choose_reference(const Image& input, std::span<const Image> candidate_befores,
                                 int bins = 8);
std::size_t select_reference(const Image& input, std::span<const ReferencePair> candidates,
                             int bins = 8);

}  // namespace editfit
