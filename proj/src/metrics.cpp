#include "editfit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "editfit/errors.hpp"

namespace editfit {

namespace {

void require_same_size(const Image& a, const Image& b, const char* what) {
  if (a.height != b.height || a.width != b.width) {
    throw ShapeError(std::string(what) + ": image sizes differ (" + std::to_string(a.height) + "x" +
                     std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                     std::to_string(b.width) + ")");
  }
}

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

std::vector<double> gaussian_taps() {
  std::vector<double> taps(kSsimWindow);
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    taps[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += taps[i];
  }
  for (auto& t : taps) t /= sum;
  return taps;
}

// Separable "valid" filtering of a row-major plane: output is (h-10) x (w-10).
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w,
                                 const std::vector<double>& taps) {
  const int ow = w - kSsimWindow + 1;
  const int oh = h - kSsimWindow + 1;
  std::vector<double> horiz(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    const double* row = plane.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) acc += taps[k] * row[x + k];
      horiz[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) acc += taps[k] * horiz[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  require_same_size(a, b, "psnr");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    sum += d * d;
  }
  if (sum == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sum / static_cast<double>(a.data.size());
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& a, const Image& b) {
  require_same_size(a, b, "ssim");
  if (a.height < kSsimWindow || a.width < kSsimWindow) {
    throw ArgumentError("ssim needs images of at least 11x11, got " + std::to_string(a.height) + "x" +
                        std::to_string(a.width));
  }
  const double c1 = 0.01 * 0.01;
  const double c2 = 0.03 * 0.03;
  const auto taps = gaussian_taps();
  const int h = a.height;
  const int w = a.width;
  const std::size_t n = static_cast<std::size_t>(h) * w;

  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = a.data[i * 3 + c];
      y[i] = b.data[i * 3 + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w, taps);
    const auto my = filter_valid(y, h, w, taps);
    const auto sxx = filter_valid(xx, h, w, taps);
    const auto syy = filter_valid(yy, h, w, taps);
    const auto sxy = filter_valid(xy, h, w, taps);
    double sum = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double var_x = sxx[i] - mx[i] * mx[i];
      const double var_y = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (var_x + var_y + c2));
    }
    total += sum / static_cast<double>(mx.size());
  }
  return total / 3.0;
}

Histogram3D color_hist3d(const Image& image, int bins) {
  if (bins < 1) throw ArgumentError("histogram needs at least one bin per channel");
  Histogram3D h;
  h.bins = bins;
  h.counts.assign(static_cast<std::size_t>(bins) * bins * bins, 0.0);
  auto bin_of = [bins](float v) {
    const int b = static_cast<int>(std::floor(static_cast<double>(v) * bins));
    return std::clamp(b, 0, bins - 1);
  };
  const std::size_t pixels = image.pixel_count();
  for (std::size_t i = 0; i < pixels; ++i) {
    const int r = bin_of(image.data[i * 3]);
    const int g = bin_of(image.data[i * 3 + 1]);
    const int b = bin_of(image.data[i * 3 + 2]);
    h.counts[(static_cast<std::size_t>(r) * bins + g) * bins + b] += 1.0;
  }
  if (pixels > 0) {
    for (auto& v : h.counts) v /= static_cast<double>(pixels);
  }
  return h;
}

double histogram_distance(const Histogram3D& a, const Histogram3D& b) {
  if (a.bins != b.bins) throw ShapeError("histograms have different bin counts");
  double d = 0.0;
  for (std::size_t i = 0; i < a.counts.size(); ++i) d += std::abs(a.counts[i] - b.counts[i]);
  return d;
}

ReferenceChoice choose_reference(const Image& input, std::span<const Image> candidate_befores,
                                 int bins) {
  if (candidate_befores.empty()) throw ArgumentError("reference selection needs at least one candidate");
  const Histogram3D target = color_hist3d(input, bins);
  ReferenceChoice best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < candidate_befores.size(); ++i) {
    const double d = histogram_distance(target, color_hist3d(candidate_befores[i], bins));
    if (d < best.distance) best = {i, d};
  }
  return best;
}

std::size_t select_reference(const Image& input, std::span<const ReferencePair> candidates, int bins) {
  std::vector<Image> befores;
  befores.reserve(candidates.size());
  for (const auto& c : candidates) befores.push_back(c.before);
  return choose_reference(input, befores, bins).index;
}

}  // namespace editfit
