#include "editfit/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "editfit/errors.hpp"

namespace editfit {

namespace {

// Smooth value noise on a coarse lattice, bicubic-free (smoothstep-blended bilinear).
class ValueNoise {
 public:
  ValueNoise(std::mt19937_64& rng, int cells_y, int cells_x)
      : ny_(cells_y + 2), nx_(cells_x + 2), lattice_(static_cast<std::size_t>(ny_) * nx_) {
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    for (auto& v : lattice_) v = u(rng);
  }

  // u, v in [0,1]
  float operator()(double u, double v) const {
    const double fy = v * (ny_ - 2);
    const double fx = u * (nx_ - 2);
    const int y0 = std::min(static_cast<int>(fy), ny_ - 2);
    const int x0 = std::min(static_cast<int>(fx), nx_ - 2);
    auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
    const double ty = smooth(fy - y0);
    const double tx = smooth(fx - x0);
    auto at = [&](int y, int x) { return lattice_[static_cast<std::size_t>(y) * nx_ + x]; };
    const double top = at(y0, x0) * (1 - tx) + at(y0, x0 + 1) * tx;
    const double bottom = at(y0 + 1, x0) * (1 - tx) + at(y0 + 1, x0 + 1) * tx;
    return static_cast<float>(top * (1 - ty) + bottom * ty);
  }

 private:
  int ny_;
  int nx_;
  std::vector<float> lattice_;
};

using Rgb = std::array<double, 3>;

Rgb random_color(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return {u(rng), u(rng), u(rng)};
}

}  // namespace

Image synthesize_scene(std::uint64_t seed, int height, int width) {
  if (height < 1 || width < 1) throw ArgumentError("scene size must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  const double horizon = 0.25 + 0.25 * u01(rng);
  const Rgb sky_top = {0.05 + 0.15 * u01(rng), 0.15 + 0.2 * u01(rng), 0.45 + 0.45 * u01(rng)};
  const Rgb sky_low = {0.45 + 0.4 * u01(rng), 0.5 + 0.35 * u01(rng), 0.6 + 0.35 * u01(rng)};
  const Rgb ground = random_color(rng, 0.04, 0.45);
  const Rgb ground_alt = random_color(rng, 0.04, 0.5);
  const Rgb ground_third = random_color(rng, 0.04, 0.6);
  const double exposure = 0.7 + 0.6 * u01(rng);

  ValueNoise clouds(rng, 3, 6);
  ValueNoise terrain(rng, 4, 6);
  ValueNoise detail(rng, 24, 36);
  ValueNoise fine(rng, std::max(2, height / 3), std::max(2, width / 3));
  ValueNoise patches(rng, 5, 7);
  std::array<ValueNoise, 3> tint{ValueNoise(rng, 2, 3), ValueNoise(rng, 2, 3), ValueNoise(rng, 2, 3)};

  struct Blob {
    double cx, cy, rx, ry;
    Rgb color;
    bool box;
  };
  std::vector<Blob> blobs;
  const int n_blobs = 8 + static_cast<int>(u01(rng) * 10);
  for (int i = 0; i < n_blobs; ++i) {
    Blob b;
    b.cx = u01(rng);
    b.cy = horizon + (1.0 - horizon) * u01(rng);
    b.rx = 0.03 + 0.12 * u01(rng);
    b.ry = 0.03 + 0.12 * u01(rng);
    b.color = random_color(rng, 0.02, 0.9);
    b.box = u01(rng) < 0.4;
    blobs.push_back(b);
  }

  Image img(height, width);
  for (int y = 0; y < height; ++y) {
    const double v = height > 1 ? static_cast<double>(y) / (height - 1) : 0.5;
    for (int x = 0; x < width; ++x) {
      const double u = width > 1 ? static_cast<double>(x) / (width - 1) : 0.5;
      const double edge = horizon + 0.04 * terrain(u, 0.3);
      Rgb px;
      if (v < edge) {
        const double t = std::clamp(v / std::max(edge, 1e-6), 0.0, 1.0);
        const double cloud = std::max(0.0, static_cast<double>(clouds(u, v)) * 1.4 - 0.2);
        for (int c = 0; c < 3; ++c) {
          px[c] = sky_top[c] * (1 - t) + sky_low[c] * t;
          px[c] = px[c] * (1 - cloud) + 0.92 * cloud;
        }
      } else {
        const double mix = 0.5 + 0.5 * terrain(u, v);
        const double third = std::clamp(patches(u, v) * 1.5, 0.0, 1.0);
        const double tex = 1.0 + 0.35 * detail(u, v);
        for (int c = 0; c < 3; ++c) {
          const double base = ground[c] * (1 - mix) + ground_alt[c] * mix;
          px[c] = (base * (1 - third) + ground_third[c] * third) * tex;
        }
        for (const auto& b : blobs) {
          const double dx = (u - b.cx) / b.rx;
          const double dy = (v - b.cy) / b.ry;
          const double dist = b.box ? std::max(std::abs(dx), std::abs(dy)) : std::sqrt(dx * dx + dy * dy);
          const double alpha = std::clamp((1.0 - dist) * 8.0, 0.0, 1.0);
          if (alpha <= 0.0) continue;
          const double shade = 1.0 + 0.25 * detail(v, u);
          for (int c = 0; c < 3; ++c) px[c] = px[c] * (1 - alpha) + b.color[c] * shade * alpha;
        }
      }
      const double grain = 1.0 + 0.08 * fine(u, v);
      for (int c = 0; c < 3; ++c) {
        const double cast = 1.0 + 0.3 * tint[c](u, v);
        img.at(y, x, c) = static_cast<float>(std::clamp(px[c] * exposure * grain * cast, 0.0, 1.0));
      }
    }
  }
  return img;
}

Image random_image(std::uint64_t seed, int height, int width) {
  if (height < 1 || width < 1) throw ArgumentError("image size must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img(height, width);
  for (auto& v : img.data) v = u(rng);
  return img;
}

}  // namespace editfit
