#include "editfit/inference.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

#include "editfit/errors.hpp"
#include "editfit/imageio.hpp"
#include "editfit/sampler.hpp"
#include "heap.hpp"

namespace editfit {

namespace {

struct Tile {
  int y0, x0, h, w;
};

void write_region(Image& out, const FeatureMap<float>& result, int oy, int ox, const Tile& t) {
  for (int y = 0; y < t.h; ++y) {
    for (int x = 0; x < t.w; ++x) {
      for (int c = 0; c < 3; ++c) {
        out.at(t.y0 + y, t.x0 + x, c) = std::clamp(result.at(c, oy + y, ox + x), 0.0f, 1.0f);
      }
    }
  }
}

}  // namespace

Image apply_model_whole(const ModelParams& params, const Image& image) {
  const CoordField coords = make_coord_grid(image.height, image.width);
  const FeatureMap<float> result = forward_model(params, image_to_planar(image), coords_to_planar(coords));
  Image out(image.height, image.width);
  write_region(out, result, 0, 0, {0, 0, image.height, image.width});
  return out;
}

Image apply_model(const ModelParams& params, const Image& image, const InferenceOptions& options) {
  params.config.validate();
  detail::keep_heap_resident();
  const int halo = params.config.halo();
  if (options.tile < 2 * halo + 1) {
    throw ArgumentError("tile size " + std::to_string(options.tile) + " is smaller than 2*halo+1 = " +
                        std::to_string(2 * halo + 1));
  }
  const CoordField coords = make_coord_grid(image.height, image.width);

  std::vector<Tile> tiles;
  for (int y = 0; y < image.height; y += options.tile) {
    for (int x = 0; x < image.width; x += options.tile) {
      tiles.push_back({y, x, std::min(options.tile, image.height - y), std::min(options.tile, image.width - x)});
    }
  }

  Image out(image.height, image.width);
  auto run = [&](const Tile& t) {
    // Extend by the halo but never past the image: at true borders the depth-wise
    // layer's own edge clamping then reproduces whole-image evaluation exactly.
    const int ey0 = std::max(0, t.y0 - halo);
    const int ex0 = std::max(0, t.x0 - halo);
    const int ey1 = std::min(image.height, t.y0 + t.h + halo);
    const int ex1 = std::min(image.width, t.x0 + t.w + halo);
    const FeatureMap<float> result =
        forward_model(params, image_to_planar(image, ey0, ex0, ey1 - ey0, ex1 - ex0),
                      coords_to_planar(coords, ey0, ex0, ey1 - ey0, ex1 - ex0));
    write_region(out, result, t.y0 - ey0, t.x0 - ex0, t);
  };

  int workers = options.threads > 0 ? options.threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, static_cast<int>(tiles.size()));
  if (workers == 1) {
    for (const auto& t : tiles) run(t);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < tiles.size(); i = next++) run(tiles[i]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace editfit
