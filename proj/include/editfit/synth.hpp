#pragma once

#include <cstdint>

#include "editfit/image.hpp"

namespace editfit {

/// Procedural outdoor-like scene (sky band, textured ground, a few soft objects) used as
/// source material for preset fixtures. Deterministic in `seed`.
Image synthesize_scene(std::uint64_t seed, int height, int width);

/// Uniform random image in [0,1], for benchmarks and tests.
Image random_image(std::uint64_t seed, int height, int width);

}  // namespace editfit
