#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "editfit/image.hpp"
#include "editfit/sampler.hpp"

namespace editfit {

/// Monotone piecewise-linear curve applied identically to each channel.
struct ToneCurve {
  std::vector<std::pair<double, double>> points;  // (in, out), strictly increasing in `in`
};

/// Multiplies by max(0, 1 - strength * (d / radius)^2), d = distance from centre, corner = 1.
struct Vignette {
  double strength = 0.5;
  double radius = 1.0;
};

/// Zero-mean Gaussian noise per sample.
struct Grain {
  double sigma = 0.02;
  std::uint64_t seed = 0;
};

enum class SelectorKind { LuminanceAbove, LuminanceBelow, TopFraction };

/// Predicate on the image entering the step. Luminance uses Rec. 709 weights in linear light;
/// TopFraction selects rows y < fraction * height.
struct Selector {
  SelectorKind kind = SelectorKind::LuminanceAbove;
  double value = 0.5;
};

struct LocalEdit {
  Selector selector;
  std::array<double, 3> gain{1.0, 1.0, 1.0};
};

/// Normalized (2r+1)^2 box filter, replicate padding.
struct BoxBlur {
  int radius = 1;
};

using PresetStep = std::variant<ToneCurve, Vignette, Grain, LocalEdit, BoxBlur>;

struct PresetSpec {
  std::vector<PresetStep> steps;

  /// Throws ValidationError naming the first invalid step.
  void validate() const;
};

/// Line format, one step per line, '#' starts a comment:
///   tone_curve pts=0:0,0.5:0.25,1:1
///   vignette strength=0.8 radius=1
///   grain sigma=0.02 seed=7
///   local_edit select=luminance_above threshold=0.4 gain=1.3,1.1,0.8
///   local_edit select=top_fraction fraction=0.3 gain=0.9,0.95,1.2
///   box_blur radius=1
PresetSpec parse_preset(const std::string& text);
std::string format_preset(const PresetSpec& spec);
PresetSpec load_preset(const std::filesystem::path& path);

double luminance(float r, float g, float b);

Image render_preset(const Image& image, const PresetSpec& spec);

struct Fixture {
  Image before;
  Image after;
  std::size_t spec_id = 0;
  std::size_t image_id = 0;
  bool is_reference = false;  // image 0 of each spec
};

/// Renders every spec on every source. Grain seeds are mixed with `seed` and the image
/// index so each image gets its own (reproducible) noise.
std::vector<Fixture> make_fixture_set(const std::vector<Image>& sources,
                                      const std::vector<PresetSpec>& specs, std::uint64_t seed);

/// One `<root>/<spec_id>/` directory: `spec.txt` plus `<image_id>_{before,after}.png`.
struct FixtureSpecDir {
  std::string spec_id;
  PresetSpec spec;
  std::vector<std::string> image_ids;  // sorted; the first is the designated reference
  std::vector<ReferencePair> pairs;
};

void write_fixture_dir(const std::filesystem::path& root, const std::string& spec_id,
                       const PresetSpec& spec, const std::vector<std::string>& image_ids,
                       const std::vector<Fixture>& fixtures);

FixtureSpecDir load_fixture_dir(const std::filesystem::path& spec_dir);

/// Every spec directory under `root`, sorted by name.
std::vector<FixtureSpecDir> load_fixture_root(const std::filesystem::path& root);

}  // namespace editfit
