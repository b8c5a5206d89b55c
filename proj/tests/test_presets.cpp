#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "editfit/errors.hpp"
#include "editfit/imageio.hpp"
#include "editfit/metrics.hpp"
#include "editfit/presets.hpp"
#include "editfit/synth.hpp"

using namespace editfit;
namespace fs = std::filesystem;

namespace {

PresetSpec one(PresetStep step) { return PresetSpec{{std::move(step)}}; }

bool finite_unit(const Image& img) {
  for (float v : img.data) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) return false;
  }
  return true;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("editfit_presets_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("empty spec and identity curve are no-ops") {
  const Image img = synthesize_scene(1, 20, 30);
  CHECK(render_preset(img, PresetSpec{}) == img);
  CHECK(render_preset(img, one(ToneCurve{{{0, 0}, {1, 1}}})) == img);
  CHECK(render_preset(img, parse_preset("# nothing here\n\n")) == img);
}

TEST_CASE("tone curve interpolates linearly") {
  Image img(1, 1, 0.25f);
  const auto out = render_preset(img, one(ToneCurve{{{0, 0}, {0.5, 0.25}, {1, 1}}}));
  CHECK(out.at(0, 0, 0) == doctest::Approx(0.125f));
  Image hi(1, 1, 0.75f);
  CHECK(render_preset(hi, one(ToneCurve{{{0, 0}, {0.5, 0.25}, {1, 1}}})).at(0, 0, 1) == doctest::Approx(0.625f));
}

TEST_CASE("vignette") {
  SUBCASE("centre kept, corners zeroed") {
    const auto out = render_preset(Image(5, 7, 0.8f), one(Vignette{1.0, 1.0}));
    CHECK(out.at(2, 3, 0) == 0.8f);
    CHECK(out.at(0, 0, 1) == 0.0f);
    CHECK(out.at(4, 6, 2) == 0.0f);
    CHECK(out.at(0, 6, 0) == 0.0f);
  }
  SUBCASE("radially symmetric") {
    const auto out = render_preset(Image(9, 9, 0.6f), one(Vignette{0.7, 1.3}));
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 9; ++x) {
        const float v = out.at(y, x, 0);
        CHECK(out.at(x, y, 0) == v);
        CHECK(out.at(8 - y, x, 0) == v);
        CHECK(out.at(y, 8 - x, 0) == v);
      }
  }
  SUBCASE("psnr on mid-grey matches a per-pixel attenuation oracle") {
    const int h = 24, w = 36;
    const double v = 0.5, s = 0.7, r = 1.0;
    const auto out = render_preset(Image(h, w, static_cast<float>(v)), one(Vignette{s, r}));
    const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0, corner = std::hypot(cx, cy);
    double se = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double d = std::hypot(x - cx, y - cy) / corner;
        const double after = static_cast<float>(v * std::max(0.0, 1 - s * (d / r) * (d / r)));
        se += 3 * (after - v) * (after - v);
      }
    const double oracle = 10 * std::log10(1.0 / (se / (3.0 * h * w)));
    CHECK(psnr(Image(h, w, static_cast<float>(v)), out) == doctest::Approx(oracle).epsilon(1e-9));
  }
}

TEST_CASE("grain") {
  const Image grey(64, 64, 0.5f);
  const auto a = render_preset(grey, one(Grain{0.05, 3}));
  const auto b = render_preset(grey, one(Grain{0.05, 3}));
  const auto c = render_preset(grey, one(Grain{0.05, 4}));
  CHECK(a == b);
  CHECK_FALSE(a == c);
  double mean = 0, var = 0;
  for (float v : a.data) mean += v;
  mean /= a.data.size();
  for (float v : a.data) var += (v - mean) * (v - mean);
  var /= a.data.size();
  CHECK(std::abs(mean - 0.5) < 0.003);
  CHECK(std::sqrt(var) == doctest::Approx(0.05).epsilon(0.05));
  CHECK(render_preset(grey, one(Grain{0.0, 1})) == grey);
}

TEST_CASE("local edit only touches selected pixels") {
  const Image img = synthesize_scene(2, 40, 50);
  const LocalEdit above{{SelectorKind::LuminanceAbove, 0.3}, {1.2, 1.0, 0.7}};
  const auto out = render_preset(img, one(above));
  int selected = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const bool sel = luminance(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)) > 0.3;
      selected += sel;
      for (int c = 0; c < 3; ++c) {
        if (!sel) {
          CHECK(out.at(y, x, c) == img.at(y, x, c));
        } else {
          CHECK(out.at(y, x, c) == doctest::Approx(std::min(1.0, img.at(y, x, c) * above.gain[c])));
        }
      }
    }
  CHECK(selected > 0);
  CHECK(selected < img.height * img.width);

  const LocalEdit below{{SelectorKind::LuminanceBelow, 0.3}, {0.5, 0.5, 0.5}};
  const auto dark = render_preset(img, one(below));
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      if (luminance(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)) >= 0.3) {
        CHECK(dark.at(y, x, 2) == img.at(y, x, 2));
      }
    }

  const LocalEdit top{{SelectorKind::TopFraction, 0.25}, {0.9, 0.9, 1.1}};
  const auto sky = render_preset(img, one(top));
  for (int y = 0; y < img.height; ++y) {
    const bool sel = y < 10;
    for (int x = 0; x < img.width; ++x) {
      if (!sel) CHECK(sky.at(y, x, 0) == img.at(y, x, 0));
      if (sel) CHECK(sky.at(y, x, 0) == doctest::Approx(img.at(y, x, 0) * 0.9f));
    }
  }
}

TEST_CASE("box blur matches a direct clamped average") {
  const Image img = random_image(3, 9, 11);
  const int r = 2;
  const auto out = render_preset(img, one(BoxBlur{r}));
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 11; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) s += img.at(std::clamp(y + dy, 0, 8), std::clamp(x + dx, 0, 10), c);
        CHECK(out.at(y, x, c) == doctest::Approx(s / 25).epsilon(1e-6));
      }
}

TEST_CASE("outputs stay finite and in range") {
  const Image img = synthesize_scene(4, 30, 30);
  const auto spec = parse_preset(
      "tone_curve pts=0:0.1,0.5:0.9,1:1\n"
      "local_edit select=luminance_above threshold=0.2 gain=3,2,0.1\n"
      "grain sigma=0.3 seed=1\n"
      "vignette strength=0.4 radius=0.5\n"
      "box_blur radius=1\n");
  CHECK(finite_unit(render_preset(img, spec)));
}

TEST_CASE("preset text format") {
  const std::string text =
      "tone_curve pts=0:0,0.5:0.25,1:1\n"
      "vignette strength=0.8 radius=1\n"
      "grain sigma=0.02 seed=7   # comment\n"
      "local_edit select=luminance_above threshold=0.4 gain=1.3,1.1,0.8\n"
      "local_edit select=luminance_below threshold=0.1 gain=1,1,1.2\n"
      "local_edit select=top_fraction fraction=0.3 gain=0.9,0.95,1.2\n"
      "box_blur radius=2\n";
  const auto spec = parse_preset(text);
  REQUIRE(spec.steps.size() == 7);
  CHECK(std::get<Vignette>(spec.steps[1]).strength == 0.8);
  CHECK(std::get<Grain>(spec.steps[2]).seed == 7u);
  CHECK(std::get<LocalEdit>(spec.steps[5]).selector.kind == SelectorKind::TopFraction);
  CHECK(std::get<LocalEdit>(spec.steps[5]).selector.value == 0.3);
  CHECK(std::get<BoxBlur>(spec.steps[6]).radius == 2);

  const auto again = parse_preset(format_preset(spec));
  CHECK(format_preset(again) == format_preset(spec));
  const Image img = synthesize_scene(5, 16, 16);
  CHECK(render_preset(img, again) == render_preset(img, spec));
}

TEST_CASE("invalid presets name the step") {
  auto message = [](const std::string& text) -> std::string {
    try {
      render_preset(Image(2, 2), parse_preset(text));
    } catch (const ValidationError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(message("vignette strength=0.5 radius=1\ntone_curve pts=0:0,0.5:0.6,0.4:0.7,1:1\n").find("step 1") != std::string::npos);
  CHECK(message("tone_curve pts=0:0.5,1:0.2\n").find("tone_curve") != std::string::npos);
  CHECK(message("vignette strength=1.5 radius=1\n").find("vignette") != std::string::npos);
  CHECK(message("grain sigma=-1 seed=0\n").find("grain") != std::string::npos);
  CHECK(message("box_blur radius=0\n").find("box_blur") != std::string::npos);
  CHECK_THROWS_AS(parse_preset("sharpen amount=2\n"), ValidationError);
  CHECK_THROWS_AS(parse_preset("vignette strength=0.5 radius=1 colour=red\n"), ValidationError);
  CHECK_THROWS_AS(parse_preset("vignette strength=abc radius=1\n"), ValidationError);
  CHECK_THROWS_AS(parse_preset("local_edit select=brightest threshold=0.5 gain=1,1,1\n"), ValidationError);
  CHECK_THROWS_AS(parse_preset("local_edit select=top_fraction fraction=0.5 gain=1,1\n"), ValidationError);
  CHECK_THROWS_AS(parse_preset("vignette strength=0.5\n"), ValidationError);
}

TEST_CASE("fixture sets") {
  std::vector<Image> sources{synthesize_scene(6, 16, 20), synthesize_scene(7, 16, 20), synthesize_scene(8, 16, 20)};
  SUBCASE("identity spec gives after == before") {
    const auto set = make_fixture_set({sources[0], sources[1]}, {PresetSpec{}}, 0);
    REQUIRE(set.size() == 2);
    for (const auto& f : set) CHECK(f.after == f.before);
    CHECK(set[0].is_reference);
    CHECK_FALSE(set[1].is_reference);
  }
  SUBCASE("grain fixtures regenerate bit-identically and differ per image") {
    const auto spec = one(Grain{0.03, 11});
    const auto a = make_fixture_set(sources, {spec}, 5);
    const auto b = make_fixture_set(sources, {spec}, 5);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].after == b[i].after);
    const auto grey = make_fixture_set({Image(8, 8, 0.5f), Image(8, 8, 0.5f)}, {spec}, 5);
    CHECK_FALSE(grey[0].after == grey[1].after);
  }
  SUBCASE("needs a reference and a held-out image") {
    CHECK_THROWS_AS(make_fixture_set({sources[0]}, {PresetSpec{}}, 0), ArgumentError);
  }
  SUBCASE("directory round trip") {
    const fs::path root = scratch("dir");
    const auto spec = parse_preset("vignette strength=0.5 radius=1\n");
    const auto set = make_fixture_set(sources, {spec}, 1);
    write_fixture_dir(root, "vig", spec, {"c", "a", "b"}, set);
    CHECK(fs::exists(root / "vig" / "spec.txt"));
    CHECK(fs::exists(root / "vig" / "a_before.png"));
    const auto loaded = load_fixture_root(root);
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].spec_id == "vig");
    CHECK(loaded[0].image_ids == std::vector<std::string>{"a", "b", "c"});
    CHECK(loaded[0].pairs[0].after == quantize_8bit(set[1].after));
    CHECK(format_preset(loaded[0].spec) == format_preset(spec));
    fs::remove_all(root);
  }
}
