#include <png.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "editfit/errors.hpp"
#include "editfit/imageio.hpp"
#include "editfit/synth.hpp"

using namespace editfit;
namespace fs = std::filesystem;

namespace {

double decode_oracle(double c) { return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4); }
double encode_oracle(double l) { return l <= 0.0031308 ? l * 12.92 : 1.055 * std::pow(l, 1 / 2.4) - 0.055; }

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / "editfit_imageio";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

// Writes raw samples (big-endian for 16 bit) with libpng directly.
void write_png(const fs::path& path, int w, int h, int depth, int color, const std::vector<unsigned char>& bytes) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  REQUIRE(f);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_init_io(png, f);
  png_set_IHDR(png, info, w, h, depth, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  if (color == PNG_COLOR_TYPE_PALETTE) {
    png_color palette[1] = {{10, 20, 30}};
    png_set_PLTE(png, info, palette, 1);
  }
  png_write_info(png, info);
  const std::size_t row = bytes.size() / h;
  for (int y = 0; y < h; ++y) png_write_row(png, const_cast<unsigned char*>(bytes.data() + y * row));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

std::vector<unsigned char> read_png_rgb8(const fs::path& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  REQUIRE(f);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_init_io(png, f);
  png_read_info(png, info);
  REQUIRE(png_get_bit_depth(png, info) == 8);
  REQUIRE(png_get_color_type(png, info) == PNG_COLOR_TYPE_RGB);
  const auto w = png_get_image_width(png, info), h = png_get_image_height(png, info);
  std::vector<unsigned char> out(static_cast<std::size_t>(w) * h * 3);
  for (png_uint_32 y = 0; y < h; ++y) png_read_row(png, out.data() + y * w * 3, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(f);
  return out;
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out << bytes;
}

}  // namespace

TEST_CASE("sRGB transfer functions match the piecewise definition") {
  for (int i = 0; i <= 1000; ++i) {
    const double x = i / 1000.0;
    CHECK(srgb_to_linear(x) == doctest::Approx(decode_oracle(x)).epsilon(1e-14));
    CHECK(linear_to_srgb(x) == doctest::Approx(encode_oracle(x)).epsilon(1e-14));
    CHECK(linear_to_srgb(srgb_to_linear(x)) == doctest::Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("8-bit PNG decode") {
  const fs::path p = scratch() / "px.png";
  write_png(p, 3, 1, 8, PNG_COLOR_TYPE_RGB, {255, 255, 255, 0, 0, 0, 188, 188, 188});
  const Image img = load_image(p);
  REQUIRE(img.width == 3);
  REQUIRE(img.height == 1);
  for (int c = 0; c < 3; ++c) {
    CHECK(img.at(0, 0, c) == 1.0f);
    CHECK(img.at(0, 1, c) == 0.0f);
    CHECK(img.at(0, 2, c) == doctest::Approx(decode_oracle(188 / 255.0)).epsilon(1e-7));
  }
}

TEST_CASE("16-bit RGBA PNG decode drops alpha") {
  const fs::path p = scratch() / "px16.png";
  // one pixel: r = 0xFFFF, g = 0x8000, b = 0x0000, a = 0x1234
  write_png(p, 1, 1, 16, PNG_COLOR_TYPE_RGB_ALPHA, {0xFF, 0xFF, 0x80, 0x00, 0x00, 0x00, 0x12, 0x34});
  const Image img = load_image(p);
  CHECK(img.at(0, 0, 0) == 1.0f);
  CHECK(img.at(0, 0, 1) == doctest::Approx(decode_oracle(0x8000 / 65535.0)).epsilon(1e-7));
  CHECK(img.at(0, 0, 2) == 0.0f);
}

TEST_CASE("PPM decode") {
  const fs::path p8 = scratch() / "a.ppm";
  write_file(p8, std::string("P6\n# comment\n2 1\n255\n") + std::string("\xff\x00\xbc\x00\x00\x00", 6));
  const Image a = load_image(p8);
  CHECK(a.width == 2);
  CHECK(a.at(0, 0, 0) == 1.0f);
  CHECK(a.at(0, 0, 2) == doctest::Approx(decode_oracle(188 / 255.0)).epsilon(1e-7));
  CHECK(a.at(0, 1, 1) == 0.0f);

  const fs::path p16 = scratch() / "b.ppm";
  write_file(p16, std::string("P6 1 1 65535\n") + std::string("\x80\x00\xff\xff\x00\x01", 6));
  const Image b = load_image(p16);
  CHECK(b.at(0, 0, 0) == doctest::Approx(decode_oracle(0x8000 / 65535.0)).epsilon(1e-7));
  CHECK(b.at(0, 0, 1) == 1.0f);
  CHECK(b.at(0, 0, 2) == doctest::Approx(decode_oracle(1 / 65535.0)).epsilon(1e-6));
}

TEST_CASE("save encodes and rounds to 8 bit") {
  Image img(1, 3);
  for (int c = 0; c < 3; ++c) {
    img.at(0, 0, c) = 0.0f;
    img.at(0, 1, c) = 0.5f;
    img.at(0, 2, c) = 1.7f;  // clamped
  }
  const fs::path p = scratch() / "save.png";
  save_image(img, p);
  const auto raw = read_png_rgb8(p);
  CHECK(raw[0] == 0);
  CHECK(raw[3] == static_cast<unsigned char>(std::lround(encode_oracle(0.5) * 255)));
  CHECK(raw[6] == 255);
}

TEST_CASE("round trips") {
  const Image scene = synthesize_scene(1, 23, 37);
  const fs::path p = scratch() / "scene.png";
  save_image(scene, p);
  const Image once = load_image(p);
  CHECK(once == quantize_8bit(scene));

  SUBCASE("a loaded image survives save and load unchanged") {
    const fs::path q = scratch() / "scene2.png";
    save_image(once, q);
    CHECK(load_image(q) == once);
  }
  SUBCASE("quantisation error stays within half a code in encoded space") {
    const Image noise = random_image(2, 16, 16);
    const fs::path q = scratch() / "noise.png";
    save_image(noise, q);
    const Image back = load_image(q);
    for (std::size_t i = 0; i < noise.data.size(); ++i) {
      const double err = std::abs(encode_oracle(back.data[i]) - encode_oracle(noise.data[i]));
      CHECK(err <= 0.5 / 255 + 1e-6);
      CHECK(std::abs(back.data[i] - noise.data[i]) <= 1.2 / 255);
    }
  }
}

TEST_CASE("load errors") {
  CHECK_THROWS_AS(load_image(scratch() / "missing.png"), IoError);
  const fs::path junk = scratch() / "junk.bin";
  write_file(junk, "hello world, not an image");
  CHECK_THROWS_AS(load_image(junk), FormatError);

  const fs::path gray = scratch() / "gray.png";
  write_png(gray, 1, 1, 8, PNG_COLOR_TYPE_GRAY, {128});
  try {
    load_image(gray);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("gray") != std::string::npos);
  }
  const fs::path pal = scratch() / "pal.png";
  write_png(pal, 1, 1, 8, PNG_COLOR_TYPE_PALETTE, {0});
  CHECK_THROWS_AS(load_image(pal), FormatError);

  const fs::path truncated = scratch() / "short.ppm";
  write_file(truncated, "P6 4 4 255\nabc");
  CHECK_THROWS_AS(load_image(truncated), FormatError);
  const fs::path p3 = scratch() / "ascii.ppm";
  write_file(p3, "P3 1 1 255\n1 2 3\n");
  CHECK_THROWS_AS(load_image(p3), FormatError);

  CHECK_THROWS_AS(save_image(Image(2, 2), scratch() / "no_such_dir" / "x.png"), IoError);
}

TEST_CASE("coordinate grid") {
  const auto one = make_coord_grid(1, 1);
  CHECK(one.x(0, 0) == 0.0f);
  CHECK(one.y(0, 0) == 0.0f);

  const auto g3 = make_coord_grid(3, 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(g3.x(1, i) == static_cast<float>(i - 1));
    CHECK(g3.y(i, 1) == static_cast<float>(i - 1));
  }

  const auto g = make_coord_grid(2, 4);
  const float expect[4] = {-1.0f, -1.0f / 3, 1.0f / 3, 1.0f};
  for (int i = 0; i < 4; ++i) CHECK(g.x(0, i) == doctest::Approx(expect[i]).epsilon(1e-7));
  CHECK(g.y(0, 0) == -1.0f);
  CHECK(g.y(1, 3) == 1.0f);

  const auto line = make_coord_grid(5, 1);
  for (int r = 0; r < 5; ++r) CHECK(line.x(r, 0) == 0.0f);

  const auto big = make_coord_grid(17, 24);
  for (int r = 0; r < 17; ++r)
    for (int c = 0; c < 24; ++c) {
      CHECK(big.x(r, c) == -big.x(r, 23 - c));
      CHECK(big.y(r, c) == -big.y(16 - r, c));
      CHECK(big.x(r, c) == big.x(0, c));
    }
  // uniform spacing
  for (int c = 1; c < 24; ++c) CHECK(big.x(0, c) - big.x(0, c - 1) == doctest::Approx(2.0 / 23).epsilon(1e-6));

  CHECK_THROWS_AS(make_coord_grid(0, 3), ArgumentError);
  CHECK_THROWS_AS(make_coord_grid(3, -1), ArgumentError);
}
