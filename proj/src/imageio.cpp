#include "editfit/imageio.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "editfit/errors.hpp"

namespace editfit {

namespace fs = std::filesystem;

double srgb_to_linear(double encoded) {
  if (encoded <= 0.04045) return encoded / 12.92;
  return std::pow((encoded + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double linear) {
  if (linear <= 0.0031308) return 12.92 * linear;
  return 1.055 * std::pow(linear, 1.0 / 2.4) - 0.055;
}

unsigned char quantize_srgb8(float linear) {
  const double clamped = std::clamp(static_cast<double>(linear), 0.0, 1.0);
  const double code = std::round(linear_to_srgb(clamped) * 255.0);  // half away from zero
  return static_cast<unsigned char>(std::clamp(code, 0.0, 255.0));
}

namespace {

const std::array<float, 256>& decode_table8() {
  static const std::array<float, 256> table = [] {
    std::array<float, 256> t{};
    for (int i = 0; i < 256; ++i) t[i] = static_cast<float>(srgb_to_linear(i / 255.0));
    return t;
  }();
  return table;
}

float decode16(unsigned value) { return static_cast<float>(srgb_to_linear(value / 65535.0)); }

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open '" + path.string() + "': " + std::strerror(errno));
  return f;
}

Image load_png(std::FILE* file, const fs::path& path) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng initialisation failed");
  }
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};

  if (setjmp(png_jmpbuf(png))) throw FormatError("corrupt PNG '" + path.string() + "'");

  png_init_io(png, file);
  png_read_info(png, info);
  const auto width = png_get_image_width(png, info);
  const auto height = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);

  if (color != PNG_COLOR_TYPE_RGB && color != PNG_COLOR_TYPE_RGB_ALPHA) {
    const char* name = color == PNG_COLOR_TYPE_GRAY         ? "gray"
                       : color == PNG_COLOR_TYPE_GRAY_ALPHA ? "gray+alpha"
                       : color == PNG_COLOR_TYPE_PALETTE    ? "palette"
                                                            : "unknown";
    throw FormatError("unsupported PNG colour type '" + std::string(name) + "' in '" +
                      path.string() + "' (expected RGB or RGBA)");
  }
  if (depth != 8 && depth != 16) {
    throw FormatError("unsupported PNG bit depth " + std::to_string(depth) + " in '" +
                      path.string() + "' (expected 8 or 16)");
  }
  if (png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) png_set_interlace_handling(png);
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> raw(row_bytes * height);
  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = raw.data() + y * row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);

  Image img(static_cast<int>(height), static_cast<int>(width));
  const auto& lut = decode_table8();
  for (png_uint_32 y = 0; y < height; ++y) {
    const unsigned char* row = rows[y];
    for (png_uint_32 x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        float v;
        if (depth == 8) {
          v = lut[row[x * channels + c]];
        } else {
          const unsigned char* p = row + 2 * (x * channels + c);
          v = decode16((static_cast<unsigned>(p[0]) << 8) | p[1]);  // PNG stores big-endian
        }
        img.at(static_cast<int>(y), static_cast<int>(x), c) = v;
      }
    }
  }
  return img;
}

Image load_ppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  auto next_token = [&]() {
    std::string tok;
    char ch;
    while (in.get(ch)) {
      if (ch == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(ch))) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(ch);
    }
    return tok;
  };
  if (next_token() != "P6") throw FormatError("unsupported PPM magic in '" + path.string() + "'");
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(next_token());
    height = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw FormatError("malformed PPM header in '" + path.string() + "'");
  }
  if (width < 1 || height < 1) throw FormatError("PPM dimensions must be positive");
  if (maxval < 1 || maxval > 65535) {
    throw FormatError("unsupported PPM maxval " + std::to_string(maxval));
  }
  const int bytes = maxval < 256 ? 1 : 2;
  std::vector<unsigned char> raw(static_cast<std::size_t>(width) * height * 3 * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw FormatError("truncated PPM data in '" + path.string() + "'");
  }
  Image img(height, width);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    unsigned v = bytes == 1 ? raw[i] : (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
    img.data[i] = static_cast<float>(srgb_to_linear(std::min<double>(v, maxval) / maxval));
  }
  return img;
}

}  // namespace

Image load_image(const fs::path& path) {
  FilePtr file = open_file(path, "rb");
  unsigned char magic[8] = {};
  const std::size_t n = std::fread(magic, 1, sizeof magic, file.get());
  if (n >= 8 && png_sig_cmp(magic, 0, 8) == 0) {
    std::rewind(file.get());
    return load_png(file.get(), path);
  }
  if (n >= 2 && magic[0] == 'P' && magic[1] == '6') {
    file.reset();
    return load_ppm(path);
  }
  throw FormatError("unsupported image format in '" + path.string() + "' (expected PNG or P6 PPM)");
}

void save_image(const Image& image, const fs::path& path) {
  if (image.height < 1 || image.width < 1) throw ArgumentError("cannot save an empty image");
  FilePtr file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  if (!info) throw IoError("libpng initialisation failed");

  std::vector<unsigned char> raw(image.data.size());
  std::transform(image.data.begin(), image.data.end(), raw.begin(), quantize_srgb8);
  std::vector<png_bytep> rows(image.height);
  for (int y = 0; y < image.height; ++y) rows[y] = raw.data() + static_cast<std::size_t>(y) * image.width * 3;

  if (setjmp(png_jmpbuf(png))) throw IoError("failed writing PNG '" + path.string() + "'");
  png_init_io(png, file.get());
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  if (std::fflush(file.get()) != 0) throw IoError("failed writing PNG '" + path.string() + "'");
}

CoordField make_coord_grid(int height, int width) {
  if (height < 1 || width < 1) {
    throw ArgumentError("coordinate grid needs positive dimensions, got " + std::to_string(height) +
                        "x" + std::to_string(width));
  }
  CoordField grid{height, width, std::vector<float>(2 * static_cast<std::size_t>(height) * width)};
  auto axis = [](int i, int n) -> float {
    return n == 1 ? 0.0f : static_cast<float>(static_cast<double>(2 * i - (n - 1)) / (n - 1));
  };
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      grid.data[static_cast<std::size_t>(r) * width + c] = axis(c, width);
      grid.data[plane + static_cast<std::size_t>(r) * width + c] = axis(r, height);
    }
  }
  return grid;
}

}  // namespace editfit

namespace editfit {

Image quantize_8bit(const Image& image) {
  Image out = image;
  const auto& lut = decode_table8();
  for (auto& v : out.data) v = lut[quantize_srgb8(v)];
  return out;
}

}  // namespace editfit
