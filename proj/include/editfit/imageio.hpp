#pragma once

#include <filesystem>

#include "editfit/image.hpp"

namespace editfit {

/// IEC 61966-2-1 piecewise transfer functions.
double srgb_to_linear(double encoded);
double linear_to_srgb(double linear);

/// Reads PNG (8/16-bit RGB or RGBA) or binary PPM (P6). Alpha is dropped.
/// Throws IoError when the file cannot be read and FormatError for unsupported content.
Image load_image(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG after clamping to [0,1] and sRGB encoding.
void save_image(const Image& image, const std::filesystem::path& path);

/// 8-bit code a linear value is stored as (clamp, encode, round half away from zero).
unsigned char quantize_srgb8(float linear);

CoordField make_coord_grid(int height, int width);

}  // namespace editfit

namespace editfit {

/// What save_image followed by load_image would produce, without touching disk.
Image quantize_8bit(const Image& image);

}  // namespace editfit
