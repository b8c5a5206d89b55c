#pragma once

#include <filesystem>
#include <iosfwd>

#include "editfit/model.hpp"

namespace editfit {

// Binary model file:
//   "INRT" | u16 version | ModelConfig fields in declaration order (int32 / float32,
//   booleans and enums as int32) | every tensor as float32 in ModelParams order.
// All multi-byte values little-endian.
inline constexpr std::uint16_t kModelFormatVersion = 1;

void write_model(const ModelParams& params, std::ostream& out);
ModelParams read_model(std::istream& in);

void save_model(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_model(const std::filesystem::path& path);

}  // namespace editfit
