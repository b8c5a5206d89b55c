#include "editfit/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "editfit/errors.hpp"

namespace editfit {

namespace {

constexpr char kMagic[4] = {'I', 'N', 'R', 'T'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}
void put_i32(std::ostream& out, std::int32_t v) { put_u32(out, static_cast<std::uint32_t>(v)); }
void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("model file truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
std::int32_t get_i32(std::istream& in) { return static_cast<std::int32_t>(get_u32(in)); }
float get_f32(std::istream& in) { return std::bit_cast<float>(get_u32(in)); }

}  // namespace

void write_model(const ModelParams& params, std::ostream& out) {
  const ModelConfig& c = params.config;
  out.write(kMagic, 4);
  const char version[2] = {static_cast<char>(kModelFormatVersion & 0xff),
                           static_cast<char>(kModelFormatVersion >> 8)};
  out.write(version, 2);
  put_i32(out, c.branch_width);
  put_i32(out, c.trunk_width);
  put_i32(out, c.window_n);
  put_f32(out, c.omega_first);
  put_f32(out, c.omega_hidden);
  put_i32(out, c.use_context);
  put_i32(out, c.use_residual);
  put_i32(out, c.dw_kernel);
  put_i32(out, c.fourier_features);
  put_i32(out, c.extra_depth);
  put_i32(out, c.sine_after_dw);
  put_i32(out, static_cast<std::int32_t>(c.activation));
  put_i32(out, c.split_branches);
  put_i32(out, c.fourier_bands);
  for (const auto& t : params.tensors) {
    for (float v : t.values) put_f32(out, v);
  }
  if (!out) throw IoError("failed writing model");
}

ModelParams read_model(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("not a model file (bad magic)");
  }
  unsigned char vb[2];
  if (!in.read(reinterpret_cast<char*>(vb), 2)) throw FormatError("model file truncated");
  const std::uint16_t version = static_cast<std::uint16_t>(vb[0] | (vb[1] << 8));
  if (version != kModelFormatVersion) {
    throw FormatError("unsupported model format version " + std::to_string(version));
  }
  ModelConfig c;
  c.branch_width = get_i32(in);
  c.trunk_width = get_i32(in);
  c.window_n = get_i32(in);
  c.omega_first = get_f32(in);
  c.omega_hidden = get_f32(in);
  c.use_context = get_i32(in) != 0;
  c.use_residual = get_i32(in) != 0;
  c.dw_kernel = get_i32(in);
  c.fourier_features = get_i32(in) != 0;
  c.extra_depth = get_i32(in);
  c.sine_after_dw = get_i32(in) != 0;
  c.activation = static_cast<Activation>(get_i32(in));
  c.split_branches = get_i32(in) != 0;
  c.fourier_bands = get_i32(in);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("model file holds an ") + e.what());
  }

  ModelParams params{c, {}};
  for (const auto& l : layer_layout(c)) {
    NamedTensor<float> w{l.name + ".weight", l.weight_shape, std::vector<float>(shape_size(l.weight_shape))};
    for (auto& v : w.values) v = get_f32(in);
    NamedTensor<float> b{l.name + ".bias", {l.bias_size}, std::vector<float>(l.bias_size)};
    for (auto& v : b.values) v = get_f32(in);
    params.tensors.push_back(std::move(w));
    params.tensors.push_back(std::move(b));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after model data");
  return params;
}

void save_model(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_model(params, out);
}

ModelParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_model(in);
}

}  // namespace editfit
