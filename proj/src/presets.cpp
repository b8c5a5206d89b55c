#include "editfit/presets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "editfit/errors.hpp"
#include "editfit/imageio.hpp"

namespace editfit {

namespace fs = std::filesystem;

namespace {

std::string step_name(const PresetStep& step) {
  return std::visit(
      [](const auto& s) -> std::string {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, ToneCurve>) return "tone_curve";
        if constexpr (std::is_same_v<S, Vignette>) return "vignette";
        if constexpr (std::is_same_v<S, Grain>) return "grain";
        if constexpr (std::is_same_v<S, LocalEdit>) return "local_edit";
        if constexpr (std::is_same_v<S, BoxBlur>) return "box_blur";
      },
      step);
}

[[noreturn]] void invalid(std::size_t index, const PresetStep& step, const std::string& what) {
  throw ValidationError("preset step " + std::to_string(index) + " (" + step_name(step) + "): " + what);
}

std::string fmt(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_double(const std::string& s, const std::string& context) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ValidationError(context + ": '" + s + "' is not a number");
  }
  return v;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

float tone_map(const ToneCurve& curve, float v) {
  const auto& pts = curve.points;
  if (v <= pts.front().first) return static_cast<float>(pts.front().second);
  if (v >= pts.back().first) return static_cast<float>(pts.back().second);
  auto it = std::upper_bound(pts.begin(), pts.end(), static_cast<double>(v),
                             [](double x, const auto& p) { return x < p.first; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double t = (v - lo.first) / (hi.first - lo.first);
  return static_cast<float>(lo.second + t * (hi.second - lo.second));
}

void apply(Image& img, const ToneCurve& curve) {
  for (auto& v : img.data) v = tone_map(curve, v);
}

void apply(Image& img, const Vignette& vig) {
  const double cx = (img.width - 1) / 2.0;
  const double cy = (img.height - 1) / 2.0;
  const double corner = std::sqrt(cx * cx + cy * cy);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      const double d = corner > 0.0 ? std::sqrt(dx * dx + dy * dy) / corner : 0.0;
      const double q = d / vig.radius;
      const double factor = std::max(0.0, 1.0 - vig.strength * q * q);
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>(img.at(y, x, c) * factor);
    }
  }
}

void apply(Image& img, const Grain& grain) {
  if (grain.sigma == 0.0) return;
  std::mt19937_64 rng(grain.seed);
  std::normal_distribution<double> noise(0.0, grain.sigma);
  for (auto& v : img.data) v = static_cast<float>(v + noise(rng));
}

void apply(Image& img, const LocalEdit& edit) {
  const Image pre = img;
  const double rows = edit.selector.value * img.height;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      bool selected = false;
      switch (edit.selector.kind) {
        case SelectorKind::LuminanceAbove:
          selected = luminance(pre.at(y, x, 0), pre.at(y, x, 1), pre.at(y, x, 2)) > edit.selector.value;
          break;
        case SelectorKind::LuminanceBelow:
          selected = luminance(pre.at(y, x, 0), pre.at(y, x, 1), pre.at(y, x, 2)) < edit.selector.value;
          break;
        case SelectorKind::TopFraction:
          selected = y < rows;
          break;
      }
      if (!selected) continue;
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>(pre.at(y, x, c) * edit.gain[c]);
    }
  }
}

void apply(Image& img, const BoxBlur& blur) {
  const int r = blur.radius;
  const int h = img.height;
  const int w = img.width;
  const double norm = 1.0 / (2 * r + 1);
  std::vector<double> tmp(img.data.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -r; k <= r; ++k) acc += img.at(y, std::clamp(x + k, 0, w - 1), c);
        tmp[(static_cast<std::size_t>(y) * w + x) * 3 + c] = acc * norm;
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -r; k <= r; ++k) {
          acc += tmp[(static_cast<std::size_t>(std::clamp(y + k, 0, h - 1)) * w + x) * 3 + c];
        }
        img.at(y, x, c) = static_cast<float>(acc * norm);
      }
    }
  }
}

void clamp_unit(Image& img) {
  for (auto& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
}

}  // namespace

double luminance(float r, float g, float b) { return 0.2126 * r + 0.7152 * g + 0.0722 * b; }

void PresetSpec::validate() const {
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const PresetStep& step = steps[i];
    std::visit(
        [&](const auto& s) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, ToneCurve>) {
            if (s.points.size() < 2) invalid(i, step, "needs at least two control points");
            for (std::size_t k = 0; k < s.points.size(); ++k) {
              const auto [in, out] = s.points[k];
              if (!(in >= 0.0 && in <= 1.0 && out >= 0.0 && out <= 1.0)) {
                invalid(i, step, "control points must lie in [0,1]");
              }
              if (k > 0 && !(in > s.points[k - 1].first)) {
                invalid(i, step, "control point inputs must be strictly increasing");
              }
              if (k > 0 && out < s.points[k - 1].second) invalid(i, step, "curve must be monotone");
            }
          } else if constexpr (std::is_same_v<S, Vignette>) {
            if (!(s.strength >= 0.0 && s.strength <= 1.0)) invalid(i, step, "strength must be in [0,1]");
            if (!(s.radius > 0.0) || !std::isfinite(s.radius)) invalid(i, step, "radius must be > 0");
          } else if constexpr (std::is_same_v<S, Grain>) {
            if (!(s.sigma >= 0.0) || !std::isfinite(s.sigma)) invalid(i, step, "sigma must be >= 0");
          } else if constexpr (std::is_same_v<S, LocalEdit>) {
            if (!(s.selector.value >= 0.0 && s.selector.value <= 1.0)) {
              invalid(i, step, "selector threshold/fraction must be in [0,1]");
            }
            for (double g : s.gain) {
              if (!(g >= 0.0) || !std::isfinite(g)) invalid(i, step, "gains must be finite and >= 0");
            }
          } else if constexpr (std::is_same_v<S, BoxBlur>) {
            if (s.radius < 1) invalid(i, step, "radius must be >= 1");
          }
        },
        step);
  }
}

PresetSpec parse_preset(const std::string& text) {
  PresetSpec spec;
  std::istringstream lines(text);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream words(line);
    std::string name;
    if (!(words >> name)) continue;
    const std::string where = "line " + std::to_string(line_no) + " (" + name + ")";

    std::map<std::string, std::string> kv;
    std::string word;
    while (words >> word) {
      const auto eq = word.find('=');
      if (eq == std::string::npos || eq == 0) throw ValidationError(where + ": expected key=value, got '" + word + "'");
      kv[word.substr(0, eq)] = word.substr(eq + 1);
    }
    std::set<std::string> used;
    auto take = [&](const std::string& key) -> std::string {
      auto it = kv.find(key);
      if (it == kv.end()) throw ValidationError(where + ": missing '" + key + "'");
      used.insert(key);
      return it->second;
    };
    auto num = [&](const std::string& key) { return parse_double(take(key), where + " " + key); };
    auto split = [](const std::string& s, char sep) {
      std::vector<std::string> parts;
      std::string part;
      std::istringstream is(s);
      while (std::getline(is, part, sep)) parts.push_back(part);
      return parts;
    };

    if (name == "tone_curve") {
      ToneCurve curve;
      for (const auto& pt : split(take("pts"), ',')) {
        const auto xy = split(pt, ':');
        if (xy.size() != 2) throw ValidationError(where + ": control point '" + pt + "' is not in:out");
        curve.points.emplace_back(parse_double(xy[0], where), parse_double(xy[1], where));
      }
      spec.steps.emplace_back(std::move(curve));
    } else if (name == "vignette") {
      spec.steps.emplace_back(Vignette{num("strength"), num("radius")});
    } else if (name == "grain") {
      const double seed = num("seed");
      if (seed < 0 || seed != std::floor(seed)) throw ValidationError(where + ": seed must be a non-negative integer");
      spec.steps.emplace_back(Grain{num("sigma"), static_cast<std::uint64_t>(seed)});
    } else if (name == "local_edit") {
      LocalEdit edit;
      const std::string sel = take("select");
      if (sel == "luminance_above" || sel == "luminance_below") {
        edit.selector.kind = sel == "luminance_above" ? SelectorKind::LuminanceAbove : SelectorKind::LuminanceBelow;
        edit.selector.value = num("threshold");
      } else if (sel == "top_fraction") {
        edit.selector.kind = SelectorKind::TopFraction;
        edit.selector.value = num("fraction");
      } else {
        throw ValidationError(where + ": unknown selector '" + sel + "'");
      }
      const auto gains = split(take("gain"), ',');
      if (gains.size() != 3) throw ValidationError(where + ": gain needs three comma-separated values");
      for (int c = 0; c < 3; ++c) edit.gain[c] = parse_double(gains[c], where + " gain");
      spec.steps.emplace_back(edit);
    } else if (name == "box_blur") {
      const double r = num("radius");
      if (r != std::floor(r)) throw ValidationError(where + ": radius must be an integer");
      spec.steps.emplace_back(BoxBlur{static_cast<int>(r)});
    } else {
      throw ValidationError("line " + std::to_string(line_no) + ": unknown step '" + name + "'");
    }
    for (const auto& [key, value] : kv) {
      if (!used.contains(key)) throw ValidationError(where + ": unknown key '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

std::string format_preset(const PresetSpec& spec) {
  std::ostringstream os;
  for (const auto& step : spec.steps) {
    os << step_name(step);
    std::visit(
        [&](const auto& s) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, ToneCurve>) {
            os << " pts=";
            for (std::size_t k = 0; k < s.points.size(); ++k) {
              os << (k ? "," : "") << fmt(s.points[k].first) << ":" << fmt(s.points[k].second);
            }
          } else if constexpr (std::is_same_v<S, Vignette>) {
            os << " strength=" << fmt(s.strength) << " radius=" << fmt(s.radius);
          } else if constexpr (std::is_same_v<S, Grain>) {
            os << " sigma=" << fmt(s.sigma) << " seed=" << s.seed;
          } else if constexpr (std::is_same_v<S, LocalEdit>) {
            switch (s.selector.kind) {
              case SelectorKind::LuminanceAbove: os << " select=luminance_above threshold="; break;
              case SelectorKind::LuminanceBelow: os << " select=luminance_below threshold="; break;
              case SelectorKind::TopFraction: os << " select=top_fraction fraction="; break;
            }
            os << fmt(s.selector.value) << " gain=" << fmt(s.gain[0]) << "," << fmt(s.gain[1]) << ","
               << fmt(s.gain[2]);
          } else if constexpr (std::is_same_v<S, BoxBlur>) {
            os << " radius=" << s.radius;
          }
        },
        step);
    os << "\n";
  }
  return os.str();
}

PresetSpec load_preset(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open preset '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_preset(ss.str());
}

Image render_preset(const Image& image, const PresetSpec& spec) {
  spec.validate();
  Image out = image;
  for (const auto& step : spec.steps) {
    std::visit([&](const auto& s) { apply(out, s); }, step);
    clamp_unit(out);
  }
  clamp_unit(out);
  return out;
}

std::vector<Fixture> make_fixture_set(const std::vector<Image>& sources,
                                      const std::vector<PresetSpec>& specs, std::uint64_t seed) {
  if (sources.size() < 2) {
    throw ArgumentError("each preset needs at least 2 source images (one reference, one held out), got " +
                        std::to_string(sources.size()));
  }
  std::vector<Fixture> out;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    specs[s].validate();
    for (std::size_t i = 0; i < sources.size(); ++i) {
      PresetSpec per_image = specs[s];
      for (auto& step : per_image.steps) {
        if (auto* g = std::get_if<Grain>(&step)) g->seed = splitmix64(g->seed ^ splitmix64(seed + i));
      }
      out.push_back({sources[i], render_preset(sources[i], per_image), s, i, i == 0});
    }
  }
  return out;
}

void write_fixture_dir(const fs::path& root, const std::string& spec_id, const PresetSpec& spec,
                       const std::vector<std::string>& image_ids, const std::vector<Fixture>& fixtures) {
  const fs::path dir = root / spec_id;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  {
    std::ofstream out(dir / "spec.txt");
    if (!out) throw IoError("cannot write '" + (dir / "spec.txt").string() + "'");
    out << format_preset(spec);
  }
  for (const auto& f : fixtures) {
    if (f.image_id >= image_ids.size()) throw ArgumentError("fixture image index out of range");
    const std::string& id = image_ids[f.image_id];
    save_image(f.before, dir / (id + "_before.png"));
    save_image(f.after, dir / (id + "_after.png"));
  }
}

FixtureSpecDir load_fixture_dir(const fs::path& spec_dir) {
  FixtureSpecDir out;
  out.spec_id = spec_dir.filename().string();
  out.spec = load_preset(spec_dir / "spec.txt");
  const std::string suffix = "_before.png";
  for (const auto& entry : fs::directory_iterator(spec_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > suffix.size() && name.ends_with(suffix)) {
      out.image_ids.push_back(name.substr(0, name.size() - suffix.size()));
    }
  }
  std::sort(out.image_ids.begin(), out.image_ids.end());
  for (const auto& id : out.image_ids) {
    out.pairs.push_back(make_reference_pair(load_image(spec_dir / (id + "_before.png")),
                                            load_image(spec_dir / (id + "_after.png"))));
  }
  if (out.pairs.size() < 2) {
    throw ArgumentError("fixture '" + spec_dir.string() + "' needs at least 2 image pairs");
  }
  return out;
}

std::vector<FixtureSpecDir> load_fixture_root(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("fixture root '" + root.string() + "' is not a directory");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "spec.txt")) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<FixtureSpecDir> out;
  for (const auto& d : dirs) out.push_back(load_fixture_dir(d));
  return out;
}

}  // namespace editfit
