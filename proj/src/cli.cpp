#include "editfit/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "editfit/errors.hpp"
#include "editfit/evaluation.hpp"
#include "editfit/imageio.hpp"
#include "editfit/inference.hpp"
#include "editfit/metrics.hpp"
#include "editfit/model_io.hpp"
#include "editfit/presets.hpp"
#include "editfit/synth.hpp"
#include "editfit/trainer.hpp"

namespace editfit {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

/// Flags shared by `apply` and `eval` that shape the model and its training.
struct ModelFlags {
  int iters = 1000;
  int window = 13;
  int samples = 484;
  std::uint64_t seed = 0;
  bool no_context = false;
  bool no_residual = false;
  bool fourier = false;
  int threads = 0;

  void attach(CLI::App* app) {
    app->add_option("--iters", iters, "Training iterations")->capture_default_str();
    app->add_option("--window", window, "Sampling window size (odd)")->capture_default_str();
    app->add_option("--samples", samples, "Windows per iteration")->capture_default_str();
    app->add_option("--seed", seed, "Random seed")->capture_default_str();
    app->add_flag("--no-context", no_context, "Drop the depth-wise context layer");
    app->add_flag("--no-residual", no_residual, "Disable the global residual connection");
    app->add_flag("--fourier", fourier, "Sinusoidal encoding of the network inputs");
    app->add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();
  }

  ModelConfig model() const {
    ModelConfig c;
    c.window_n = window;
    c.use_context = !no_context;
    c.use_residual = !no_residual;
    c.fourier_features = fourier;
    c.validate();
    return c;
  }

  TrainConfig train() const {
    TrainConfig t;
    t.iterations = iters;
    t.window = window;
    t.batch = samples;
    t.seed = seed;
    t.threads = threads;
    t.validate();
    return t;
  }
};

std::pair<int, int> parse_size(const std::string& text) {
  const auto x = text.find('x');
  int w = 0;
  int h = 0;
  try {
    if (x == std::string::npos) throw std::invalid_argument("no x");
    std::size_t used = 0;
    w = std::stoi(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument("trailing");
    h = std::stoi(text.substr(x + 1), &used);
    if (used != text.size() - x - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ArgumentError("--size must look like WIDTHxHEIGHT, got '" + text + "'");
  }
  if (w < 1 || h < 1) throw ArgumentError("--size dimensions must be positive");
  return {w, h};
}

bool is_image_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".ppm";
}

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

// Each non-empty line: "<before> <after>", relative paths resolved against the list file.
std::vector<ReferencePair> read_ref_list(const fs::path& list) {
  std::ifstream in(list);
  if (!in) throw IoError("cannot open reference list '" + list.string() + "'");
  std::vector<ReferencePair> pairs;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream words(line);
    std::string before, after;
    if (!(words >> before)) continue;
    if (!(words >> after)) throw ArgumentError("--refs line needs '<before> <after>': " + line);
    auto resolve = [&](const std::string& p) {
      fs::path path(p);
      return path.is_relative() ? list.parent_path() / path : path;
    };
    pairs.push_back(make_reference_pair(load_image(resolve(before)), load_image(resolve(after))));
  }
  return pairs;
}

std::string format_db(double v) {
  if (std::isinf(v)) return "inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learn a photo edit from a before/after example and apply it to new images", "editfit"};
  app.require_subcommand(1);

  // apply
  CLI::App* apply = app.add_subcommand("apply", "Fit an edit from reference pair(s) and apply it");
  ModelFlags apply_flags;
  std::string before_path, after_path, input_path, output_path, save_model_path, model_path;
  std::vector<std::string> ref_lists;
  int apply_tile = 256;
  apply->add_option("--before", before_path, "Reference image before editing");
  apply->add_option("--after", after_path, "Reference image after editing");
  apply->add_option("--input", input_path, "Image to retouch")->required();
  apply->add_option("--output", output_path, "Where to write the result (PNG)")->required();
  apply->add_option("--refs", ref_lists, "File listing extra '<before> <after>' pairs (repeatable)");
  apply->add_option("--save-model", save_model_path, "Write the fitted model");
  apply->add_option("--model", model_path, "Use a saved model instead of training");
  apply->add_option("--tile", apply_tile, "Inference tile size")->capture_default_str();
  apply_flags.attach(apply);

  // eval
  CLI::App* eval = app.add_subcommand("eval", "Train and score every spec of a fixture set");
  ModelFlags eval_flags;
  std::string fixtures_dir, report_path;
  bool auto_ref = false;
  bool no_timings = false;
  int ref_count = 1;
  eval->add_option("--fixtures", fixtures_dir, "Fixture root written by `gen`")->required();
  eval->add_option("--report", report_path, "CSV output path")->required();
  eval->add_flag("--auto-ref", auto_ref, "Choose each reference by colour histogram");
  eval->add_option("--ref-count", ref_count, "Train on the first N pairs of each spec")->capture_default_str();
  eval->add_flag("--no-timings", no_timings, "Write 0 in the timing columns (byte-stable reports)");
  eval_flags.attach(eval);

  // gen
  CLI::App* gen = app.add_subcommand("gen", "Render a preset over source images into a fixture set");
  std::string spec_path, inputs_dir, out_dir;
  std::uint64_t gen_seed = 0;
  gen->add_option("--spec", spec_path, "Preset spec file")->required();
  gen->add_option("--inputs", inputs_dir, "Directory of source images")->required();
  gen->add_option("--out", out_dir, "Fixture root")->required();
  gen->add_option("--seed", gen_seed, "Seed for stochastic steps")->capture_default_str();

  // select-ref
  CLI::App* select = app.add_subcommand("select-ref", "Pick the reference closest in colour distribution");
  std::string select_input, candidates_dir;
  select->add_option("--input", select_input, "Image to be retouched")->required();
  select->add_option("--candidates", candidates_dir, "Directory of candidate references")->required();

  // bench
  CLI::App* bench = app.add_subcommand("bench", "Time full-image inference");
  std::string bench_size, bench_model;
  int repeat = 3;
  int bench_tile = 256;
  int bench_threads = 0;
  bench->add_option("--size", bench_size, "WIDTHxHEIGHT")->required();
  bench->add_option("--repeat", repeat, "Timed repetitions")->capture_default_str();
  bench->add_option("--model", bench_model, "Saved model (default: freshly initialised)");
  bench->add_option("--tile", bench_tile, "Inference tile size")->capture_default_str();
  bench->add_option("--threads", bench_threads, "Worker threads (0 = all cores)")->capture_default_str();

  // synth
  CLI::App* synth = app.add_subcommand("synth", "Write procedural source scenes");
  std::string synth_out, synth_size = "192x128";
  int synth_count = 5;
  std::uint64_t synth_seed = 0;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--count", synth_count, "Number of scenes")->capture_default_str();
  synth->add_option("--size", synth_size, "WIDTHxHEIGHT")->capture_default_str();
  synth->add_option("--seed", synth_seed, "First scene seed")->capture_default_str();

  std::vector<std::string> argv_store;
  argv_store.push_back("editfit");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*apply) {
      const ModelConfig model_cfg = apply_flags.model();
      const TrainConfig train_cfg = apply_flags.train();
      out << "config: subcommand=apply before=" << before_path << " after=" << after_path
          << " input=" << input_path << " output=" << output_path << " model=" << model_path
          << " save_model=" << save_model_path << " tile=" << apply_tile << "\n";
      const Image input = load_image(input_path);
      ModelParams params;
      if (!model_path.empty()) {
        params = load_model(model_path);
        out << "config: model " << describe(params.config) << "\n";
      } else {
        if (before_path.empty()) throw ArgumentError("--before is required unless --model is given");
        if (after_path.empty()) throw ArgumentError("--after is required unless --model is given");
        out << "config: model " << describe(model_cfg) << "\n";
        out << "config: train " << describe(train_cfg) << " threads=" << train_cfg.threads << "\n";
        std::vector<ReferencePair> pairs;
        pairs.push_back(make_reference_pair(load_image(before_path), load_image(after_path)));
        for (const auto& list : ref_lists) {
          auto extra = read_ref_list(list);
          pairs.insert(pairs.end(), std::make_move_iterator(extra.begin()), std::make_move_iterator(extra.end()));
        }
        const auto start = Clock::now();
        TrainResult result = train(pairs, model_cfg, train_cfg);
        const double secs = seconds_since(start);
        params = std::move(result.params);
        out << "final_loss=" << std::setprecision(8) << result.loss_trace.back() << "\n";
        out << "train_seconds=" << std::fixed << std::setprecision(3) << secs << "\n" << std::defaultfloat;
      }
      if (!save_model_path.empty()) save_model(params, save_model_path);
      const auto start = Clock::now();
      const Image result = apply_model(params, input, {.tile = apply_tile, .threads = apply_flags.threads});
      const double secs = seconds_since(start);
      save_image(result, output_path);
      out << "infer_seconds=" << std::fixed << std::setprecision(3) << secs << "\n" << std::defaultfloat;
      out << "psnr_vs_input=" << format_db(psnr(result, input)) << "\n";
      return 0;
    }

    if (*eval) {
      EvalOptions opts;
      opts.model = eval_flags.model();
      opts.train = eval_flags.train();
      opts.auto_ref = auto_ref;
      opts.references = ref_count;
      opts.record_timings = !no_timings;
      out << "config: subcommand=eval fixtures=" << fixtures_dir << " report=" << report_path
          << " auto_ref=" << auto_ref << " ref_count=" << ref_count << " timings=" << !no_timings << "\n";
      out << "config: model " << describe(opts.model) << "\n";
      out << "config: train " << describe(opts.train) << " threads=" << opts.train.threads << "\n";
      const auto fixtures = load_fixture_root(fixtures_dir);
      if (fixtures.empty()) throw ArgumentError("no fixture specs found under '" + fixtures_dir + "'");
      std::vector<EvalRow> rows;
      for (std::size_t s = 0; s < fixtures.size(); ++s) {
        auto part = evaluate_spec(fixtures[s], opts, s);
        out << fixtures[s].spec_id << ": mean_psnr=" << format_db(mean_psnr(part))
            << " mean_ssim=" << std::fixed << std::setprecision(4) << mean_ssim(part) << "\n"
            << std::defaultfloat;
        rows.insert(rows.end(), part.begin(), part.end());
      }
      std::ofstream csv(report_path);
      if (!csv) throw IoError("cannot write report '" + report_path + "'");
      write_csv(rows, csv);
      out << "overall: mean_psnr=" << format_db(mean_psnr(rows)) << " rows=" << rows.size() << "\n";
      return 0;
    }

    if (*gen) {
      out << "config: subcommand=gen spec=" << spec_path << " inputs=" << inputs_dir << " out=" << out_dir
          << " seed=" << gen_seed << "\n";
      const PresetSpec spec = load_preset(spec_path);
      const auto files = list_images(inputs_dir);
      std::vector<Image> sources;
      std::vector<std::string> ids;
      for (const auto& f : files) {
        sources.push_back(load_image(f));
        ids.push_back(f.stem().string());
      }
      const auto fixtures = make_fixture_set(sources, {spec}, gen_seed);
      const std::string spec_id = fs::path(spec_path).stem().string();
      write_fixture_dir(out_dir, spec_id, spec, ids, fixtures);
      out << "wrote " << fixtures.size() << " pairs to " << (fs::path(out_dir) / spec_id).string()
          << " (reference: " << ids.front() << ")\n";
      return 0;
    }

    if (*select) {
      out << "config: subcommand=select-ref input=" << select_input << " candidates=" << candidates_dir
          << " bins=8\n";
      auto files = list_images(candidates_dir);
      std::vector<fs::path> befores;
      for (const auto& f : files) {
        if (f.filename().string().ends_with("_before.png")) befores.push_back(f);
      }
      if (!befores.empty()) files = befores;
      if (files.empty()) throw ArgumentError("no candidate images in '" + candidates_dir + "'");
      std::vector<Image> images;
      for (const auto& f : files) images.push_back(load_image(f));
      const ReferenceChoice choice = choose_reference(load_image(select_input), images);
      out << files[choice.index].string() << " " << std::setprecision(6) << choice.distance << "\n";
      return 0;
    }

    if (*bench) {
      const auto [w, h] = parse_size(bench_size);
      if (repeat < 1) throw ArgumentError("--repeat must be >= 1");
      const ModelParams params = bench_model.empty() ? init_model(ModelConfig{}, 0) : load_model(bench_model);
      out << "config: subcommand=bench size=" << w << "x" << h << " repeat=" << repeat
          << " tile=" << bench_tile << " threads=" << bench_threads << " model=" << bench_model << "\n";
      out << "config: model " << describe(params.config) << "\n";
      const Image image = random_image(1, h, w);
      double total = 0.0;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < repeat; ++i) {
        const auto start = Clock::now();
        const Image result = apply_model(params, image, {.tile = bench_tile, .threads = bench_threads});
        const double ms = seconds_since(start) * 1e3;
        total += ms;
        best = std::min(best, ms);
      }
      const std::uint64_t macs = mac_count(params.config, h, w);
      out << std::fixed << std::setprecision(3) << "mean_ms=" << total / repeat << " min_ms=" << best << "\n";
      out << "macs=" << macs << " gmacs=" << std::setprecision(4) << macs / 1e9 << "\n" << std::defaultfloat;
      out << "params=" << param_count(params.config) << " biases=" << bias_count(params.config) << "\n";
      return 0;
    }

    if (*synth) {
      const auto [w, h] = parse_size(synth_size);
      if (synth_count < 1) throw ArgumentError("--count must be >= 1");
      out << "config: subcommand=synth out=" << synth_out << " count=" << synth_count << " size=" << w << "x"
          << h << " seed=" << synth_seed << "\n";
      fs::create_directories(synth_out);
      for (int i = 0; i < synth_count; ++i) {
        std::ostringstream name;
        name << "scene_" << std::setw(2) << std::setfill('0') << i << ".png";
        save_image(synthesize_scene(synth_seed + i, h, w), fs::path(synth_out) / name.str());
      }
      out << "wrote " << synth_count << " scenes to " << synth_out << "\n";
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace editfit
