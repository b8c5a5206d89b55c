#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "editfit/cli.hpp"
#include "editfit/imageio.hpp"
#include "editfit/model.hpp"
#include "editfit/model_io.hpp"
#include "editfit/synth.hpp"

using namespace editfit;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path workdir() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / "editfit_cli";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

// Three synthetic scenes and a vignette fixture built through the CLI itself.
const fs::path& fixture_root() {
  static const fs::path root = [] {
    const fs::path w = workdir();
    REQUIRE(cli({"synth", "--out", (w / "src").string(), "--count", "3", "--size", "40x32", "--seed", "4"}).code == 0);
    std::ofstream(w / "vignette.txt") << "vignette strength=0.6 radius=1\n";
    std::ofstream(w / "tone.txt") << "tone_curve pts=0:0,0.5:0.6,1:1\n";
    for (const char* spec : {"vignette.txt", "tone.txt"}) {
      REQUIRE(cli({"gen", "--spec", (w / spec).string(), "--inputs", (w / "src").string(), "--out",
                   (w / "fx").string()})
                  .code == 0);
    }
    return w / "fx";
  }();
  return root;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"bench", "--size", "8x8", "--bogus"}).code == 2);
  CHECK(cli({"apply", "--input", "x.png"}).code == 2);  // --output missing
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("runtime and validation failures exit with 1") {
  const Run missing = cli({"apply", "--model", "/nonexistent/m.bin", "--input", "/nonexistent/i.png", "--output",
                           (workdir() / "o.png").string()});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("error:") != std::string::npos);
  CHECK(cli({"bench", "--size", "8by8"}).code == 1);
  CHECK(cli({"bench", "--size", "8x8", "--repeat", "0"}).code == 1);
  CHECK(cli({"eval", "--fixtures", fixture_root().string(), "--report", (workdir() / "r.csv").string(), "--window",
             "12"})
            .code == 1);
  CHECK(cli({"synth", "--out", (workdir() / "s").string(), "--count", "0"}).code == 1);
}

TEST_CASE("gen writes one before/after pair per source") {
  const fs::path dir = fixture_root() / "vignette";
  CHECK(fs::exists(dir / "spec.txt"));
  for (int i = 0; i < 3; ++i) {
    const std::string id = "scene_0" + std::to_string(i);
    CHECK(fs::exists(dir / (id + "_before.png")));
    CHECK(fs::exists(dir / (id + "_after.png")));
  }
  CHECK(load_image(dir / "scene_00_before.png") == load_image(workdir() / "src" / "scene_00.png"));
}

TEST_CASE("eval reports one row per held-out image and is reproducible") {
  const fs::path a = workdir() / "a.csv", b = workdir() / "b.csv";
  const std::vector<std::string> common{"eval", "--fixtures", fixture_root().string(), "--iters", "3",
                                        "--samples", "6", "--no-timings"};
  auto with = [&](const fs::path& report) {
    auto args = common;
    args.insert(args.end(), {"--report", report.string()});
    return cli(args);
  };
  const Run first = with(a);
  REQUIRE(first.code == 0);
  CHECK(first.out.find("config: model") != std::string::npos);
  CHECK(first.out.find("overall: mean_psnr=") != std::string::npos);
  with(b);
  const std::string csv = slurp(a);
  CHECK(csv == slurp(b));
  CHECK(csv.starts_with("spec_id,image_id,psnr,ssim,train_seconds,infer_seconds\n"));
  CHECK(count_lines(csv) == 1 + 2 * 2 + 1);
  CHECK(csv.find("tone,scene_01,") != std::string::npos);
  CHECK(csv.find("vignette,scene_02,") != std::string::npos);
  CHECK(csv.find(",0.000,0.000\n") != std::string::npos);

  auto refs2 = common;
  refs2.insert(refs2.end(), {"--report", (workdir() / "c.csv").string(), "--ref-count", "2"});
  REQUIRE(cli(refs2).code == 0);
  CHECK(count_lines(slurp(workdir() / "c.csv")) == 1 + 2 + 1);

  auto autoref = common;
  autoref.insert(autoref.end(), {"--report", (workdir() / "d.csv").string(), "--auto-ref"});
  REQUIRE(cli(autoref).code == 0);
  CHECK(count_lines(slurp(workdir() / "d.csv")) == 1 + 2 * 2 + 1);
}

TEST_CASE("apply trains, saves and reuses a model") {
  const fs::path dir = fixture_root() / "vignette";
  const fs::path model = workdir() / "m.bin", out1 = workdir() / "out1.png", out2 = workdir() / "out2.png";
  const Run trained = cli({"apply", "--before", (dir / "scene_00_before.png").string(), "--after",
                           (dir / "scene_00_after.png").string(), "--input", (dir / "scene_01_before.png").string(),
                           "--output", out1.string(), "--save-model", model.string(), "--iters", "2", "--samples",
                           "4"});
  REQUIRE(trained.code == 0);
  CHECK(trained.out.find("final_loss=") != std::string::npos);
  CHECK(load_model(model).config == ModelConfig{});
  const Run reused = cli({"apply", "--model", model.string(), "--input", (dir / "scene_01_before.png").string(),
                          "--output", out2.string(), "--tile", "16"});
  REQUIRE(reused.code == 0);
  CHECK(load_image(out1) == load_image(out2));

  SUBCASE("extra reference pairs from a list file") {
    const fs::path list = workdir() / "refs.txt";
    std::ofstream(list) << "# extra\n" << (dir / "scene_02_before.png").string() << " "
                        << (dir / "scene_02_after.png").string() << "\n";
    CHECK(cli({"apply", "--before", (dir / "scene_00_before.png").string(), "--after",
               (dir / "scene_00_after.png").string(), "--refs", list.string(), "--input",
               (dir / "scene_01_before.png").string(), "--output", (workdir() / "out3.png").string(), "--iters", "1",
               "--samples", "2"})
              .code == 0);
    std::ofstream(list) << "only_one_path.png\n";
    CHECK(cli({"apply", "--before", (dir / "scene_00_before.png").string(), "--after",
               (dir / "scene_00_after.png").string(), "--refs", list.string(), "--input",
               (dir / "scene_01_before.png").string(), "--output", (workdir() / "out3.png").string()})
              .code == 1);
  }
  SUBCASE("reference images are needed without a model") {
    CHECK(cli({"apply", "--input", (dir / "scene_01_before.png").string(), "--output", out2.string()}).code == 1);
  }
}

TEST_CASE("select-ref prints the closest candidate") {
  const fs::path dir = fixture_root() / "tone";
  const Run r = cli({"select-ref", "--input", (dir / "scene_02_before.png").string(), "--candidates", dir.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("scene_02_before.png 0\n") != std::string::npos);
}

TEST_CASE("bench reports the MAC count") {
  const Run r = cli({"bench", "--size", "64x48", "--repeat", "2"});
  REQUIRE(r.code == 0);
  const std::uint64_t expected = (param_count(ModelConfig{}) - bias_count(ModelConfig{})) * 64 * 48;
  CHECK(r.out.find("macs=" + std::to_string(expected) + " ") != std::string::npos);
  CHECK(r.out.find("params=11491 ") != std::string::npos);
  CHECK(r.out.find("mean_ms=") != std::string::npos);
}

TEST_CASE("synth writes numbered scenes") {
  const fs::path dir = workdir() / "scenes";
  REQUIRE(cli({"synth", "--out", dir.string(), "--count", "2", "--size", "24x16", "--seed", "9"}).code == 0);
  const Image second = load_image(dir / "scene_01.png");
  CHECK(second.width == 24);
  CHECK(second.height == 16);
  CHECK(second == quantize_8bit(synthesize_scene(10, 16, 24)));
}
