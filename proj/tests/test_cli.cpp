#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const char* kCli = MID_CLI_PATH;

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + std::string(kCli) + " " + args +
                          " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

fs::path scratch() {
  static fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / "mid_cli_tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::trunc);
  f << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

const std::string kImageConfig = R"(
[synth]
kind = images
count = 4
image_w = 8
image_h = 8

[process]
kind = gaussian-additive
steps = 5
sigma_total = 0.2

[model]
kind = image
image_h = 8
image_w = 8
psi_channels = 3
psi_hidden = 4
phi_channels = 4

[train]
epochs = 1
batch_size = 4
seed = 7
)";

}  // namespace

TEST_CASE("synth reruns produce an identical manifest hash") {
  const fs::path dir = scratch() / "synth_det";
  fs::create_directories(dir);
  write_file(dir / "cfg.ini", kImageConfig);
  REQUIRE(run("synth --config " + (dir / "cfg.ini").string() + " --seed 3 --out " +
              (dir / "a").string()) == 0);
  REQUIRE(run("synth --config " + (dir / "cfg.ini").string() + " --seed 3 --out " +
              (dir / "b").string()) == 0);
  const json ma = json::parse(slurp(dir / "a" / "manifest.json"));
  const json mb = json::parse(slurp(dir / "b" / "manifest.json"));
  CHECK(ma.at("manifest_hash") == mb.at("manifest_hash"));
  CHECK(ma.at("items").size() == 4);
  // different seed changes the hash
  REQUIRE(run("synth --config " + (dir / "cfg.ini").string() + " --seed 4 --out " +
              (dir / "c").string()) == 0);
  const json mc = json::parse(slurp(dir / "c" / "manifest.json"));
  CHECK(ma.at("manifest_hash") != mc.at("manifest_hash"));
}

TEST_CASE("synth with count zero writes an empty manifest and succeeds") {
  const fs::path dir = scratch() / "synth_zero";
  fs::create_directories(dir);
  std::string cfg = kImageConfig;
  cfg.replace(cfg.find("count = 4"), 9, "count = 0");
  write_file(dir / "cfg.ini", cfg);
  REQUIRE(run("synth --config " + (dir / "cfg.ini").string() + " --out " +
              (dir / "out").string()) == 0);
  const json m = json::parse(slurp(dir / "out" / "manifest.json"));
  CHECK(m.at("count") == 0);
  CHECK(m.at("items").empty());
}

TEST_CASE("unknown config key exits with code 2") {
  const fs::path dir = scratch() / "badkey";
  fs::create_directories(dir);
  write_file(dir / "cfg.ini", "[synth]\nkindd = images\n");
  CHECK(run("synth --config " + (dir / "cfg.ini").string() + " --out " +
            (dir / "out").string()) == 2);
}

TEST_CASE("train twice writes bit-identical checkpoints") {
  const fs::path dir = scratch() / "train_det";
  fs::create_directories(dir);
  write_file(dir / "cfg.ini", kImageConfig);
  REQUIRE(run("synth --config " + (dir / "cfg.ini").string() + " --out " +
              (dir / "data").string()) == 0);
  REQUIRE(run("train " + (dir / "data").string() + " --config " +
              (dir / "cfg.ini").string() + " --out " + (dir / "r1").string()) == 0);
  REQUIRE(run("train " + (dir / "data").string() + " --config " +
              (dir / "cfg.ini").string() + " --out " + (dir / "r2").string()) == 0);
  CHECK(slurp(dir / "r1" / "checkpoint.midc") == slurp(dir / "r2" / "checkpoint.midc"));
  // history CSV exists with header + one row per epoch
  const std::string hist = slurp(dir / "r1" / "history.csv");
  CHECK(hist.rfind("epoch,loss_step,loss_noise,loss_total\n", 0) == 0);
}

TEST_CASE("train without a manifest exits with code 3") {
  const fs::path dir = scratch() / "train_nomanifest";
  fs::create_directories(dir / "empty");
  write_file(dir / "cfg.ini", kImageConfig);
  CHECK(run("train " + (dir / "empty").string() + " --config " +
            (dir / "cfg.ini").string() + " --out " + (dir / "out").string()) == 3);
}

TEST_CASE("denoise writes artifact, preview, sidecar, and trace") {
  const fs::path dir = scratch() / "denoise";
  fs::create_directories(dir);
  write_file(dir / "cfg.ini", kImageConfig);
  REQUIRE(run("synth --config " + (dir / "cfg.ini").string() + " --out " +
              (dir / "data").string()) == 0);
  REQUIRE(run("train " + (dir / "data").string() + " --config " +
              (dir / "cfg.ini").string() + " --out " + (dir / "run").string()) == 0);
  REQUIRE(run("denoise " + (dir / "run" / "checkpoint.midc").string() + " " +
              (dir / "data" / "img_0000.midt").string() + " --mode iterative --out " +
              (dir / "dn").string()) == 0);
  CHECK(fs::exists(dir / "dn" / "denoised.midt"));
  CHECK(fs::exists(dir / "dn" / "denoised.pgm"));
  const json sidecar = json::parse(slurp(dir / "dn" / "denoise.json"));
  const auto t_hat = sidecar.at("t_hat").get<std::size_t>();
  CHECK(sidecar.at("residual_norms").size() == t_hat);
  std::size_t trace_files = 0;
  for (const auto& e : fs::directory_iterator(dir / "dn" / "trace")) {
    (void)e;
    ++trace_files;
  }
  CHECK(trace_files == t_hat);
  // invalid mode is a config error
  CHECK(run("denoise " + (dir / "run" / "checkpoint.midc").string() + " " +
            (dir / "data" / "img_0000.midt").string() + " --mode backwards --out " +
            (dir / "dn2").string()) == 2);
}

TEST_CASE("eval emits the documented CSV dialect and summary") {
  const fs::path dir = scratch() / "eval";
  fs::create_directories(dir);
  write_file(dir / "cfg.ini", kImageConfig);
  REQUIRE(run("synth --config " + (dir / "cfg.ini").string() + " --out " +
              (dir / "data").string()) == 0);
  write_file(dir / "pairs.json",
             R"({"pairs": [{"clean": "data/img_0000.midt", "test": "data/img_0000.midt"}]})");
  REQUIRE(run("eval " + (dir / "pairs.json").string() + " --metrics psnr,ssim --out " +
              (dir / "ev").string()) == 0);
  const std::string csv = slurp(dir / "ev" / "metrics.csv");
  CHECK(csv == "index,psnr,ssim\n0,inf,1\n");
  const json summary = json::parse(slurp(dir / "ev" / "summary.json"));
  CHECK(summary.at("count") == 1);
  CHECK(summary.at("metrics").at("psnr").at("finite_count") == 0);
  CHECK(summary.at("metrics").at("ssim").at("mean") == 1.0);

  // empty manifest: header-only CSV, count 0
  write_file(dir / "empty.json", R"({"pairs": []})");
  REQUIRE(run("eval " + (dir / "empty.json").string() + " --metrics psnr --out " +
              (dir / "ev0").string()) == 0);
  CHECK(slurp(dir / "ev0" / "metrics.csv") == "index,psnr\n");
  CHECK(json::parse(slurp(dir / "ev0" / "summary.json")).at("count") == 0);

  // unknown metric name is a config error
  CHECK(run("eval " + (dir / "pairs.json").string() + " --metrics sharpness --out " +
            (dir / "ev1").string()) == 2);
}

TEST_CASE("MID_THREADS caps parallelism without changing results") {
  const fs::path dir = scratch() / "threads";
  fs::create_directories(dir);
  write_file(dir / "cfg.ini", kImageConfig);
  REQUIRE(run("synth --config " + (dir / "cfg.ini").string() + " --seed 5 --out " +
              (dir / "serial").string(),
              "MID_THREADS=1") == 0);
  REQUIRE(run("synth --config " + (dir / "cfg.ini").string() + " --seed 5 --out " +
              (dir / "parallel").string(),
              "MID_THREADS=4") == 0);
  const json a = json::parse(slurp(dir / "serial" / "manifest.json"));
  const json b = json::parse(slurp(dir / "parallel" / "manifest.json"));
  CHECK(a.at("manifest_hash") == b.at("manifest_hash"));
  // garbage value is a config error
  CHECK(run("synth --config " + (dir / "cfg.ini").string() + " --out " +
            (dir / "bad").string(),
            "MID_THREADS=zero") == 2);
}

TEST_CASE("ablate produces a paired report with delta column") {
  const fs::path dir = scratch() / "ablate";
  fs::create_directories(dir);
  std::string cfg = R"(
[process]
kind = poisson-like
steps = 5
photon_scale = 100

[model]
kind = image
image_h = 8
image_w = 8
psi_channels = 3
psi_hidden = 4
phi_channels = 4

[train]
epochs = 2
batch_size = 4
seed = 11

[ablate]
train_count = 4
eval_count = 3
)";
  write_file(dir / "cfg.ini", cfg);
  REQUIRE(run("ablate --config " + (dir / "cfg.ini").string() + " --out " +
              (dir / "out").string()) == 0);
  std::ifstream csv(dir / "out" / "ablation.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "index,psnr_iter,psnr_oneshot,delta");
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    double idx, it, one, delta;
    char comma;
    std::istringstream ss(line);
    ss >> idx >> comma >> it >> comma >> one >> comma >> delta;
    CHECK(delta == doctest::Approx(it - one).epsilon(1e-12));
    ++rows;
  }
  CHECK(rows == 3);
  const json summary = json::parse(slurp(dir / "out" / "ablation.json"));
  CHECK(summary.at("count") == 3);
}
