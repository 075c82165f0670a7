// SPDX-License-Identifier: Apache-2.0
// End-to-end checks of the command line binary: exit codes, artifacts,
// determinism. The binary path comes in through CDI3D_CLI_PATH.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(CDI3D_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::path("cli_scratch") / name) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  std::string path(const std::string& leaf) const { return (dir / leaf).string(); }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  REQUIRE(out.good());
  out << text;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// small but complete run file shared by most cases
const char* kTinyConfig = R"({
  "trajectory": {"num_main_views": 4, "num_interp": 1,
                 "interp_elevation_pattern": [25.0, -25.0]},
  "dvi": {"timesteps": 30, "image_size": 8, "hidden": [32],
          "t_embed_dim": 8, "cond_feature_dim": 8,
          "train_steps": 30, "batch_size": 4, "lr": 0.005,
          "beta_start": 0.005, "beta_end": 0.08},
  "fusion": {"dim": 8, "heads": 2, "patch_size": 4},
  "triplane": {"resolution": 8, "features": 4, "decoder_hidden": [12],
               "extract_grid": 24},
  "render": {"width": 16, "height": 16, "n_samples": 24},
  "reconstruct": {"steps": 40, "rays_per_step": 64, "probes_per_step": 4,
                  "n_samples": 16, "log_every": 50},
  "metrics": {"chamfer_samples": 2000, "iou_resolution": 24,
              "eval_resolution": 16},
  "seed": 11
})";

}  // namespace

TEST_CASE("help exits cleanly, bad invocations do not") {
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("trajectory --help") == 0);
  // no subcommand / unknown subcommand: CLI11 parse errors
  CHECK(run_cli("") != 0);
  CHECK(run_cli("frobnicate") != 0);
}

TEST_CASE("config errors exit 2, io errors exit 4") {
  const Scratch s("errors");
  // --config missing entirely
  CHECK(run_cli("trajectory --out " + s.path("out")) == 2);
  // config file absent -> io error
  CHECK(run_cli("trajectory --config " + s.path("nope.json") + " --out " +
                s.path("out")) == 4);
  // unknown key -> config error
  write_text(s.path("typo.json"), R"({"trajektory": {}})");
  CHECK(run_cli("trajectory --config " + s.path("typo.json") + " --out " +
                s.path("out")) == 2);
  // stochastic subcommand without any seed -> config error
  write_text(s.path("noseed.json"), R"({"reconstruct": {"steps": 1}})");
  CHECK(run_cli("reconstruct --config " + s.path("noseed.json") + " --out " +
                s.path("out")) == 2);
  // --out missing
  write_text(s.path("ok.json"), "{}");
  CHECK(run_cli("trajectory --config " + s.path("ok.json")) == 2);
}

TEST_CASE("trajectory writes the pose file with every view") {
  const Scratch s("traj");
  write_text(s.path("cfg.json"), kTinyConfig);
  REQUIRE(run_cli("trajectory --config " + s.path("cfg.json") + " --out " +
                  s.path("out")) == 0);

  std::ifstream in(s.path("out/poses.json"));
  const auto j = nlohmann::json::parse(in);
  REQUIRE(j.is_array());
  CHECK(j.size() == 8);  // 4 mains + 4 interpolated (n=1)
  int mains = 0;
  for (const auto& p : j)
    if (p.at("role").get<std::string>().rfind("main:", 0) == 0) ++mains;
  CHECK(mains == 4);
}

TEST_CASE("render-gt produces image files per view and is deterministic") {
  const Scratch s("render");
  // jitter on so the seed actually matters
  std::string cfg(kTinyConfig);
  cfg.replace(cfg.find("\"n_samples\": 24"), 15, "\"n_samples\": 24, \"jitter\": true");
  write_text(s.path("cfg.json"), cfg);

  REQUIRE(run_cli("render-gt --config " + s.path("cfg.json") + " --out " +
                  s.path("a") + " --seed 7") == 0);
  REQUIRE(run_cli("render-gt --config " + s.path("cfg.json") + " --out " +
                  s.path("b") + " --seed 7") == 0);
  REQUIRE(run_cli("render-gt --config " + s.path("cfg.json") + " --out " +
                  s.path("c") + " --seed 8") == 0);

  for (const char* leaf :
       {"view_000.ppm", "view_000_depth.pfm", "view_000_normal.pfm",
        "view_000_mask.pgm", "view_007.ppm", "poses.json"})
    CHECK(fs::exists(s.path("a") + "/" + leaf));

  // same config+seed -> byte identical; different seed -> different pixels
  CHECK(read_bytes(s.path("a/view_003.ppm")) == read_bytes(s.path("b/view_003.ppm")));
  CHECK(read_bytes(s.path("a/view_003.ppm")) != read_bytes(s.path("c/view_003.ppm")));
}

TEST_CASE("reconstruct, extract and eval chain on a tiny budget") {
  const Scratch s("chain");
  write_text(s.path("cfg.json"), kTinyConfig);
  const std::string common =
      " --config " + s.path("cfg.json") + " --out " + s.path("out");

  REQUIRE(run_cli("reconstruct" + common) == 0);
  CHECK(fs::exists(s.path("out/field.bin")));
  CHECK(fs::exists(s.path("out/field.json")));
  CHECK(fs::exists(s.path("out/loss_history.csv")));
  CHECK(fs::exists(s.path("out/reconstruct.json")));

  REQUIRE(run_cli("extract" + common) == 0);
  CHECK(fs::exists(s.path("out/mesh.obj")));
  CHECK(fs::exists(s.path("out/mesh.ply")));

  REQUIRE(run_cli("eval" + common) == 0);
  const auto j = nlohmann::json::parse(std::ifstream(s.path("out/eval.json")));
  for (const char* key :
       {"chamfer", "volume_iou", "f_score", "psnr_mean", "ssim_mean"})
    CHECK(j.contains(key));
  // 3 rings x 8 azimuths in the view table
  std::ifstream csv(s.path("out/eval_views.csv"));
  int lines = 0;
  for (std::string line; std::getline(csv, line);) ++lines;
  CHECK(lines == 25);  // header + 24 views

  // the loss history really logs every step
  std::ifstream hist(s.path("out/loss_history.csv"));
  int hist_lines = 0;
  for (std::string line; std::getline(hist, line);) ++hist_lines;
  CHECK(hist_lines == 41);  // header + 40 steps

  // extract without a prior reconstruct -> io error
  const Scratch empty("chain_empty");
  write_text(empty.path("cfg.json"), kTinyConfig);
  CHECK(run_cli("extract --config " + empty.path("cfg.json") + " --out " +
                empty.path("out")) == 4);
}

TEST_CASE("dvi train and sample round trip") {
  const Scratch s("dvi");
  write_text(s.path("cfg.json"), kTinyConfig);
  const std::string common =
      " --config " + s.path("cfg.json") + " --out " + s.path("out");

  REQUIRE(run_cli("dvi-train" + common) == 0);
  CHECK(fs::exists(s.path("out/dvi.bin")));
  CHECK(fs::exists(s.path("out/dvi.json")));
  std::ifstream csv(s.path("out/dvi_loss.csv"));
  int lines = 0;
  for (std::string line; std::getline(csv, line);) ++lines;
  CHECK(lines == 31);  // header + 30 steps

  REQUIRE(run_cli("dvi-sample" + common) == 0);
  // one sampled image per interpolated slot on the trajectory
  int samples = 0;
  for (const auto& e : fs::directory_iterator(s.path("out")))
    if (e.path().filename().string().rfind("dvi_sample_", 0) == 0) ++samples;
  CHECK(samples == 4);

  // sampling without a checkpoint -> io error
  const Scratch fresh("dvi_fresh");
  write_text(fresh.path("cfg.json"), kTinyConfig);
  CHECK(run_cli("dvi-sample --config " + fresh.path("cfg.json") + " --out " +
                fresh.path("out")) == 4);
}

TEST_CASE("reconstruct is deterministic for a fixed seed") {
  const Scratch s("determinism");
  write_text(s.path("cfg.json"), kTinyConfig);

  REQUIRE(run_cli("reconstruct --config " + s.path("cfg.json") + " --out " +
                  s.path("a")) == 0);
  REQUIRE(run_cli("reconstruct --config " + s.path("cfg.json") + " --out " +
                  s.path("b")) == 0);
  REQUIRE(run_cli("reconstruct --config " + s.path("cfg.json") + " --out " +
                  s.path("c") + " --seed 99") == 0);

  CHECK(read_bytes(s.path("a/field.bin")) == read_bytes(s.path("b/field.bin")));
  CHECK(read_bytes(s.path("a/loss_history.csv")) ==
        read_bytes(s.path("b/loss_history.csv")));
  // a different seed must actually change the fit
  CHECK(read_bytes(s.path("a/field.bin")) != read_bytes(s.path("c/field.bin")));
}
