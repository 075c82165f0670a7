// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "cdi3d/config.hpp"
#include "cdi3d/errors.hpp"
#include "cdi3d/serialize.hpp"

using namespace cdi3d;

namespace {

struct TempBase {
  std::string base;
  explicit TempBase(std::string b) : base(std::move(b)) {}
  ~TempBase() {
    std::remove((base + ".bin").c_str());
    std::remove((base + ".json").c_str());
  }
};

}  // namespace

TEST_CASE("tensor stores round-trip bit for bit") {
  Rng rng(1);
  TensorStore store;
  Eigen::MatrixXd m = Eigen::MatrixXd::NullaryExpr(
      5, 7, [&](Eigen::Index, Eigen::Index) { return rng.gaussian(); });
  Eigen::VectorXd v = Eigen::VectorXd::NullaryExpr(
      11, [&](Eigen::Index) { return rng.gaussian(); });
  store.add_matrix("weights", m);
  store.add_vector("bias", v);
  store.meta["kind"] = "unit-test";
  store.meta["answer"] = 42;

  const TempBase tmp("serialize_roundtrip_test");
  save_store(tmp.base, store);

  const TensorStore loaded = load_store(tmp.base);
  CHECK(loaded.meta.at("kind") == "unit-test");
  CHECK(loaded.meta.at("answer") == 42);
  REQUIRE(loaded.has("weights"));
  REQUIRE(loaded.has("bias"));
  const Eigen::MatrixXd m2 = loaded.matrix("weights");
  REQUIRE(m2.rows() == 5);
  REQUIRE(m2.cols() == 7);
  CHECK(m2.cwiseEqual(m).all());  // exact doubles
  CHECK(loaded.vector("bias").cwiseEqual(v).all());

  CHECK_THROWS_AS(loaded.vector("weights"), IoError);  // rank mismatch
  CHECK_THROWS_AS(loaded.matrix("bias"), IoError);
  CHECK_THROWS_AS(loaded.vector("missing"), IoError);
  CHECK_THROWS_AS(load_store("no_such_base_path"), IoError);
}

TEST_CASE("corrupt sidecars are rejected") {
  const TempBase tmp("serialize_corrupt_test");
  {
    std::ofstream bin(tmp.base + ".bin", std::ios::binary);
    bin << "junk";
    std::ofstream json(tmp.base + ".json");
    json << "{not valid json";
  }
  CHECK_THROWS_AS(load_store(tmp.base), IoError);
}

TEST_CASE("field parameters round-trip and decode identically") {
  Rng rng(5);
  FieldParams fp;
  fp.planes = TriPlane::zeros(6, 4);
  for (auto& plane : fp.planes.planes)
    plane = Eigen::MatrixXd::NullaryExpr(
        36, 4, [&](Eigen::Index, Eigen::Index) { return rng.gaussian(); });
  fp.decoder = make_field_decoder(12, {10, 6}, rng);

  const TempBase tmp("serialize_field_test");
  save_field_params(tmp.base, fp);
  const FieldParams loaded = load_field_params(tmp.base);

  CHECK(loaded.planes.resolution == 6);
  CHECK(loaded.planes.features == 4);
  CHECK(loaded.flatten() == fp.flatten());

  const Eigen::Vector3d p{0.3, -0.2, 0.6};
  const FieldSample a = decode_field(fp.decoder, sample_triplane(fp.planes, p));
  const FieldSample b =
      decode_field(loaded.decoder, sample_triplane(loaded.planes, p));
  CHECK(a.density == b.density);
  CHECK(a.rgb.cwiseEqual(b.rgb).all());
}

TEST_CASE("dvi checkpoints round-trip and predict identically") {
  Rng rng(7);
  DviCheckpoint ck;
  ck.schedule = make_schedule(40, 1e-3, 0.03);
  ck.encoder = make_condition_encoder(4, 4, 3, 6, rng);
  ck.denoiser = make_denoiser(4, 4, 3, 8, 9, {16}, rng);

  const TempBase tmp("serialize_dvi_test");
  save_dvi_checkpoint(tmp.base, ck);
  const DviCheckpoint loaded = load_dvi_checkpoint(tmp.base);

  CHECK(loaded.schedule.steps == 40);
  CHECK(loaded.schedule.beta == ck.schedule.beta);
  CHECK(loaded.schedule.alpha_bar == ck.schedule.alpha_bar);

  Image z(4, 4, 3), ref(4, 4, 3);
  for (auto& x : z.data) x = rng.gaussian();
  for (auto& x : ref.data) x = rng.gaussian();
  Image cond_img(4, 4, 3, 0.5);
  const ConditionEmbedding cond =
      embed_condition(ck.encoder, cond_img, {15.0, -30.0, 0.0});
  const ConditionEmbedding cond2 =
      embed_condition(loaded.encoder, cond_img, {15.0, -30.0, 0.0});
  CHECK(cond.values.cwiseEqual(cond2.values).all());

  const Image e1 = predict_noise(ck.denoiser, z, ref, 13, ck.schedule, cond);
  const Image e2 =
      predict_noise(loaded.denoiser, z, ref, 13, loaded.schedule, cond2);
  CHECK(e1.data == e2.data);
}

TEST_CASE("run configs parse with strict key checking") {
  const auto j = nlohmann::json::parse(R"({
    "trajectory": {"num_main_views": 4, "num_interp": 2,
                   "interp_elevation_pattern": [30.0, -30.0]},
    "dvi": {"timesteps": 100, "image_size": 8},
    "fusion": {"dim": 12, "heads": 2, "patch_size": 4},
    "triplane": {"resolution": 16, "features": 8},
    "render": {"width": 32, "height": 32, "shape": {"kind": "torus"}},
    "reconstruct": {"steps": 50, "weights": {"rgb": 2.0}},
    "metrics": {"iou_resolution": 32},
    "seed": 99
  })");
  const RunConfig cfg = parse_run_config(j);
  CHECK(cfg.trajectory.num_interp == 2);
  CHECK(cfg.dvi.timesteps == 100);
  CHECK(cfg.fusion.heads == 2);
  CHECK(cfg.triplane.resolution == 16);
  CHECK(cfg.shape.kind == ShapeKind::Torus);
  CHECK(cfg.reconstruct.steps == 50);
  CHECK(cfg.reconstruct.weights.lambda_rgb == 2.0);
  CHECK(cfg.reconstruct.weights.lambda_depth == 0.5);  // default kept
  CHECK(cfg.reconstruct.resolution == 16);             // copied from triplane
  CHECK(cfg.metrics.iou_resolution == 32);
  REQUIRE(cfg.seed.has_value());
  CHECK(*cfg.seed == 99);

  // defaults throughout
  const RunConfig defaults = parse_run_config(nlohmann::json::object());
  CHECK(defaults.trajectory.num_main_views == 4);
  CHECK(defaults.reconstruct.weights.lambda_normal == 0.2);
  CHECK(defaults.reconstruct.weights.lambda_reg == 0.01);
  CHECK_FALSE(defaults.seed.has_value());
}

TEST_CASE("unknown or ill-typed config keys fail loudly") {
  CHECK_THROWS_AS(parse_run_config(nlohmann::json::parse(
                      R"({"trajctory": {}})")),  // typo at top level
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config(nlohmann::json::parse(
                      R"({"trajectory": {"num_mains": 4}})")),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config(nlohmann::json::parse(
                      R"({"render": {"width": "wide"}})")),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config(nlohmann::json::parse(
                      R"({"render": {"shape": {"kind": "dodecahedron"}}})")),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config(nlohmann::json::parse(
                      R"({"reconstruct": {"weights": {"rgb": -1.0}}})")),
                  ConfigError);
  CHECK_THROWS_AS(load_run_config("missing_config_file.json"), IoError);
}

TEST_CASE("loss weight defaults match the documented mix") {
  const LossWeights w;
  CHECK(w.lambda_rgb == 1.0);
  CHECK(w.lambda_lpips == 2.0);  // reserved: no perceptual term at this scale
  CHECK(w.lambda_mask == 1.0);
  CHECK(w.lambda_depth == 0.5);
  CHECK(w.lambda_normal == 0.2);
  CHECK(w.lambda_reg == 0.01);
}
