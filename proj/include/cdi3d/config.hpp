// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "cdi3d/ablation.hpp"
#include "cdi3d/camera.hpp"
#include "cdi3d/metrics.hpp"
#include "cdi3d/reconstruct.hpp"
#include "cdi3d/renderer.hpp"
#include "cdi3d/triplane.hpp"

namespace cdi3d {

struct DviConfig {
  int timesteps = 200;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  int image_size = 16;
  int channels = 3;
  std::vector<int> hidden = {128};
  int t_embed_dim = 16;
  int cond_feature_dim = 16;
  int train_steps = 400;
  int batch_size = 8;
  double lr = 1e-3;

  void validate() const;
};

struct FusionConfig {
  int dim = 16;
  int heads = 1;
  int patch_size = 16;

  void validate() const;
};

struct TriplaneConfig {
  int resolution = 32;
  int features = 16;
  std::vector<int> decoder_hidden = {32};
  int extract_grid = 64;      // marching-cubes grid used by `extract`
  double iso_fraction = 0.5;  // iso level as a fraction of the sampled max

  void validate() const;
};

// Parsed run file. Sections: trajectory, dvi, fusion, triplane, render,
// reconstruct, metrics, plus a top-level seed. Unknown keys are rejected at
// every level so typos fail loudly instead of silently using defaults.
struct RunConfig {
  TrajectoryConfig trajectory;
  DviConfig dvi;
  FusionConfig fusion;
  TriplaneConfig triplane;
  RenderConfig render;
  AnalyticShape shape;  // render.shape subsection
  ReconstructConfig reconstruct;
  AblationConfig ablation;  // reconstruct.ablation subsection
  std::vector<ShapeKind> ablation_shapes{ShapeKind::Sphere, ShapeKind::Torus};
  MetricsConfig metrics;
  std::optional<uint64_t> seed;
};

ShapeKind parse_shape_kind(const std::string& name);

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);  // IoError / ConfigError

}  // namespace cdi3d
