// SPDX-License-Identifier: Apache-2.0
#include "cdi3d/config.hpp"

#include <fstream>
#include <set>

#include "cdi3d/errors.hpp"

namespace cdi3d {

void DviConfig::validate() const {
  if (timesteps < 1 || beta_start <= 0.0 || beta_end < beta_start ||
      beta_end >= 1.0 || image_size < 1 || channels < 1 || t_embed_dim < 1 ||
      cond_feature_dim < 1 || train_steps < 0 || batch_size < 1 || lr <= 0.0)
    throw ConfigError("dvi config: out-of-range value");
}

void FusionConfig::validate() const {
  if (dim < 1 || heads < 1 || dim % heads != 0 || patch_size < 1)
    throw ConfigError("fusion config: dim must be positive and divisible by heads");
}

void TriplaneConfig::validate() const {
  if (resolution < 2 || features < 1)
    throw ConfigError("triplane config: resolution >= 2 and features >= 1");
  for (int h : decoder_hidden)
    if (h < 1) throw ConfigError("triplane config: hidden sizes must be positive");
  if (extract_grid < 2 || iso_fraction <= 0.0 || iso_fraction >= 1.0)
    throw ConfigError(
        "triplane config: extract_grid >= 2 and iso_fraction in (0,1)");
}

ShapeKind parse_shape_kind(const std::string& name) {
  if (name == "sphere") return ShapeKind::Sphere;
  if (name == "torus") return ShapeKind::Torus;
  if (name == "box") return ShapeKind::Box;
  throw ConfigError("unknown shape kind: " + name);
}

namespace {

// Tracks which keys a section consumed; anything left over is a config error.
class Section {
 public:
  Section(const nlohmann::json& j, std::string path)
      : json_(j), path_(std::move(path)) {
    if (!json_.is_object())
      throw ConfigError("config section " + path_ + " must be an object");
  }

  template <typename T>
  T value(const char* key, const T& def) {
    seen_.insert(key);
    if (!json_.contains(key)) return def;
    try {
      return json_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config key " + path_ + "." + key + " has wrong type");
    }
  }

  bool has_key(const char* key) const { return json_.contains(key); }

  nlohmann::json sub(const char* key) {
    seen_.insert(key);
    if (!json_.contains(key)) return nlohmann::json::object();
    return json_.at(key);
  }

  void finish() const {
    for (auto it = json_.begin(); it != json_.end(); ++it)
      if (!seen_.count(it.key()))
        throw ConfigError("unknown config key: " + path_ + "." + it.key());
  }

 private:
  const nlohmann::json& json_;
  std::string path_;
  std::set<std::string> seen_;
};

Eigen::Vector3d vec3(Section& s, const char* key, const Eigen::Vector3d& def) {
  const std::vector<double> d = {def[0], def[1], def[2]};
  const std::vector<double> v = s.value<std::vector<double>>(key, d);
  if (v.size() != 3)
    throw ConfigError(std::string("config key ") + key + " needs 3 numbers");
  return {v[0], v[1], v[2]};
}

TrajectoryConfig parse_trajectory(const nlohmann::json& j) {
  Section s(j, "trajectory");
  TrajectoryConfig c;
  c.num_main_views = s.value("num_main_views", c.num_main_views);
  c.num_interp = s.value("num_interp", c.num_interp);
  c.radius = s.value("radius", c.radius);
  c.interp_elevation_pattern =
      s.value("interp_elevation_pattern", c.interp_elevation_pattern);
  s.finish();
  c.validate();
  return c;
}

DviConfig parse_dvi(const nlohmann::json& j) {
  Section s(j, "dvi");
  DviConfig c;
  c.timesteps = s.value("timesteps", c.timesteps);
  c.beta_start = s.value("beta_start", c.beta_start);
  c.beta_end = s.value("beta_end", c.beta_end);
  c.image_size = s.value("image_size", c.image_size);
  c.channels = s.value("channels", c.channels);
  c.hidden = s.value("hidden", c.hidden);
  c.t_embed_dim = s.value("t_embed_dim", c.t_embed_dim);
  c.cond_feature_dim = s.value("cond_feature_dim", c.cond_feature_dim);
  c.train_steps = s.value("train_steps", c.train_steps);
  c.batch_size = s.value("batch_size", c.batch_size);
  c.lr = s.value("lr", c.lr);
  s.finish();
  c.validate();
  return c;
}

FusionConfig parse_fusion(const nlohmann::json& j) {
  Section s(j, "fusion");
  FusionConfig c;
  c.dim = s.value("dim", c.dim);
  c.heads = s.value("heads", c.heads);
  c.patch_size = s.value("patch_size", c.patch_size);
  s.finish();
  c.validate();
  return c;
}

TriplaneConfig parse_triplane(const nlohmann::json& j) {
  Section s(j, "triplane");
  TriplaneConfig c;
  c.resolution = s.value("resolution", c.resolution);
  c.features = s.value("features", c.features);
  c.decoder_hidden = s.value("decoder_hidden", c.decoder_hidden);
  c.extract_grid = s.value("extract_grid", c.extract_grid);
  c.iso_fraction = s.value("iso_fraction", c.iso_fraction);
  s.finish();
  c.validate();
  return c;
}

AnalyticShape parse_shape(const nlohmann::json& j) {
  Section s(j, "render.shape");
  const std::string kind = s.value<std::string>("kind", "sphere");
  AnalyticShape c = make_shape(parse_shape_kind(kind));
  c.radius = s.value("radius", c.radius);
  c.major_radius = s.value("major_radius", c.major_radius);
  c.minor_radius = s.value("minor_radius", c.minor_radius);
  c.half_extents = vec3(s, "half_extents", c.half_extents);
  c.sigma_max = s.value("sigma_max", c.sigma_max);
  c.edge_width = s.value("edge_width", c.edge_width);
  c.rgb = vec3(s, "rgb", c.rgb);
  s.finish();
  if (c.sigma_max <= 0.0 || c.edge_width <= 0.0 || c.radius <= 0.0 ||
      c.major_radius <= 0.0 || c.minor_radius <= 0.0)
    throw ConfigError("render.shape: sizes must be positive");
  return c;
}

RenderConfig parse_render(const nlohmann::json& j, AnalyticShape& shape) {
  Section s(j, "render");
  RenderConfig c;
  c.width = s.value("width", c.width);
  c.height = s.value("height", c.height);
  c.fov_deg = s.value("fov_deg", c.fov_deg);
  c.n_samples = s.value("n_samples", c.n_samples);
  c.margin = s.value("margin", c.margin);
  c.background = vec3(s, "background", c.background);
  c.jitter = s.value("jitter", c.jitter);
  c.normal_step = s.value("normal_step", c.normal_step);
  shape = parse_shape(s.sub("shape"));
  s.finish();
  if (c.width < 1 || c.height < 1 || c.n_samples < 1 || c.margin <= 0.0 ||
      c.fov_deg <= 0.0 || c.fov_deg >= 180.0 || c.normal_step <= 0.0)
    throw ConfigError("render config: out-of-range value");
  return c;
}

LossWeights parse_weights(const nlohmann::json& j) {
  Section s(j, "reconstruct.weights");
  LossWeights w;
  w.lambda_rgb = s.value("rgb", w.lambda_rgb);
  w.lambda_lpips = s.value("lpips", w.lambda_lpips);
  w.lambda_mask = s.value("mask", w.lambda_mask);
  w.lambda_depth = s.value("depth", w.lambda_depth);
  w.lambda_normal = s.value("normal", w.lambda_normal);
  w.lambda_reg = s.value("reg", w.lambda_reg);
  s.finish();
  if (w.lambda_rgb < 0 || w.lambda_lpips < 0 || w.lambda_mask < 0 ||
      w.lambda_depth < 0 || w.lambda_normal < 0 || w.lambda_reg < 0)
    throw ConfigError("reconstruct.weights: weights must be non-negative");
  return w;
}

void parse_ablation(const nlohmann::json& j, RunConfig& cfg) {
  Section s(j, "reconstruct.ablation");
  AblationConfig& a = cfg.ablation;
  a.image_size = s.value("image_size", a.image_size);
  a.gt_grid = s.value("gt_grid", a.gt_grid);
  a.mesh_grid = s.value("mesh_grid", a.mesh_grid);
  a.iou_resolution = s.value("iou_resolution", a.iou_resolution);
  a.chamfer_samples = s.value("chamfer_samples", a.chamfer_samples);
  a.recon.steps = s.value("steps", a.recon.steps);
  a.recon.rays_per_step = s.value("rays_per_step", a.recon.rays_per_step);
  a.recon.n_samples = s.value("n_samples", a.recon.n_samples);
  a.recon.resolution = s.value("resolution", a.recon.resolution);
  const std::vector<std::string> names =
      s.value<std::vector<std::string>>("shapes", {"sphere", "torus"});
  cfg.ablation_shapes.clear();
  for (const auto& n : names) cfg.ablation_shapes.push_back(parse_shape_kind(n));
  s.finish();
}

void parse_reconstruct(const nlohmann::json& j, RunConfig& cfg) {
  Section s(j, "reconstruct");
  ReconstructConfig c;
  c.resolution = cfg.triplane.resolution;
  c.features = cfg.triplane.features;
  c.decoder_hidden = cfg.triplane.decoder_hidden;
  c.patch_size = cfg.fusion.patch_size;
  c.fov_deg = cfg.render.fov_deg;
  c.background = cfg.render.background;

  c.steps = s.value("steps", c.steps);
  c.rays_per_step = s.value("rays_per_step", c.rays_per_step);
  c.probes_per_step = s.value("probes_per_step", c.probes_per_step);
  c.probe_refresh = s.value("probe_refresh", c.probe_refresh);
  c.probe_pool = s.value("probe_pool", c.probe_pool);
  c.lr = s.value("lr", c.lr);
  c.n_samples = s.value("n_samples", c.n_samples);
  c.margin = s.value("margin", c.margin);
  c.init = s.value("init", c.init);
  c.normal_step = s.value("normal_step", c.normal_step);
  c.divergence_factor = s.value("divergence_factor", c.divergence_factor);
  c.log_every = s.value("log_every", c.log_every);
  c.weights = parse_weights(s.sub("weights"));

  cfg.reconstruct = c;
  cfg.ablation.recon = c;
  cfg.ablation.recon.steps = 400;  // ablation default budget, overridable
  cfg.ablation.trajectory = cfg.trajectory;
  parse_ablation(s.sub("ablation"), cfg);
  s.finish();
  cfg.reconstruct.validate();
  cfg.ablation.recon.validate();
}

MetricsConfig parse_metrics(const nlohmann::json& j) {
  Section s(j, "metrics");
  MetricsConfig c;
  c.chamfer_samples = s.value("chamfer_samples", c.chamfer_samples);
  c.fscore_tau = s.value("fscore_tau", c.fscore_tau);
  c.iou_resolution = s.value("iou_resolution", c.iou_resolution);
  c.eval_resolution = s.value("eval_resolution", c.eval_resolution);
  c.eval_radius = s.value("eval_radius", c.eval_radius);
  c.eval_elevations_deg =
      s.value("eval_elevations_deg", c.eval_elevations_deg);
  c.eval_azimuth_count = s.value("eval_azimuth_count", c.eval_azimuth_count);
  c.eval_fov_deg = s.value("eval_fov_deg", c.eval_fov_deg);
  s.finish();
  c.validate();
  return c;
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& j) {
  Section top(j, "<root>");
  RunConfig cfg;
  cfg.trajectory = parse_trajectory(top.sub("trajectory"));
  cfg.dvi = parse_dvi(top.sub("dvi"));
  cfg.fusion = parse_fusion(top.sub("fusion"));
  cfg.triplane = parse_triplane(top.sub("triplane"));
  cfg.render = parse_render(top.sub("render"), cfg.shape);
  parse_reconstruct(top.sub("reconstruct"), cfg);
  cfg.metrics = parse_metrics(top.sub("metrics"));
  if (top.has_key("seed"))
    cfg.seed = top.value<uint64_t>("seed", 0);
  else
    top.value<uint64_t>("seed", 0);  // mark consumed either way
  top.finish();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return parse_run_config(j);
}

}  // namespace cdi3d
