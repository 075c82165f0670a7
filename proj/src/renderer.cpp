// SPDX-License-Identifier: Apache-2.0
#include "cdi3d/renderer.hpp"

#include <cmath>

#include "cdi3d/errors.hpp"
#include "cdi3d/threading.hpp"

namespace cdi3d {

namespace {
constexpr double kAccEps = 1e-6;
constexpr double kPi = 3.14159265358979323846;
}  // namespace

Intrinsics make_intrinsics(int width, int height, double fov_deg) {
  if (width < 1 || height < 1 || fov_deg <= 0.0 || fov_deg >= 180.0)
    throw ConfigError("make_intrinsics: bad image size or fov");
  Intrinsics intr;
  intr.width = width;
  intr.height = height;
  intr.focal = 0.5 * height / std::tan(0.5 * fov_deg * kPi / 180.0);
  intr.cx = 0.5 * width;
  intr.cy = 0.5 * height;
  return intr;
}

Ray ray_for_pixel(const CameraPose& pose, const Intrinsics& intr, int x, int y) {
  Eigen::Vector3d dir_cam((x + 0.5 - intr.cx) / intr.focal,
                          (y + 0.5 - intr.cy) / intr.focal, 1.0);
  Ray ray;
  ray.origin = pose.center();
  ray.direction = (pose.rotation.transpose() * dir_cam).normalized();
  return ray;
}

std::vector<Ray> rays_for_pose(const CameraPose& pose, const Intrinsics& intr) {
  std::vector<Ray> rays;
  rays.reserve(static_cast<size_t>(intr.width) * intr.height);
  for (int y = 0; y < intr.height; ++y)
    for (int x = 0; x < intr.width; ++x)
      rays.push_back(ray_for_pixel(pose, intr, x, y));
  return rays;
}

RayQuadrature make_quadrature(double near, double far, int n, Rng* jitter) {
  if (!(far > near) || n < 1)
    throw ConfigError("make_quadrature: need far > near and n >= 1");
  RayQuadrature q;
  q.delta = (far - near) / n;
  q.t.resize(n);
  for (int i = 0; i < n; ++i) {
    const double u = jitter ? jitter->uniform() : 0.5;
    q.t[i] = near + (i + u) * q.delta;
  }
  return q;
}

RayResult composite(const std::vector<double>& sigma,
                    const std::vector<Eigen::Vector3d>& color,
                    const RayQuadrature& q, const Eigen::Vector3d& background) {
  const size_t n = q.t.size();
  RayResult r;
  double transmittance = 1.0;
  double depth_num = 0.0;
  for (size_t j = 0; j < n; ++j) {
    const double alpha = 1.0 - std::exp(-sigma[j] * q.delta);
    const double w = transmittance * alpha;
    r.rgb += w * color[j];
    r.acc += w;
    depth_num += w * q.t[j];
    transmittance *= 1.0 - alpha;
  }
  r.rgb += (1.0 - r.acc) * background;
  r.depth = r.acc < kAccEps ? 0.0 : depth_num / r.acc;
  return r;
}

CompositeGrads composite_backward(const std::vector<double>& sigma,
                                  const std::vector<Eigen::Vector3d>& color,
                                  const RayQuadrature& q,
                                  const Eigen::Vector3d& background,
                                  const Eigen::Vector3d& d_rgb, double d_depth,
                                  double d_acc) {
  const size_t n = q.t.size();
  CompositeGrads g;
  g.d_sigma.assign(n, 0.0);
  g.d_color.assign(n, Eigen::Vector3d::Zero());
  if (n == 0) return g;

  // Recompute weights and transmittances.
  std::vector<double> w(n), t_next(n);
  double transmittance = 1.0, acc = 0.0, depth_num = 0.0;
  for (size_t j = 0; j < n; ++j) {
    const double alpha = 1.0 - std::exp(-sigma[j] * q.delta);
    w[j] = transmittance * alpha;
    acc += w[j];
    depth_num += w[j] * q.t[j];
    transmittance *= 1.0 - alpha;
    t_next[j] = transmittance;  // T_{j+1}
  }
  const double depth = acc < kAccEps ? 0.0 : depth_num / acc;

  // dL/dw_j; the depth branch vanishes for near-empty rays to match the
  // forward cutoff.
  std::vector<double> d_w(n);
  for (size_t j = 0; j < n; ++j) {
    double v = d_rgb.dot(color[j]) - d_rgb.dot(background) + d_acc;
    if (acc >= kAccEps) v += d_depth * (q.t[j] - depth) / acc;
    d_w[j] = v;
    g.d_color[j] = d_rgb * w[j];
  }

  // dL/dsigma_i = delta * (d_w_i T_{i+1} - sum_{j>i} d_w_j w_j).
  double suffix = 0.0;
  for (size_t i = n; i-- > 0;) {
    g.d_sigma[i] = q.delta * (d_w[i] * t_next[i] - suffix);
    suffix += d_w[i] * w[i];
  }
  return g;
}

Eigen::Vector3d field_normal(const FieldFn& field, const Eigen::Vector3d& p,
                             double step) {
  Eigen::Vector3d grad;
  for (int a = 0; a < 3; ++a) {
    Eigen::Vector3d hi = p, lo = p;
    hi[a] += step;
    lo[a] -= step;
    grad[a] = (field(hi).density - field(lo).density) / (2.0 * step);
  }
  const double norm = grad.norm();
  if (norm < 1e-9) return Eigen::Vector3d::Zero();
  return -grad / norm;
}

RenderedView render_view(const FieldFn& field, const CameraPose& pose,
                         const RenderConfig& cfg, uint64_t jitter_seed) {
  const Intrinsics intr = make_intrinsics(cfg.width, cfg.height, cfg.fov_deg);
  const double near = std::max(pose.radius - cfg.margin, 1e-3);
  const double far = pose.radius + cfg.margin;

  RenderedView view;
  view.rgb = Image(cfg.height, cfg.width, 3);
  view.depth = Image(cfg.height, cfg.width, 1);
  view.normal = Image(cfg.height, cfg.width, 3);
  view.mask = Image(cfg.height, cfg.width, 1);

  const int n_pixels = cfg.width * cfg.height;
  const int n_threads = resolve_threads(cfg.threads);
  parallel_buckets(n_pixels, 64, n_threads, [&](int, int begin, int end) {
    std::vector<double> sigma(cfg.n_samples);
    std::vector<Eigen::Vector3d> color(cfg.n_samples);
    for (int pix = begin; pix < end; ++pix) {
      const int y = pix / cfg.width;
      const int x = pix % cfg.width;
      const Ray ray = ray_for_pixel(pose, intr, x, y);
      Rng jitter_rng(mix64(jitter_seed ^ (0x9e3779b97f4a7c15ull * (pix + 1))));
      RayQuadrature q =
          make_quadrature(near, far, cfg.n_samples, cfg.jitter ? &jitter_rng : nullptr);
      for (int j = 0; j < cfg.n_samples; ++j) {
        const FieldSample s = field(ray.origin + q.t[j] * ray.direction);
        sigma[j] = s.density;
        color[j] = s.rgb;
      }
      const RayResult r = composite(sigma, color, q, cfg.background);
      for (int c = 0; c < 3; ++c) view.rgb.at(y, x, c) = r.rgb[c];
      view.depth.at(y, x, 0) = r.depth;
      view.mask.at(y, x, 0) = r.acc;
      if (cfg.compute_normals && r.acc > cfg.mask_threshold) {
        const Eigen::Vector3d p_surf = ray.origin + r.depth * ray.direction;
        const Eigen::Vector3d nrm = field_normal(field, p_surf, cfg.normal_step);
        for (int c = 0; c < 3; ++c) view.normal.at(y, x, c) = nrm[c];
      }
    }
  });
  return view;
}

FieldFn field_from_triplane(const TriPlane& tp, const FieldDecoderParams& dec) {
  return [&tp, &dec](const Eigen::Vector3d& p) {
    return decode_field(dec, sample_triplane(tp, p));
  };
}

FieldFn field_from_shape(const AnalyticShape& shape) {
  return [shape](const Eigen::Vector3d& p) { return shape.sample(p); };
}

}  // namespace cdi3d
