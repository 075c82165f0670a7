// SPDX-License-Identifier: Apache-2.0
#include "cdi3d/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "cdi3d/errors.hpp"
#include "cdi3d/log.hpp"
#include "cdi3d/rng.hpp"

namespace cdi3d {

void SupervisionSet::validate() const {
  if (poses.empty() || poses.size() != views.size())
    throw ConfigError("supervision: need matching poses and views");
  for (const auto& v : views) {
    if (v.rgb.channels != 3 || v.depth.channels != 1 || v.mask.channels != 1 ||
        v.normal.channels != 3 || !v.rgb.same_shape(v.normal) ||
        v.depth.height != v.rgb.height || v.depth.width != v.rgb.width ||
        !v.depth.same_shape(v.mask))
      throw ConfigError("supervision: inconsistent view shapes");
    if (v.rgb.height != views[0].rgb.height ||
        v.rgb.width != views[0].rgb.width)
      throw ConfigError("supervision: views must share one resolution");
  }
}

void ReconstructConfig::validate() const {
  if (resolution < 2 || features < 1 || steps < 0 || rays_per_step < 1 ||
      n_samples < 1 || lr <= 0.0 || margin <= 0.0 || probe_refresh < 1 ||
      probes_per_step < 0 || probe_pool < 0 || patch_size < 1 ||
      divergence_factor <= 1.0)
    throw ConfigError("reconstruct config: out-of-range value");
  if (init != "tokens" && init != "zeros")
    throw ConfigError("reconstruct config: init must be 'tokens' or 'zeros'");
}

LossTerms compute_loss(const RenderedView& pred, const RenderedView& gt,
                       const LossWeights& w, const TriPlane* planes) {
  if (!pred.rgb.same_shape(gt.rgb) || !pred.depth.same_shape(gt.depth) ||
      !pred.mask.same_shape(gt.mask) || !pred.normal.same_shape(gt.normal))
    throw ConfigError("compute_loss: view shape mismatch");

  LossTerms t;
  for (size_t i = 0; i < pred.rgb.data.size(); ++i) {
    const double d = pred.rgb.data[i] - gt.rgb.data[i];
    t.rgb += d * d;
  }
  t.rgb /= static_cast<double>(pred.rgb.data.size());

  for (size_t i = 0; i < pred.mask.data.size(); ++i) {
    const double d = pred.mask.data[i] - gt.mask.data[i];
    t.mask += d * d;
  }
  t.mask /= static_cast<double>(pred.mask.data.size());

  long masked = 0, with_normal = 0;
  for (int y = 0; y < gt.depth.height; ++y) {
    for (int x = 0; x < gt.depth.width; ++x) {
      if (gt.mask.at(y, x, 0) <= 0.5) continue;
      ++masked;
      t.depth += std::abs(pred.depth.at(y, x, 0) - gt.depth.at(y, x, 0));
      double dot = 0.0, gt_sq = 0.0;
      for (int c = 0; c < 3; ++c) {
        dot += pred.normal.at(y, x, c) * gt.normal.at(y, x, c);
        gt_sq += gt.normal.at(y, x, c) * gt.normal.at(y, x, c);
      }
      if (gt_sq < 0.25) continue;  // degenerate ground truth: no supervision
      ++with_normal;
      t.normal += 1.0 - dot;
    }
  }
  if (masked > 0) t.depth /= static_cast<double>(masked);
  if (with_normal > 0) t.normal /= static_cast<double>(with_normal);

  if (planes)
    t.reg = planes->squared_norm() / static_cast<double>(planes->param_count());

  t.total = w.lambda_rgb * t.rgb + w.lambda_depth * t.depth +
            w.lambda_normal * t.normal + w.lambda_mask * t.mask +
            w.lambda_reg * t.reg;
  return t;
}

int FieldParams::param_count() const {
  return planes.param_count() + decoder.mlp.param_count();
}

std::vector<double> FieldParams::flatten() const {
  std::vector<double> flat(param_count());
  size_t k = 0;
  for (const auto& p : planes.planes)
    for (Eigen::Index i = 0; i < p.size(); ++i) flat[k++] = p.data()[i];
  decoder.mlp.flatten_to(std::span(flat).subspan(k));
  return flat;
}

void FieldParams::unflatten(std::span<const double> flat) {
  if (static_cast<int>(flat.size()) != param_count())
    throw NumericError("FieldParams::unflatten: size mismatch");
  size_t k = 0;
  for (auto& p : planes.planes)
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = flat[k++];
  decoder.mlp.unflatten_from(flat.subspan(k));
}

FieldGrads FieldGrads::zeros_like(const FieldParams& p) {
  FieldGrads g;
  for (int i = 0; i < 3; ++i)
    g.d_planes[i] = Eigen::MatrixXd::Zero(p.planes.planes[i].rows(),
                                          p.planes.planes[i].cols());
  g.d_decoder = Mlp::Grads::zeros_like(p.decoder.mlp);
  return g;
}

std::vector<double> FieldGrads::flatten() const {
  size_t n = 0;
  for (const auto& p : d_planes) n += p.size();
  for (size_t l = 0; l < d_decoder.d_weights.size(); ++l)
    n += d_decoder.d_weights[l].size() + d_decoder.d_biases[l].size();
  std::vector<double> flat(n);
  size_t k = 0;
  for (const auto& p : d_planes)
    for (Eigen::Index i = 0; i < p.size(); ++i) flat[k++] = p.data()[i];
  Mlp::flatten_grads(d_decoder, std::span(flat).subspan(k));
  return flat;
}

namespace {

struct PixelRef {
  const RenderedView* view;
  CameraPose pose;
  int x, y;
};

PixelRef resolve_ray(const SupervisionSet& sup, const RaySpec& r) {
  if (r.view < 0 || r.view >= sup.view_count())
    throw ConfigError("ray spec: view out of range");
  const RenderedView& v = sup.views[r.view];
  if (r.pixel < 0 || r.pixel >= v.rgb.width * v.rgb.height)
    throw ConfigError("ray spec: pixel out of range");
  return {&v, sup.poses[r.view], r.pixel % v.rgb.width, r.pixel / v.rgb.width};
}

// One code path for value and (optionally) gradient.
LossTerms loss_impl(const FieldParams& fp, const SupervisionSet& sup,
                    const std::vector<RaySpec>& rays,
                    const std::vector<NormalProbe>& probes,
                    const ReconstructConfig& cfg, FieldGrads* grads) {
  sup.validate();
  cfg.validate();
  const int ns = cfg.n_samples;
  const int n_rays = static_cast<int>(rays.size());
  const int n_probes = static_cast<int>(probes.size());
  const int f3 = 3 * fp.planes.features;
  const double h = cfg.probe_step();
  const long total_samples = static_cast<long>(n_rays) * ns + 6L * n_probes;
  if (total_samples == 0) return {};

  const int width = sup.views[0].rgb.width;
  const int height = sup.views[0].rgb.height;
  const Intrinsics intr = make_intrinsics(width, height, cfg.fov_deg);

  // Gather every sample position: ray samples first, then probe offsets.
  Eigen::MatrixXd feats(f3, total_samples);
  std::vector<TriPlaneTaps> taps(grads ? total_samples : 0);
  std::vector<Ray> ray_geom(n_rays);
  std::vector<RayQuadrature> quad(n_rays);

  long col = 0;
  for (int r = 0; r < n_rays; ++r) {
    const PixelRef pix = resolve_ray(sup, rays[r]);
    ray_geom[r] = ray_for_pixel(pix.pose, intr, pix.x, pix.y);
    const double near = std::max(pix.pose.radius - cfg.margin, 1e-3);
    quad[r] = make_quadrature(near, pix.pose.radius + cfg.margin, ns, nullptr);
    for (int j = 0; j < ns; ++j, ++col)
      feats.col(col) = sample_triplane(
          fp.planes, ray_geom[r].origin + quad[r].t[j] * ray_geom[r].direction,
          grads ? &taps[col] : nullptr);
  }
  for (int k = 0; k < n_probes; ++k) {
    for (int a = 0; a < 3; ++a) {
      for (int s = 0; s < 2; ++s, ++col) {
        Eigen::Vector3d p = probes[k].position;
        p[a] += s == 0 ? h : -h;
        feats.col(col) =
            sample_triplane(fp.planes, p, grads ? &taps[col] : nullptr);
      }
    }
  }

  Mlp::BatchTrace trace;
  const Eigen::MatrixXd raw =
      fp.decoder.mlp.forward_batch(feats, grads ? &trace : nullptr);
  Eigen::ArrayXd density(total_samples);
  Eigen::MatrixXd color(3, total_samples);
  for (long b = 0; b < total_samples; ++b) {
    density[b] = softplus(raw(0, b));
    for (int c = 0; c < 3; ++c) color(c, b) = sigmoid(raw(1 + c, b));
  }

  Eigen::MatrixXd d_raw;
  if (grads) d_raw = Eigen::MatrixXd::Zero(4, total_samples);

  long masked = 0;
  for (int r = 0; r < n_rays; ++r) {
    const PixelRef pix = resolve_ray(sup, rays[r]);
    if (pix.view->mask.at(pix.y, pix.x, 0) > 0.5) ++masked;
  }

  LossTerms t;
  const LossWeights& w = cfg.weights;
  std::vector<double> sigma(ns);
  std::vector<Eigen::Vector3d> cols(ns);
  for (int r = 0; r < n_rays; ++r) {
    const long base = static_cast<long>(r) * ns;
    for (int j = 0; j < ns; ++j) {
      sigma[j] = density[base + j];
      cols[j] = color.col(base + j);
    }
    const RayResult res = composite(sigma, cols, quad[r], cfg.background);

    const PixelRef pix = resolve_ray(sup, rays[r]);
    Eigen::Vector3d gt_rgb;
    for (int c = 0; c < 3; ++c) gt_rgb[c] = pix.view->rgb.at(pix.y, pix.x, c);
    const double gt_depth = pix.view->depth.at(pix.y, pix.x, 0);
    const double gt_mask = pix.view->mask.at(pix.y, pix.x, 0);
    const bool in_mask = gt_mask > 0.5;

    const Eigen::Vector3d rgb_err = res.rgb - gt_rgb;
    t.rgb += rgb_err.squaredNorm();
    t.mask += (res.acc - gt_mask) * (res.acc - gt_mask);
    if (in_mask) t.depth += std::abs(res.depth - gt_depth);

    if (grads) {
      const Eigen::Vector3d d_rgb =
          w.lambda_rgb * 2.0 / (3.0 * n_rays) * rgb_err;
      const double d_acc =
          w.lambda_mask * 2.0 / n_rays * (res.acc - gt_mask);
      double d_depth = 0.0;
      if (in_mask && masked > 0 && res.depth != gt_depth)
        d_depth = w.lambda_depth / masked *
                  (res.depth > gt_depth ? 1.0 : -1.0);
      const CompositeGrads cg = composite_backward(
          sigma, cols, quad[r], cfg.background, d_rgb, d_depth, d_acc);
      for (int j = 0; j < ns; ++j) {
        const long b = base + j;
        d_raw(0, b) += cg.d_sigma[j] * sigmoid(raw(0, b));
        for (int c = 0; c < 3; ++c) {
          const double s = color(c, b);
          d_raw(1 + c, b) += cg.d_color[j][c] * s * (1.0 - s);
        }
      }
    }
  }
  t.rgb /= std::max(1, n_rays) * 3.0;
  t.mask /= std::max(1, n_rays);
  if (masked > 0) t.depth /= static_cast<double>(masked);

  const long probe_base = static_cast<long>(n_rays) * ns;
  for (int k = 0; k < n_probes; ++k) {
    const long b = probe_base + 6L * k;
    Eigen::Vector3d grad_sigma;
    for (int a = 0; a < 3; ++a)
      grad_sigma[a] = (density[b + 2 * a] - density[b + 2 * a + 1]) / (2.0 * h);
    const double norm = grad_sigma.norm();
    if (norm < 1e-9) {
      t.normal += 1.0;
      continue;
    }
    const Eigen::Vector3d n = -grad_sigma / norm;
    t.normal += 1.0 - n.dot(probes[k].gt_normal);

    if (grads) {
      // d(1 - n.g)/d grad_sigma = (I - u u^T) g / (|grad| * n_probes),
      // u = grad_sigma / |grad_sigma|.
      const Eigen::Vector3d u = grad_sigma / norm;
      const Eigen::Vector3d g_vec = probes[k].gt_normal;
      const Eigen::Vector3d d_grad = w.lambda_normal / n_probes *
                                     (g_vec - u * u.dot(g_vec)) / norm;
      for (int a = 0; a < 3; ++a) {
        const double d_sigma = d_grad[a] / (2.0 * h);
        d_raw(0, b + 2 * a) += d_sigma * sigmoid(raw(0, b + 2 * a));
        d_raw(0, b + 2 * a + 1) -= d_sigma * sigmoid(raw(0, b + 2 * a + 1));
      }
    }
  }
  if (n_probes > 0) t.normal /= static_cast<double>(n_probes);

  t.reg = fp.planes.squared_norm() / static_cast<double>(fp.planes.param_count());
  t.total = w.lambda_rgb * t.rgb + w.lambda_depth * t.depth +
            w.lambda_normal * t.normal + w.lambda_mask * t.mask +
            w.lambda_reg * t.reg;

  if (grads) {
    const Eigen::MatrixXd d_feats =
        fp.decoder.mlp.backward_batch(trace, d_raw, grads->d_decoder);
    for (long b = 0; b < total_samples; ++b)
      sample_triplane_backward(taps[b], fp.planes.features, d_feats.col(b),
                               grads->d_planes);
    const double reg_scale =
        w.lambda_reg * 2.0 / static_cast<double>(fp.planes.param_count());
    for (int i = 0; i < 3; ++i)
      grads->d_planes[i] += reg_scale * fp.planes.planes[i];
  }
  return t;
}

}  // namespace

LossTerms supervised_loss(const FieldParams& fp, const SupervisionSet& sup,
                          const std::vector<RaySpec>& rays,
                          const std::vector<NormalProbe>& probes,
                          const ReconstructConfig& cfg) {
  return loss_impl(fp, sup, rays, probes, cfg, nullptr);
}

LossTerms supervised_loss_grad(const FieldParams& fp, const SupervisionSet& sup,
                               const std::vector<RaySpec>& rays,
                               const std::vector<NormalProbe>& probes,
                               const ReconstructConfig& cfg,
                               FieldGrads& grads) {
  return loss_impl(fp, sup, rays, probes, cfg, &grads);
}

std::vector<NormalProbe> compute_normal_probes(const FieldParams& fp,
                                               const SupervisionSet& sup,
                                               const std::vector<RaySpec>& rays,
                                               const ReconstructConfig& cfg) {
  sup.validate();
  const int ns = cfg.n_samples;
  const int n_rays = static_cast<int>(rays.size());
  if (n_rays == 0) return {};
  const int width = sup.views[0].rgb.width;
  const int height = sup.views[0].rgb.height;
  const Intrinsics intr = make_intrinsics(width, height, cfg.fov_deg);

  Eigen::MatrixXd feats(3 * fp.planes.features,
                        static_cast<long>(n_rays) * ns);
  std::vector<Ray> ray_geom(n_rays);
  std::vector<RayQuadrature> quad(n_rays);
  long col = 0;
  for (int r = 0; r < n_rays; ++r) {
    const PixelRef pix = resolve_ray(sup, rays[r]);
    ray_geom[r] = ray_for_pixel(pix.pose, intr, pix.x, pix.y);
    const double near = std::max(pix.pose.radius - cfg.margin, 1e-3);
    quad[r] = make_quadrature(near, pix.pose.radius + cfg.margin, ns, nullptr);
    for (int j = 0; j < ns; ++j, ++col)
      feats.col(col) = sample_triplane(
          fp.planes, ray_geom[r].origin + quad[r].t[j] * ray_geom[r].direction);
  }
  const Eigen::MatrixXd raw = fp.decoder.mlp.forward_batch(feats);

  std::vector<NormalProbe> probes;
  std::vector<double> sigma(ns);
  std::vector<Eigen::Vector3d> cols(ns, Eigen::Vector3d::Zero());
  for (int r = 0; r < n_rays; ++r) {
    for (int j = 0; j < ns; ++j)
      sigma[j] = softplus(raw(0, static_cast<long>(r) * ns + j));
    const RayResult res = composite(sigma, cols, quad[r], Eigen::Vector3d::Zero());
    if (res.acc <= 0.5) continue;
    const PixelRef pix = resolve_ray(sup, rays[r]);
    if (pix.view->mask.at(pix.y, pix.x, 0) <= 0.5) continue;
    Eigen::Vector3d gt_n;
    for (int c = 0; c < 3; ++c) gt_n[c] = pix.view->normal.at(pix.y, pix.x, c);
    if (gt_n.squaredNorm() < 0.25) continue;  // degenerate ground truth
    NormalProbe probe;
    probe.position = ray_geom[r].origin + res.depth * ray_geom[r].direction;
    probe.gt_normal = gt_n.normalized();
    probes.push_back(probe);
  }
  return probes;
}

RenderedView render_field_view(const FieldParams& fp, const CameraPose& pose,
                               const RenderConfig& cfg) {
  const Intrinsics intr = make_intrinsics(cfg.width, cfg.height, cfg.fov_deg);
  const double near = std::max(pose.radius - cfg.margin, 1e-3);
  const double far = pose.radius + cfg.margin;
  const int ns = cfg.n_samples;
  const int n_pixels = cfg.width * cfg.height;
  const int chunk_pixels = std::max(1, 16384 / ns);

  RenderedView view;
  view.rgb = Image(cfg.height, cfg.width, 3);
  view.depth = Image(cfg.height, cfg.width, 1);
  view.normal = Image(cfg.height, cfg.width, 3);
  view.mask = Image(cfg.height, cfg.width, 1);

  const RayQuadrature q = make_quadrature(near, far, ns, nullptr);
  std::vector<Ray> rays(chunk_pixels);
  std::vector<double> sigma(ns);
  std::vector<Eigen::Vector3d> cols(ns);

  for (int start = 0; start < n_pixels; start += chunk_pixels) {
    const int count = std::min(chunk_pixels, n_pixels - start);
    Eigen::MatrixXd feats(3 * fp.planes.features,
                          static_cast<long>(count) * ns);
    for (int i = 0; i < count; ++i) {
      const int pix = start + i;
      rays[i] = ray_for_pixel(pose, intr, pix % cfg.width, pix / cfg.width);
      for (int j = 0; j < ns; ++j)
        feats.col(static_cast<long>(i) * ns + j) = sample_triplane(
            fp.planes, rays[i].origin + q.t[j] * rays[i].direction);
    }
    const Eigen::MatrixXd raw = fp.decoder.mlp.forward_batch(feats);
    for (int i = 0; i < count; ++i) {
      for (int j = 0; j < ns; ++j) {
        const long b = static_cast<long>(i) * ns + j;
        sigma[j] = softplus(raw(0, b));
        for (int c = 0; c < 3; ++c) cols[j][c] = sigmoid(raw(1 + c, b));
      }
      const RayResult res = composite(sigma, cols, q, cfg.background);
      const int pix = start + i;
      const int y = pix / cfg.width, x = pix % cfg.width;
      for (int c = 0; c < 3; ++c) view.rgb.at(y, x, c) = res.rgb[c];
      view.depth.at(y, x, 0) = res.depth;
      view.mask.at(y, x, 0) = res.acc;
    }
  }

  if (cfg.compute_normals) {
    // Batched central differences at the surface points of masked pixels.
    std::vector<int> px;
    for (int pix = 0; pix < n_pixels; ++pix)
      if (view.mask.at(pix / cfg.width, pix % cfg.width, 0) >
          cfg.mask_threshold)
        px.push_back(pix);
    const double h = cfg.normal_step;
    for (size_t start = 0; start < px.size(); start += 2048) {
      const size_t count = std::min<size_t>(2048, px.size() - start);
      Eigen::MatrixXd feats(3 * fp.planes.features, count * 6);
      for (size_t i = 0; i < count; ++i) {
        const int pix = px[start + i];
        const Ray ray =
            ray_for_pixel(pose, intr, pix % cfg.width, pix / cfg.width);
        const Eigen::Vector3d p =
            ray.origin + view.depth.at(pix / cfg.width, pix % cfg.width, 0) *
                             ray.direction;
        for (int a = 0; a < 3; ++a)
          for (int s = 0; s < 2; ++s) {
            Eigen::Vector3d ps = p;
            ps[a] += s == 0 ? h : -h;
            feats.col(i * 6 + 2 * a + s) = sample_triplane(fp.planes, ps);
          }
      }
      const Eigen::MatrixXd raw = fp.decoder.mlp.forward_batch(feats);
      for (size_t i = 0; i < count; ++i) {
        Eigen::Vector3d grad;
        for (int a = 0; a < 3; ++a)
          grad[a] = (softplus(raw(0, i * 6 + 2 * a)) -
                     softplus(raw(0, i * 6 + 2 * a + 1))) /
                    (2.0 * h);
        const double norm = grad.norm();
        const int pix = px[start + i];
        if (norm >= 1e-9) {
          const Eigen::Vector3d n = -grad / norm;
          for (int c = 0; c < 3; ++c)
            view.normal.at(pix / cfg.width, pix % cfg.width, c) = n[c];
        }
      }
    }
  }
  return view;
}

TriPlane init_planes_from_tokens(const SupervisionSet& sup,
                                 const ReconstructConfig& cfg, uint64_t seed) {
  sup.validate();
  const int f = cfg.features;
  Rng rng(seed);
  const PatchEmbed embed = make_patch_embed(cfg.patch_size, 3, f, rng);

  std::vector<ViewTokens> views;
  for (int i = 0; i < sup.view_count(); ++i) {
    ViewTokens vt;
    vt.seq = patchify(sup.views[i].rgb, embed, i);
    vt.role = ViewRole::main(i);
    vt.azimuth_deg = sup.poses[i].azimuth_deg;
    vt.view_id = i;
    views.push_back(std::move(vt));
  }
  const TokenSequence image_tokens = concat_view_tokens(views, {}, {});

  const int length = 3 * cfg.resolution * cfg.resolution;
  const PositionEmbedding pos = make_position_embedding(length, f, rng);
  const AttentionParams attn = make_attention(f, 1, rng);
  const TokenSequence fused{fuse(pos.p, image_tokens.tokens, attn), {}};
  return tokens_to_triplane(fused, cfg.resolution, f,
                            identity_token_projection(f));
}

ReconstructResult reconstruct(const SupervisionSet& sup,
                              const ReconstructConfig& cfg, uint64_t seed) {
  sup.validate();
  cfg.validate();

  ReconstructResult result;
  Rng init_rng(seed_stream(seed, "recon/init"));
  result.params.planes =
      cfg.init == "tokens"
          ? init_planes_from_tokens(sup, cfg, seed_stream(seed, "recon/tokens"))
          : TriPlane::zeros(cfg.resolution, cfg.features);
  result.params.decoder =
      make_field_decoder(3 * cfg.features, cfg.decoder_hidden, init_rng);

  const int width = sup.views[0].rgb.width;
  const int height = sup.views[0].rgb.height;
  const int pixels_per_view = width * height;
  const long all_rays = static_cast<long>(sup.view_count()) * pixels_per_view;

  std::vector<RaySpec> masked;
  for (int v = 0; v < sup.view_count(); ++v)
    for (int p = 0; p < pixels_per_view; ++p)
      if (sup.views[v].mask.at(p / width, p % width, 0) > 0.5)
        masked.push_back({v, p});

  Rng ray_rng(seed_stream(seed, "recon/rays"));
  Rng probe_rng(seed_stream(seed, "recon/probes"));

  std::vector<double> flat = result.params.flatten();
  AdamState adam(flat.size());
  std::vector<double> snapshot = flat;
  std::vector<NormalProbe> pool;
  double initial_total = -1.0;

  for (int step = 0; step < cfg.steps; ++step) {
    if (step % cfg.probe_refresh == 0) {
      if (cfg.probe_pool > 0 && cfg.weights.lambda_normal > 0.0 &&
          !masked.empty()) {
        std::vector<RaySpec> probe_rays(
            std::min<size_t>(cfg.probe_pool, masked.size()));
        for (auto& r : probe_rays)
          r = masked[static_cast<size_t>(
              probe_rng.uniform_int(0, static_cast<int64_t>(masked.size()) - 1))];
        pool = compute_normal_probes(result.params, sup, probe_rays, cfg);
      }
      snapshot = flat;
    }

    std::vector<RaySpec> batch(cfg.rays_per_step);
    for (size_t i = 0; i < batch.size(); ++i) {
      if (!masked.empty() && i % 2 == 0) {
        batch[i] = masked[static_cast<size_t>(
            ray_rng.uniform_int(0, static_cast<int64_t>(masked.size()) - 1))];
      } else {
        const long k = ray_rng.uniform_int(0, all_rays - 1);
        batch[i] = {static_cast<int>(k / pixels_per_view),
                    static_cast<int>(k % pixels_per_view)};
      }
    }
    std::vector<NormalProbe> probes;
    if (!pool.empty() && cfg.probes_per_step > 0) {
      probes.resize(std::min<size_t>(cfg.probes_per_step, pool.size()));
      for (auto& p : probes)
        p = pool[static_cast<size_t>(
            ray_rng.uniform_int(0, static_cast<int64_t>(pool.size()) - 1))];
    }

    FieldGrads grads = FieldGrads::zeros_like(result.params);
    const LossTerms t =
        supervised_loss_grad(result.params, sup, batch, probes, cfg, grads);

    if (!std::isfinite(t.total) ||
        (initial_total > 0.0 && t.total > cfg.divergence_factor * initial_total)) {
      log_error("reconstruct: diverged at step " + std::to_string(step) +
                " (total=" + std::to_string(t.total) + "); restoring snapshot");
      flat = snapshot;
      result.params.unflatten(flat);
      result.diverged = true;
      break;
    }
    if (initial_total < 0.0) initial_total = std::max(t.total, 1e-12);
    result.history.push_back(t);
    result.steps_run = step + 1;

    const std::vector<double> grad_flat = grads.flatten();
    adam_step(flat, grad_flat, adam, cfg.lr);
    result.params.unflatten(flat);

    if (cfg.log_every > 0 && step % cfg.log_every == 0)
      log_info("reconstruct step " + std::to_string(step) + " total=" +
               std::to_string(t.total) + " rgb=" + std::to_string(t.rgb) +
               " mask=" + std::to_string(t.mask));
  }

  RenderConfig rc;
  rc.width = width;
  rc.height = height;
  rc.fov_deg = cfg.fov_deg;
  rc.n_samples = cfg.n_samples;
  rc.margin = cfg.margin;
  rc.background = cfg.background;
  rc.normal_step = cfg.probe_step();
  LossTerms sum;
  for (int v = 0; v < sup.view_count(); ++v) {
    const RenderedView pred =
        render_field_view(result.params, sup.poses[v], rc);
    const LossTerms t =
        compute_loss(pred, sup.views[v], cfg.weights, &result.params.planes);
    sum.total += t.total;
    sum.rgb += t.rgb;
    sum.depth += t.depth;
    sum.normal += t.normal;
    sum.mask += t.mask;
    sum.reg += t.reg;
  }
  const double inv = 1.0 / sup.view_count();
  result.final_full = {sum.total * inv, sum.rgb * inv,  sum.depth * inv,
                       sum.normal * inv, sum.mask * inv, sum.reg * inv};
  return result;
}

void write_loss_history_csv(const std::string& path,
                            const std::vector<LossTerms>& history) {
  std::ofstream out(path);
  if (!out) throw IoError("write_loss_history_csv: cannot open " + path);
  out << "step,total,rgb,depth,normal,mask,reg\n";
  char line[192];
  for (size_t i = 0; i < history.size(); ++i) {
    const auto& t = history[i];
    std::snprintf(line, sizeof line, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", i,
                  t.total, t.rgb, t.depth, t.normal, t.mask, t.reg);
    out << line;
  }
  if (!out) throw IoError("write_loss_history_csv: write failed " + path);
}

}  // namespace cdi3d
