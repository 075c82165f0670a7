// SPDX-License-Identifier: Apache-2.0
#include "cdi3d/triplane.hpp"

#include <algorithm>
#include <cmath>

#include "cdi3d/errors.hpp"

namespace cdi3d {

TriPlane TriPlane::zeros(int resolution, int features) {
  if (resolution < 2 || features < 1)
    throw ConfigError("TriPlane: resolution must be >= 2, features >= 1");
  TriPlane tp;
  tp.resolution = resolution;
  tp.features = features;
  for (auto& p : tp.planes)
    p = Eigen::MatrixXd::Zero(resolution * resolution, features);
  return tp;
}

double TriPlane::squared_norm() const {
  double s = 0.0;
  for (const auto& p : planes) s += p.squaredNorm();
  return s;
}

TokenProjection identity_token_projection(int dim) {
  TokenProjection t;
  t.proj = Eigen::MatrixXd::Identity(dim, dim);
  t.bias = Eigen::VectorXd::Zero(dim);
  return t;
}

TokenProjection make_token_projection(int token_dim, int features, Rng& rng) {
  TokenProjection t;
  t.proj.resize(features, token_dim);
  const double sd = 1.0 / std::sqrt(static_cast<double>(token_dim));
  for (int r = 0; r < features; ++r)
    for (int c = 0; c < token_dim; ++c) t.proj(r, c) = sd * rng.gaussian();
  t.bias = Eigen::VectorXd::Zero(features);
  return t;
}

TriPlane tokens_to_triplane(const TokenSequence& seq, int resolution,
                            int features, const TokenProjection& proj) {
  const int per_plane = resolution * resolution;
  if (seq.length() != 3 * per_plane)
    throw ConfigError("tokens_to_triplane: need exactly 3*R^2 tokens");
  if (proj.proj.rows() != features || proj.proj.cols() != seq.dim())
    throw ConfigError("tokens_to_triplane: projection shape mismatch");

  TriPlane tp = TriPlane::zeros(resolution, features);
  for (int p = 0; p < 3; ++p) {
    const auto block = seq.tokens.middleRows(p * per_plane, per_plane);
    tp.planes[p] = block * proj.proj.transpose();
    tp.planes[p].rowwise() += proj.bias.transpose();
  }
  return tp;
}

namespace {

// Bilinear taps on one plane for in-plane coordinates (a, b) in [-1,1];
// a indexes columns, b indexes rows.
void plane_taps(int res, double a, double b, std::array<int, 4>& node,
                std::array<double, 4>& weight) {
  const double u = std::clamp((a + 1.0) * 0.5, 0.0, 1.0) * (res - 1);
  const double v = std::clamp((b + 1.0) * 0.5, 0.0, 1.0) * (res - 1);
  int c0 = static_cast<int>(std::floor(u));
  int r0 = static_cast<int>(std::floor(v));
  c0 = std::min(c0, res - 2);
  r0 = std::min(r0, res - 2);
  const double fu = u - c0;
  const double fv = v - r0;
  node = {r0 * res + c0, r0 * res + c0 + 1, (r0 + 1) * res + c0,
          (r0 + 1) * res + c0 + 1};
  weight = {(1 - fv) * (1 - fu), (1 - fv) * fu, fv * (1 - fu), fv * fu};
}

}  // namespace

Eigen::VectorXd sample_triplane(const TriPlane& tp, const Eigen::Vector3d& point,
                                TriPlaneTaps* taps) {
  const int f = tp.features;
  Eigen::VectorXd out(3 * f);
  const double coords[3][2] = {{point.x(), point.y()},
                               {point.x(), point.z()},
                               {point.y(), point.z()}};
  for (int p = 0; p < 3; ++p) {
    std::array<int, 4> node;
    std::array<double, 4> w;
    plane_taps(tp.resolution, coords[p][0], coords[p][1], node, w);
    Eigen::VectorXd feat = Eigen::VectorXd::Zero(f);
    for (int i = 0; i < 4; ++i)
      feat += w[i] * tp.planes[p].row(node[i]).transpose();
    out.segment(p * f, f) = feat;
    if (taps) {
      taps->node[p] = node;
      taps->weight[p] = w;
    }
  }
  return out;
}

void sample_triplane_backward(const TriPlaneTaps& taps, int features,
                              const Eigen::VectorXd& d_feat,
                              std::array<Eigen::MatrixXd, 3>& d_planes) {
  for (int p = 0; p < 3; ++p) {
    const auto seg = d_feat.segment(p * features, features);
    for (int i = 0; i < 4; ++i)
      d_planes[p].row(taps.node[p][i]) += taps.weight[p][i] * seg.transpose();
  }
}

FieldDecoderParams make_field_decoder(int in_dim,
                                      const std::vector<int>& hidden,
                                      Rng& rng, double density_bias) {
  std::vector<int> sizes;
  sizes.push_back(in_dim);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(4);
  FieldDecoderParams dec;
  dec.mlp = Mlp::create(sizes, rng);
  dec.mlp.biases.back()[0] = density_bias;
  return dec;
}

double softplus(double x) {
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

FieldSample decode_field(const FieldDecoderParams& dec,
                         const Eigen::VectorXd& feat) {
  const Eigen::VectorXd raw = dec.mlp.forward(feat);
  FieldSample s;
  s.density = softplus(raw[0]);
  for (int i = 0; i < 3; ++i) s.rgb[i] = sigmoid(raw[1 + i]);
  return s;
}

FieldSample decode_field(const FieldDecoderParams& dec,
                         const Eigen::VectorXd& feat, Mlp::Trace& trace,
                         Eigen::Vector4d& raw) {
  const Eigen::VectorXd out = dec.mlp.forward(feat, trace);
  raw = out.head<4>();
  FieldSample s;
  s.density = softplus(raw[0]);
  for (int i = 0; i < 3; ++i) s.rgb[i] = sigmoid(raw[1 + i]);
  return s;
}

Eigen::VectorXd decode_field_backward(const FieldDecoderParams& dec,
                                      const Mlp::Trace& trace,
                                      const Eigen::Vector4d& raw,
                                      double d_density,
                                      const Eigen::Vector3d& d_rgb,
                                      Mlp::Grads& g) {
  Eigen::VectorXd d_raw(4);
  d_raw[0] = d_density * sigmoid(raw[0]);  // d softplus = sigmoid
  for (int i = 0; i < 3; ++i) {
    const double s = sigmoid(raw[1 + i]);
    d_raw[1 + i] = d_rgb[i] * s * (1.0 - s);
  }
  return dec.mlp.backward(trace, d_raw, g);
}

double AnalyticShape::sdf(const Eigen::Vector3d& p) const {
  switch (kind) {
    case ShapeKind::Sphere:
      return p.norm() - radius;
    case ShapeKind::Torus: {
      const double q = std::sqrt(p.x() * p.x() + p.y() * p.y()) - major_radius;
      return std::sqrt(q * q + p.z() * p.z()) - minor_radius;
    }
    case ShapeKind::Box: {
      const Eigen::Vector3d q = p.cwiseAbs() - half_extents;
      const Eigen::Vector3d qpos = q.cwiseMax(0.0);
      return qpos.norm() + std::min(q.maxCoeff(), 0.0);
    }
  }
  throw ConfigError("AnalyticShape: unknown kind");
}

double AnalyticShape::density(const Eigen::Vector3d& p) const {
  const double u = std::clamp(0.5 - sdf(p) / (2.0 * edge_width), 0.0, 1.0);
  return sigma_max * u * u * (3.0 - 2.0 * u);
}

FieldSample AnalyticShape::sample(const Eigen::Vector3d& p) const {
  FieldSample s;
  s.density = density(p);
  s.rgb = rgb;
  return s;
}

AnalyticShape make_shape(ShapeKind kind) {
  AnalyticShape s;
  s.kind = kind;
  switch (kind) {
    case ShapeKind::Sphere:
      s.rgb = {0.8, 0.25, 0.2};
      break;
    case ShapeKind::Torus:
      s.rgb = {0.2, 0.55, 0.85};
      break;
    case ShapeKind::Box:
      s.rgb = {0.95, 0.75, 0.2};
      break;
  }
  return s;
}

}  // namespace cdi3d
