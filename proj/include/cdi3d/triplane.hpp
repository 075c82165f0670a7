// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "cdi3d/fusion.hpp"
#include "cdi3d/mlp.hpp"
#include "cdi3d/rng.hpp"

namespace cdi3d {

// Three axis-aligned feature planes over [-1,1]^2, each R x R nodes with F
// channels. Plane order: XY, XZ, YZ. Node (row, col) of plane p lives at
// flat row (row * R + col) of planes[p].
struct TriPlane {
  int resolution = 32;
  int features = 16;
  std::array<Eigen::MatrixXd, 3> planes;  // (R*R) x F each

  static TriPlane zeros(int resolution, int features);
  int token_count() const { return 3 * resolution * resolution; }
  double squared_norm() const;
  int param_count() const { return token_count() * features; }
};

// Linear map from token dim D to plane features F.
struct TokenProjection {
  Eigen::MatrixXd proj;  // F x D
  Eigen::VectorXd bias;  // F
};

TokenProjection identity_token_projection(int dim);
TokenProjection make_token_projection(int token_dim, int features, Rng& rng);

// Reshape a fused token sequence of length 3*R^2 into planes. Tokens
// [0, R^2) fill XY row-major, then XZ, then YZ.
TriPlane tokens_to_triplane(const TokenSequence& seq, int resolution,
                            int features, const TokenProjection& proj);

// Bilinear taps used by one sample_triplane call; kept so the backward pass
// can scatter gradients to the same four nodes per plane.
struct TriPlaneTaps {
  std::array<std::array<int, 4>, 3> node;
  std::array<std::array<double, 4>, 3> weight;
};

// Concatenated [XY | XZ | YZ] features (3F) at a world point. Coordinates
// map to plane axes as XY <- (x, y), XZ <- (x, z), YZ <- (y, z) with the
// first coordinate as column and the second as row; node-centered, i.e.
// u = (a+1)/2 * (R-1), clamped to the plane.
Eigen::VectorXd sample_triplane(const TriPlane& tp, const Eigen::Vector3d& point,
                                TriPlaneTaps* taps = nullptr);

void sample_triplane_backward(const TriPlaneTaps& taps, int features,
                              const Eigen::VectorXd& d_feat,
                              std::array<Eigen::MatrixXd, 3>& d_planes);

// MLP from 3F features to (raw_density, raw_rgb[3]); density = softplus,
// rgb = sigmoid. The output density bias starts low so fields begin empty.
struct FieldDecoderParams {
  Mlp mlp;
};

FieldDecoderParams make_field_decoder(int in_dim,
                                      const std::vector<int>& hidden,
                                      Rng& rng, double density_bias = -6.0);

struct FieldSample {
  double density = 0.0;
  Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
};

double softplus(double x);
double sigmoid(double x);

FieldSample decode_field(const FieldDecoderParams& dec,
                         const Eigen::VectorXd& feat);
FieldSample decode_field(const FieldDecoderParams& dec,
                         const Eigen::VectorXd& feat, Mlp::Trace& trace,
                         Eigen::Vector4d& raw);
// Chains d_density / d_rgb through the activations and the MLP; accumulates
// parameter grads into g, returns dL/dfeat.
Eigen::VectorXd decode_field_backward(const FieldDecoderParams& dec,
                                      const Mlp::Trace& trace,
                                      const Eigen::Vector4d& raw,
                                      double d_density,
                                      const Eigen::Vector3d& d_rgb,
                                      Mlp::Grads& g);

enum class ShapeKind { Sphere, Torus, Box };

// Signed-distance shapes with a smoothstep density shell:
// sigma = sigma_max * S(clamp(0.5 - sd/(2w), 0, 1)), S(u) = 3u^2 - 2u^3,
// so the sd = 0 level sits exactly at sigma_max / 2.
struct AnalyticShape {
  ShapeKind kind = ShapeKind::Sphere;
  double radius = 0.5;                               // sphere
  double major_radius = 0.35, minor_radius = 0.15;   // torus (tube in xy)
  Eigen::Vector3d half_extents{0.35, 0.3, 0.25};     // box
  double sigma_max = 40.0;
  double edge_width = 0.04;
  Eigen::Vector3d rgb{0.8, 0.25, 0.2};

  double sdf(const Eigen::Vector3d& p) const;
  double density(const Eigen::Vector3d& p) const;
  FieldSample sample(const Eigen::Vector3d& p) const;
};

AnalyticShape make_shape(ShapeKind kind);

}  // namespace cdi3d
