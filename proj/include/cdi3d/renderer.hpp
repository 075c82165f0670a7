// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "cdi3d/camera.hpp"
#include "cdi3d/image.hpp"
#include "cdi3d/rng.hpp"
#include "cdi3d/triplane.hpp"

namespace cdi3d {

using FieldFn = std::function<FieldSample(const Eigen::Vector3d&)>;

struct Intrinsics {
  int width = 128, height = 128;
  double focal = 0.0;  // pixels
  double cx = 0.0, cy = 0.0;
};

Intrinsics make_intrinsics(int width, int height, double fov_deg);

struct Ray {
  Eigen::Vector3d origin;
  Eigen::Vector3d direction;  // unit
};

// Pixel centers sit at +0.5; camera axes are (right, down, forward).
Ray ray_for_pixel(const CameraPose& pose, const Intrinsics& intr, int x, int y);
std::vector<Ray> rays_for_pose(const CameraPose& pose, const Intrinsics& intr);

struct RenderConfig {
  int width = 128, height = 128;
  double fov_deg = 45.0;
  int n_samples = 64;
  double margin = 1.8;  // near/far = radius -/+ margin
  Eigen::Vector3d background{1.0, 1.0, 1.0};
  bool jitter = false;
  bool compute_normals = true;
  double mask_threshold = 0.5;
  double normal_step = 0.01;
  int threads = 1;
};

// Sample positions along [near, far]: bin midpoints, optionally jittered
// uniformly within each bin; delta is the constant bin width.
struct RayQuadrature {
  std::vector<double> t;
  double delta = 0.0;
};

RayQuadrature make_quadrature(double near, double far, int n, Rng* jitter);

struct RayResult {
  Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
  double depth = 0.0;
  double acc = 0.0;
};

// Emission-absorption: T_j = exp(-sum_{i<j} sigma_i delta), w_j = T_j
// (1 - exp(-sigma_j delta)); rgb composites over `background`, depth is the
// acc-normalized expected hit distance (0 when acc < 1e-6).
RayResult composite(const std::vector<double>& sigma,
                    const std::vector<Eigen::Vector3d>& color,
                    const RayQuadrature& q, const Eigen::Vector3d& background);

struct CompositeGrads {
  std::vector<double> d_sigma;
  std::vector<Eigen::Vector3d> d_color;
};

CompositeGrads composite_backward(const std::vector<double>& sigma,
                                  const std::vector<Eigen::Vector3d>& color,
                                  const RayQuadrature& q,
                                  const Eigen::Vector3d& background,
                                  const Eigen::Vector3d& d_rgb, double d_depth,
                                  double d_acc);

struct RenderedView {
  Image rgb;     // H x W x 3
  Image depth;   // H x W x 1
  Image normal;  // H x W x 3, world-space unit vectors (zero off-mask)
  Image mask;    // H x W x 1, accumulated opacity
};

// Density-gradient normal -grad(sigma)/|grad(sigma)| by central differences;
// zero when the gradient is degenerate.
Eigen::Vector3d field_normal(const FieldFn& field, const Eigen::Vector3d& p,
                             double step);

RenderedView render_view(const FieldFn& field, const CameraPose& pose,
                         const RenderConfig& cfg, uint64_t jitter_seed = 0);

// Learned-field adapter: triplane sample -> decoder.
FieldFn field_from_triplane(const TriPlane& tp, const FieldDecoderParams& dec);
FieldFn field_from_shape(const AnalyticShape& shape);

}  // namespace cdi3d
