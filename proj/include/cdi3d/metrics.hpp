// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cdi3d/camera.hpp"
#include "cdi3d/image.hpp"
#include "cdi3d/mesh.hpp"

namespace cdi3d {

struct MetricsConfig {
  int chamfer_samples = 100000;
  double fscore_tau = 0.05;
  int iou_resolution = 64;
  int eval_resolution = 128;
  double eval_radius = 2.0;
  std::vector<double> eval_elevations_deg = {0.0, 15.0, 30.0};
  int eval_azimuth_count = 8;
  double eval_fov_deg = 45.0;

  void validate() const;
};

// Area-weighted uniform surface samples; deterministic for a given seed.
std::vector<Eigen::Vector3d> sample_mesh_points(const TriangleMesh& mesh,
                                                int count, uint64_t seed);

// Uniform-grid nearest neighbor; returns exactly the brute-force minimum
// (same arithmetic, just fewer candidates inspected).
class PointGrid {
 public:
  explicit PointGrid(std::vector<Eigen::Vector3d> points);
  double nearest_sq(const Eigen::Vector3d& query) const;

 private:
  std::vector<Eigen::Vector3d> points_;
  Eigen::Vector3d lo_;
  double cell_ = 1.0;
  int dims_[3] = {1, 1, 1};
  std::vector<std::vector<int>> cells_;
};

// Symmetric mean squared point-to-set distance:
// (mean_a min_b ||a-b||^2 + mean_b min_a ||b-a||^2) / 2.
double chamfer_distance(const std::vector<Eigen::Vector3d>& a,
                        const std::vector<Eigen::Vector3d>& b);

// Harmonic mean of precision/recall at Euclidean threshold tau.
double f_score(const std::vector<Eigen::Vector3d>& pred,
               const std::vector<Eigen::Vector3d>& gt, double tau);

// Voxel-center occupancy IoU over the joint bounding box. Insideness is
// crossing parity along axis-aligned scanlines (slightly jittered off voxel
// centers); each voxel takes the majority over the three axes, which rides
// out rays that graze edges.
double volume_iou(const TriangleMesh& a, const TriangleMesh& b, int resolution);

// 10*log10(1/MSE) on [0,1] images; 99 dB once MSE < 1e-10.
double psnr(const Image& a, const Image& b);

// Gaussian-weighted SSIM, 11x11 window, sigma 1.5, valid windows only,
// averaged over channels.
double ssim(const Image& a, const Image& b);

// Unlit raycast of vertex colors over a white background.
Image render_mesh_rgb(const TriangleMesh& mesh, const CameraPose& pose,
                      int resolution, double fov_deg,
                      const Eigen::Vector3d& background = {1.0, 1.0, 1.0});

struct EvalView {
  double elevation_deg = 0.0;
  double azimuth_deg = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalReport {
  double chamfer = 0.0;
  double f_score = 0.0;
  double volume_iou = 0.0;
  double psnr_mean = 0.0;
  double ssim_mean = 0.0;
  std::vector<EvalView> views;
};

EvalReport evaluate_protocol(const TriangleMesh& gt, const TriangleMesh& pred,
                             const MetricsConfig& cfg, uint64_t seed);

void write_eval_report(const std::string& json_path,
                       const std::string& csv_path, const EvalReport& report);

}  // namespace cdi3d
