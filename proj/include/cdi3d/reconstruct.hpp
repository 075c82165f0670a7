// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "cdi3d/camera.hpp"
#include "cdi3d/renderer.hpp"
#include "cdi3d/triplane.hpp"

namespace cdi3d {

struct LossWeights {
  double lambda_rgb = 1.0;
  double lambda_lpips = 2.0;  // reserved; no perceptual term is computed
  double lambda_mask = 1.0;
  double lambda_depth = 0.5;
  double lambda_normal = 0.2;
  double lambda_reg = 0.01;
};

// Raw (unweighted) term values; total carries the weights.
struct LossTerms {
  double total = 0.0;
  double rgb = 0.0;
  double depth = 0.0;
  double normal = 0.0;
  double mask = 0.0;
  double reg = 0.0;
};

// rgb: MSE over all pixels; depth: L1 over gt.mask > 0.5; normal: mean
// (1 - n_pred . n_gt) over the same mask; mask: MSE on accumulated opacity;
// reg: mean squared plane feature (0 without planes).
LossTerms compute_loss(const RenderedView& pred, const RenderedView& gt,
                       const LossWeights& w, const TriPlane* planes = nullptr);

struct SupervisionSet {
  std::vector<CameraPose> poses;
  std::vector<RenderedView> views;

  int view_count() const { return static_cast<int>(poses.size()); }
  void validate() const;
};

// Trainable state: tri-plane features plus the shared field decoder.
struct FieldParams {
  TriPlane planes;
  FieldDecoderParams decoder;

  int param_count() const;
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);
};

struct FieldGrads {
  std::array<Eigen::MatrixXd, 3> d_planes;
  Mlp::Grads d_decoder;

  static FieldGrads zeros_like(const FieldParams& p);
  std::vector<double> flatten() const;  // same layout as FieldParams::flatten
};

struct RaySpec {
  int view = 0;
  int pixel = 0;  // y * width + x
};

// A frozen surface point and the normal it should match. Positions are
// inputs here, not functions of the parameters, which keeps the loss
// differentiable in a form finite differences can verify.
struct NormalProbe {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d gt_normal = Eigen::Vector3d::Zero();
};

struct ReconstructConfig {
  int resolution = 32;
  int features = 16;
  std::vector<int> decoder_hidden = {32};

  int steps = 1200;
  int rays_per_step = 512;
  int probes_per_step = 64;
  int probe_refresh = 50;
  int probe_pool = 2048;
  double lr = 1e-2;

  int n_samples = 48;
  double margin = 1.8;
  double fov_deg = 45.0;
  Eigen::Vector3d background{1.0, 1.0, 1.0};
  LossWeights weights;

  std::string init = "tokens";  // "tokens" | "zeros"
  int patch_size = 16;
  double normal_step = 0.0;  // 0 -> 2 / resolution
  double divergence_factor = 50.0;
  int log_every = 100;

  void validate() const;
  double probe_step() const {
    return normal_step > 0.0 ? normal_step : 2.0 / resolution;
  }
};

// Batch loss over explicit rays and probes; both overloads share one code
// path, so value and gradient always agree.
LossTerms supervised_loss(const FieldParams& fp, const SupervisionSet& sup,
                          const std::vector<RaySpec>& rays,
                          const std::vector<NormalProbe>& probes,
                          const ReconstructConfig& cfg);
LossTerms supervised_loss_grad(const FieldParams& fp, const SupervisionSet& sup,
                               const std::vector<RaySpec>& rays,
                               const std::vector<NormalProbe>& probes,
                               const ReconstructConfig& cfg, FieldGrads& grads);

// Probe positions from the current rendering: rays that are confidently
// occupied (acc > 0.5, gt mask on, usable gt normal) anchor a probe at their
// rendered depth.
std::vector<NormalProbe> compute_normal_probes(const FieldParams& fp,
                                               const SupervisionSet& sup,
                                               const std::vector<RaySpec>& rays,
                                               const ReconstructConfig& cfg);

// Same result as render_view(field_from_triplane(...)) but decodes samples
// in large batches.
RenderedView render_field_view(const FieldParams& fp, const CameraPose& pose,
                               const RenderConfig& cfg);

// Token-pipeline initialization: patchify the supervision images, fuse them
// into learned query tokens, reshape into planes.
TriPlane init_planes_from_tokens(const SupervisionSet& sup,
                                 const ReconstructConfig& cfg, uint64_t seed);

struct ReconstructResult {
  FieldParams params;
  std::vector<LossTerms> history;  // one row per optimization step
  LossTerms final_full;            // full-image loss averaged over views
  bool diverged = false;
  int steps_run = 0;
};

ReconstructResult reconstruct(const SupervisionSet& sup,
                              const ReconstructConfig& cfg, uint64_t seed);

// "step,total,rgb,depth,normal,mask,reg" rows.
void write_loss_history_csv(const std::string& path,
                            const std::vector<LossTerms>& history);

}  // namespace cdi3d
