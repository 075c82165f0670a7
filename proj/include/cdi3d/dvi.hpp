// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "cdi3d/camera.hpp"
#include "cdi3d/image.hpp"
#include "cdi3d/mlp.hpp"
#include "cdi3d/rng.hpp"

namespace cdi3d {

// Which of the two adjacent main views acts as reference vs. condition for
// interpolated slot i (1-based): the first main up to the midpoint, the
// second past it.
struct RefCondAssignment {
  int ref_index;   // 1 or 2
  int cond_index;  // the other one
};

RefCondAssignment assign_ref_cond(int slot, int num_interp);

// Linear-beta schedule bookkeeping for the toy pixel-space DDPM.
struct DiffusionSchedule {
  int steps = 0;
  std::vector<double> beta;       // in (0,1), non-decreasing
  std::vector<double> alpha;      // 1 - beta
  std::vector<double> alpha_bar;  // running product of alpha
};

DiffusionSchedule make_schedule(int steps, double beta_start, double beta_end);

// sqrt(alpha_bar[t]) * x0 + sqrt(1 - alpha_bar[t]) * eps
Image q_sample(const Image& x0, int t, const Image& eps,
               const DiffusionSchedule& schedule);

// Learned feature of the condition image concatenated with the relative pose
// deltas of the target view. Stands in for the CLIP embedding of the full
// pipeline.
struct ConditionEncoder {
  Eigen::MatrixXd weight;  // feature_dim x (H*W*C)
  Eigen::VectorXd bias;
  int image_h = 0, image_w = 0, image_c = 0;
};

ConditionEncoder make_condition_encoder(int h, int w, int c, int feature_dim,
                                        Rng& rng);

struct ConditionEmbedding {
  Eigen::VectorXd values;  // feature_dim + 3
  int feature_dim = 0;
};

ConditionEmbedding embed_condition(const ConditionEncoder& encoder,
                                   const Image& cond_image,
                                   const RelativePose& rel);

// Noise predictor: an MLP over [z_t | x_ref | t_embedding | condition]. The
// reference image rides along as extra input channels at every step.
struct DenoiserParams {
  Mlp mlp;
  int image_h = 0, image_w = 0, image_c = 0;
  int t_embed_dim = 16;
  int cond_dim = 0;
};

DenoiserParams make_denoiser(int h, int w, int c, int t_embed_dim, int cond_dim,
                             const std::vector<int>& hidden, Rng& rng);

Eigen::VectorXd timestep_embedding(int t, int steps, int dim);

Image predict_noise(const DenoiserParams& params, const Image& z,
                    const Image& x_ref, int t, const DiffusionSchedule& schedule,
                    const ConditionEmbedding& cond);

struct DviBatchItem {
  Image x0;     // denoising target (the view being synthesized)
  Image x_ref;  // reference view fed to the denoiser alongside z_t
  ConditionEmbedding cond;
  int t = 0;
  Image eps;
};

// One MSE-on-noise step with Adam; returns the batch loss. Throws
// NumericError with diagnostics if the loss goes non-finite.
double dvi_train_step(DenoiserParams& params, AdamState& adam,
                      const std::vector<DviBatchItem>& batch,
                      const DiffusionSchedule& schedule, double learning_rate);

// Gradient-only variant used by the finite-difference tests.
double dvi_loss_grad(const DenoiserParams& params,
                     const std::vector<DviBatchItem>& batch,
                     const DiffusionSchedule& schedule, Mlp::Grads& grads);

using EpsPredictor = std::function<Image(const Image& z, int t)>;

// Ancestral DDPM sampling from pure noise, deterministic given the seed.
Image ddpm_sample(const DiffusionSchedule& schedule, const EpsPredictor& predict,
                  int h, int w, int c, uint64_t seed);

Image dvi_sample(const DenoiserParams& params, const Image& x_ref,
                 const ConditionEmbedding& cond, const DiffusionSchedule& schedule,
                 uint64_t seed);

}  // namespace cdi3d
