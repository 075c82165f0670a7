// SPDX-License-Identifier: Apache-2.0
#include "cdi3d/dvi.hpp"

#include <cmath>

#include "cdi3d/errors.hpp"

namespace cdi3d {

RefCondAssignment assign_ref_cond(int slot, int num_interp) {
  if (slot < 1 || slot > num_interp)
    throw ConfigError("assign_ref_cond: slot must lie in [1, num_interp]");
  // i <= n/2 with n/2 taken as a real number
  if (static_cast<double>(slot) <= static_cast<double>(num_interp) / 2.0)
    return {1, 2};
  return {2, 1};
}

DiffusionSchedule make_schedule(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw ConfigError("make_schedule: steps must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw ConfigError("make_schedule: need 0 < beta_start <= beta_end < 1");
  DiffusionSchedule s;
  s.steps = steps;
  s.beta.resize(steps);
  s.alpha.resize(steps);
  s.alpha_bar.resize(steps);
  for (int t = 0; t < steps; ++t) {
    s.beta[t] = steps == 1
                    ? beta_start
                    : beta_start + (beta_end - beta_start) * t / (steps - 1);
    s.alpha[t] = 1.0 - s.beta[t];
    s.alpha_bar[t] = (t == 0 ? s.alpha[t] : s.alpha_bar[t - 1] * s.alpha[t]);
  }
  return s;
}

Image q_sample(const Image& x0, int t, const Image& eps,
               const DiffusionSchedule& schedule) {
  if (!x0.same_shape(eps)) throw ConfigError("q_sample: x0/eps shape mismatch");
  if (t < 0 || t >= schedule.steps) throw ConfigError("q_sample: t out of range");
  const double a = std::sqrt(schedule.alpha_bar[t]);
  const double b = std::sqrt(1.0 - schedule.alpha_bar[t]);
  Image out = x0;
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = a * x0.data[i] + b * eps.data[i];
  return out;
}

ConditionEncoder make_condition_encoder(int h, int w, int c, int feature_dim,
                                        Rng& rng) {
  ConditionEncoder e;
  e.image_h = h;
  e.image_w = w;
  e.image_c = c;
  const int in = h * w * c;
  e.weight.resize(feature_dim, in);
  const double sd = 1.0 / std::sqrt(static_cast<double>(in));
  for (int r = 0; r < feature_dim; ++r)
    for (int j = 0; j < in; ++j) e.weight(r, j) = sd * rng.gaussian();
  e.bias = Eigen::VectorXd::Zero(feature_dim);
  return e;
}

ConditionEmbedding embed_condition(const ConditionEncoder& encoder,
                                   const Image& cond_image,
                                   const RelativePose& rel) {
  if (cond_image.height != encoder.image_h || cond_image.width != encoder.image_w ||
      cond_image.channels != encoder.image_c)
    throw ConfigError("embed_condition: image shape does not match encoder");
  const Eigen::Map<const Eigen::VectorXd> flat(cond_image.data.data(),
                                               static_cast<Eigen::Index>(cond_image.size()));
  ConditionEmbedding out;
  out.feature_dim = static_cast<int>(encoder.weight.rows());
  out.values.resize(out.feature_dim + 3);
  out.values.head(out.feature_dim) = encoder.weight * flat + encoder.bias;
  out.values[out.feature_dim + 0] = rel.d_azimuth_deg;
  out.values[out.feature_dim + 1] = rel.d_elevation_deg;
  out.values[out.feature_dim + 2] = rel.d_radius;
  return out;
}

DenoiserParams make_denoiser(int h, int w, int c, int t_embed_dim, int cond_dim,
                             const std::vector<int>& hidden, Rng& rng) {
  DenoiserParams p;
  p.image_h = h;
  p.image_w = w;
  p.image_c = c;
  p.t_embed_dim = t_embed_dim;
  p.cond_dim = cond_dim;
  const int pixels = h * w * c;
  std::vector<int> sizes;
  sizes.push_back(2 * pixels + t_embed_dim + cond_dim);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(pixels);
  p.mlp = Mlp::create(sizes, rng);
  return p;
}

Eigen::VectorXd timestep_embedding(int t, int steps, int dim) {
  // classic sinusoidal pairs over log-spaced wavelengths of the raw step
  // index; using t directly (not t/steps) keeps every pair of timesteps
  // separable -- a normalized angle would wrap back onto t=0 at the end of
  // the schedule
  Eigen::VectorXd e(dim);
  const int half = dim / 2;
  for (int k = 0; k < half; ++k) {
    const double inv_freq =
        std::pow(10000.0, -static_cast<double>(k) / std::max(1, half));
    e[2 * k] = std::sin(t * inv_freq);
    e[2 * k + 1] = std::cos(t * inv_freq);
  }
  if (dim % 2 == 1)
    e[dim - 1] = steps > 1 ? static_cast<double>(t) / (steps - 1) : 0.0;
  return e;
}

namespace {

Eigen::VectorXd denoiser_input(const DenoiserParams& p, const Image& z,
                               const Image& x_ref, int t,
                               const DiffusionSchedule& schedule,
                               const ConditionEmbedding& cond) {
  const int pixels = p.image_h * p.image_w * p.image_c;
  if (static_cast<int>(z.size()) != pixels || static_cast<int>(x_ref.size()) != pixels)
    throw ConfigError("denoiser: image shape mismatch");
  if (static_cast<int>(cond.values.size()) != p.cond_dim)
    throw ConfigError("denoiser: condition dim mismatch");
  Eigen::VectorXd in(2 * pixels + p.t_embed_dim + p.cond_dim);
  in.head(pixels) = Eigen::Map<const Eigen::VectorXd>(z.data.data(), pixels);
  in.segment(pixels, pixels) =
      Eigen::Map<const Eigen::VectorXd>(x_ref.data.data(), pixels);
  in.segment(2 * pixels, p.t_embed_dim) =
      timestep_embedding(t, schedule.steps, p.t_embed_dim);
  in.tail(p.cond_dim) = cond.values;
  return in;
}

Image vector_to_image(const Eigen::VectorXd& v, int h, int w, int c) {
  Image img(h, w, c);
  Eigen::Map<Eigen::VectorXd>(img.data.data(), v.size()) = v;
  return img;
}

}  // namespace

Image predict_noise(const DenoiserParams& params, const Image& z,
                    const Image& x_ref, int t, const DiffusionSchedule& schedule,
                    const ConditionEmbedding& cond) {
  const Eigen::VectorXd in = denoiser_input(params, z, x_ref, t, schedule, cond);
  return vector_to_image(params.mlp.forward(in), params.image_h, params.image_w,
                         params.image_c);
}

double dvi_loss_grad(const DenoiserParams& params,
                     const std::vector<DviBatchItem>& batch,
                     const DiffusionSchedule& schedule, Mlp::Grads& grads) {
  if (batch.empty()) throw ConfigError("dvi loss: empty batch");
  const int pixels = params.image_h * params.image_w * params.image_c;
  double loss = 0.0;
  for (const auto& item : batch) {
    const Image z = q_sample(item.x0, item.t, item.eps, schedule);
    const Image& ref = item.x_ref.empty() ? item.x0 : item.x_ref;
    const Eigen::VectorXd in =
        denoiser_input(params, z, ref, item.t, schedule, item.cond);
    Mlp::Trace trace;
    const Eigen::VectorXd pred = params.mlp.forward(in, trace);
    const Eigen::Map<const Eigen::VectorXd> eps(item.eps.data.data(), pixels);
    const Eigen::VectorXd resid = pred - eps;
    loss += resid.squaredNorm() / pixels;
    // d(mean sq err)/d pred, averaged over the batch
    const Eigen::VectorXd d_out =
        resid * (2.0 / (pixels * static_cast<double>(batch.size())));
    params.mlp.backward(trace, d_out, grads);
  }
  return loss / static_cast<double>(batch.size());
}

double dvi_train_step(DenoiserParams& params, AdamState& adam,
                      const std::vector<DviBatchItem>& batch,
                      const DiffusionSchedule& schedule, double learning_rate) {
  Mlp::Grads grads = Mlp::Grads::zeros_like(params.mlp);
  const double loss = dvi_loss_grad(params, batch, schedule, grads);
  if (!std::isfinite(loss))
    throw NumericError("dvi_train_step: non-finite loss at adam step " +
                       std::to_string(adam.step + 1) +
                       " (t=" + std::to_string(batch.front().t) + ")");
  const int n = params.mlp.param_count();
  std::vector<double> flat(n), gflat(n);
  params.mlp.flatten_to(flat);
  Mlp::flatten_grads(grads, gflat);
  if (adam.m.empty()) adam = AdamState(n);
  adam_step(flat, gflat, adam, learning_rate);
  params.mlp.unflatten_from(flat);
  return loss;
}

Image ddpm_sample(const DiffusionSchedule& schedule, const EpsPredictor& predict,
                  int h, int w, int c, uint64_t seed) {
  Rng rng(seed);
  Image z(h, w, c);
  for (auto& v : z.data) v = rng.gaussian();

  for (int t = schedule.steps - 1; t >= 0; --t) {
    const Image eps_hat = predict(z, t);
    const double alpha = schedule.alpha[t];
    const double alpha_bar = schedule.alpha_bar[t];
    const double beta = schedule.beta[t];
    const double coef = beta / std::sqrt(1.0 - alpha_bar);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
    // posterior variance beta_tilde = (1 - abar_{t-1}) / (1 - abar_t) * beta
    double sigma = 0.0;
    if (t > 0) {
      const double abar_prev = schedule.alpha_bar[t - 1];
      sigma = std::sqrt((1.0 - abar_prev) / (1.0 - alpha_bar) * beta);
    }
    for (size_t i = 0; i < z.data.size(); ++i) {
      double v = inv_sqrt_alpha * (z.data[i] - coef * eps_hat.data[i]);
      if (t > 0) v += sigma * rng.gaussian();
      z.data[i] = v;
    }
  }
  return z;
}

Image dvi_sample(const DenoiserParams& params, const Image& x_ref,
                 const ConditionEmbedding& cond, const DiffusionSchedule& schedule,
                 uint64_t seed) {
  return ddpm_sample(
      schedule,
      [&](const Image& z, int t) {
        return predict_noise(params, z, x_ref, t, schedule, cond);
      },
      params.image_h, params.image_w, params.image_c, seed);
}

}  // namespace cdi3d
