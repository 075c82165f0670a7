// SPDX-License-Identifier: Apache-2.0
#include "cdi3d/mlp.hpp"

#include <cmath>

#include "cdi3d/errors.hpp"

namespace cdi3d {

Mlp Mlp::create(const std::vector<int>& sizes, Rng& rng, double init_scale) {
  if (sizes.size() < 2) throw ConfigError("Mlp needs at least input and output sizes");
  Mlp m;
  for (size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l], out = sizes[l + 1];
    if (in <= 0 || out <= 0) throw ConfigError("Mlp layer sizes must be positive");
    Eigen::MatrixXd w(out, in);
    const double sd = init_scale / std::sqrt(static_cast<double>(in));
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) w(r, c) = sd * rng.gaussian();
    m.weights.push_back(std::move(w));
    m.biases.push_back(Eigen::VectorXd::Zero(out));
  }
  return m;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  Eigen::VectorXd h = x;
  for (int l = 0; l < layer_count(); ++l) {
    h = weights[l] * h + biases[l];
    if (l + 1 < layer_count()) h = h.array().tanh();
  }
  return h;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x, Trace& trace) const {
  trace.post.clear();
  trace.post.reserve(layer_count() + 1);
  trace.post.push_back(x);
  Eigen::VectorXd h = x;
  for (int l = 0; l < layer_count(); ++l) {
    h = weights[l] * h + biases[l];
    if (l + 1 < layer_count()) h = h.array().tanh();
    trace.post.push_back(h);
  }
  return h;
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& x,
                                   BatchTrace* trace) const {
  if (trace) {
    trace->post.clear();
    trace->post.reserve(layer_count() + 1);
    trace->post.push_back(x);
  }
  Eigen::MatrixXd h = x;
  for (int l = 0; l < layer_count(); ++l) {
    Eigen::MatrixXd z = weights[l] * h;
    z.colwise() += biases[l];
    h = (l + 1 < layer_count()) ? z.array().tanh().matrix() : std::move(z);
    if (trace) trace->post.push_back(h);
  }
  return h;
}

Eigen::MatrixXd Mlp::backward_batch(const BatchTrace& trace,
                                    const Eigen::MatrixXd& d_out,
                                    Grads& g) const {
  Eigen::MatrixXd delta = d_out;
  for (int l = layer_count() - 1; l >= 0; --l) {
    if (l + 1 < layer_count()) {
      const auto& a = trace.post[l + 1];
      delta.array() *= 1.0 - a.array().square();
    }
    g.d_weights[l].noalias() += delta * trace.post[l].transpose();
    g.d_biases[l] += delta.rowwise().sum();
    if (l > 0) delta = weights[l].transpose() * delta;
  }
  return weights[0].transpose() * delta;
}

Mlp::Grads Mlp::Grads::zeros_like(const Mlp& m) {
  Grads g;
  g.d_weights.reserve(m.weights.size());
  g.d_biases.reserve(m.biases.size());
  for (const auto& w : m.weights)
    g.d_weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  for (const auto& b : m.biases)
    g.d_biases.push_back(Eigen::VectorXd::Zero(b.size()));
  return g;
}

void Mlp::Grads::scale(double s) {
  for (auto& w : d_weights) w *= s;
  for (auto& b : d_biases) b *= s;
}

void Mlp::Grads::add(const Grads& other) {
  for (size_t l = 0; l < d_weights.size(); ++l) {
    d_weights[l] += other.d_weights[l];
    d_biases[l] += other.d_biases[l];
  }
}

Eigen::VectorXd Mlp::backward(const Trace& trace, const Eigen::VectorXd& d_out,
                              Grads& g) const {
  Eigen::VectorXd delta = d_out;
  for (int l = layer_count() - 1; l >= 0; --l) {
    // trace.post[l+1] is post-activation; undo tanh on hidden layers
    if (l + 1 < layer_count()) {
      const auto& a = trace.post[l + 1];
      delta.array() *= (1.0 - a.array().square());
    }
    g.d_weights[l].noalias() += delta * trace.post[l].transpose();
    g.d_biases[l] += delta;
    if (l > 0) delta = weights[l].transpose() * delta;
  }
  return weights[0].transpose() * delta;
}

int Mlp::param_count() const {
  int n = 0;
  for (size_t l = 0; l < weights.size(); ++l)
    n += static_cast<int>(weights[l].size() + biases[l].size());
  return n;
}

void Mlp::flatten_to(std::span<double> out) const {
  size_t k = 0;
  for (size_t l = 0; l < weights.size(); ++l) {
    const auto& w = weights[l];
    for (Eigen::Index i = 0; i < w.size(); ++i) out[k++] = w.data()[i];
    const auto& b = biases[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) out[k++] = b.data()[i];
  }
}

void Mlp::unflatten_from(std::span<const double> in) {
  size_t k = 0;
  for (size_t l = 0; l < weights.size(); ++l) {
    auto& w = weights[l];
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = in[k++];
    auto& b = biases[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = in[k++];
  }
}

void Mlp::flatten_grads(const Grads& g, std::span<double> out) {
  size_t k = 0;
  for (size_t l = 0; l < g.d_weights.size(); ++l) {
    const auto& w = g.d_weights[l];
    for (Eigen::Index i = 0; i < w.size(); ++i) out[k++] = w.data()[i];
    const auto& b = g.d_biases[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) out[k++] = b.data()[i];
  }
}

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw NumericError("adam_step: size mismatch");
  state.step += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

}  // namespace cdi3d
