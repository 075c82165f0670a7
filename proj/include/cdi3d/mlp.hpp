// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "cdi3d/rng.hpp"

namespace cdi3d {

// Small fully connected network: tanh on hidden layers, identity output.
// tanh keeps every path smooth, which the finite-difference gradient checks
// rely on.
struct Mlp {
  std::vector<Eigen::MatrixXd> weights;  // [out x in] per layer
  std::vector<Eigen::VectorXd> biases;

  // sizes = {in, hidden..., out}; weights ~ N(0, scale^2/fan_in).
  static Mlp create(const std::vector<int>& sizes, Rng& rng, double init_scale = 1.0);

  int input_dim() const { return static_cast<int>(weights.front().cols()); }
  int output_dim() const { return static_cast<int>(weights.back().rows()); }
  int layer_count() const { return static_cast<int>(weights.size()); }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;

  // Activations cached for reverse mode. post[0] is the input; post[l] the
  // activation after layer l (tanh applied on hidden layers).
  struct Trace {
    std::vector<Eigen::VectorXd> post;
  };
  Eigen::VectorXd forward(const Eigen::VectorXd& x, Trace& trace) const;

  struct Grads {
    std::vector<Eigen::MatrixXd> d_weights;
    std::vector<Eigen::VectorXd> d_biases;

    static Grads zeros_like(const Mlp& m);
    void scale(double s);
    void add(const Grads& other);
  };

  // Accumulates parameter gradients into g and returns dL/dx.
  Eigen::VectorXd backward(const Trace& trace, const Eigen::VectorXd& d_out,
                           Grads& g) const;

  // Column-batched variants (x is in x B); identical math, but the layer
  // products become matrix-matrix so large sample batches run at GEMM speed.
  struct BatchTrace {
    std::vector<Eigen::MatrixXd> post;
  };
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x,
                                BatchTrace* trace = nullptr) const;
  Eigen::MatrixXd backward_batch(const BatchTrace& trace,
                                 const Eigen::MatrixXd& d_out, Grads& g) const;

  int param_count() const;
  void flatten_to(std::span<double> out) const;
  void unflatten_from(std::span<const double> in);
  static void flatten_grads(const Grads& g, std::span<double> out);
};

// Adam with bias correction over a flat parameter vector.
struct AdamState {
  std::vector<double> m, v;
  long step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  explicit AdamState(size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, double lr);

}  // namespace cdi3d
