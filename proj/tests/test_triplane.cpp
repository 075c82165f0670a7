// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cdi3d/errors.hpp"
#include "cdi3d/triplane.hpp"

using namespace cdi3d;

namespace {

// world coordinate in [-1,1] -> continuous node coordinate
double to_node(double a, int res) { return (a + 1.0) * 0.5 * (res - 1); }

}  // namespace

TEST_CASE("token reshaping fills XY, XZ, YZ planes row-major") {
  const int res = 4, feat = 2;
  TokenSequence seq;
  seq.tokens = Eigen::MatrixXd::Zero(3 * res * res, feat);
  for (int i = 0; i < seq.tokens.rows(); ++i) {
    seq.tokens(i, 0) = i;
    seq.tokens(i, 1) = -i;
  }
  seq.provenance.resize(static_cast<size_t>(seq.tokens.rows()));

  const TriPlane tp =
      tokens_to_triplane(seq, res, feat, identity_token_projection(feat));
  // token k of plane p lands in planes[p] row k (row-major over the plane)
  for (int p = 0; p < 3; ++p)
    for (int k = 0; k < res * res; ++k) {
      CHECK(tp.planes[p](k, 0) == p * res * res + k);
      CHECK(tp.planes[p](k, 1) == -(p * res * res + k));
    }

  TokenSequence wrong = seq;
  wrong.tokens.conservativeResize(res * res, feat);
  CHECK_THROWS_AS(
      tokens_to_triplane(wrong, res, feat, identity_token_projection(feat)),
      ConfigError);
}

TEST_CASE("learned token projection maps token dim to feature dim") {
  Rng rng(3);
  const TokenProjection proj = make_token_projection(6, 3, rng);
  TokenSequence seq;
  seq.tokens = Eigen::MatrixXd::NullaryExpr(
      3 * 4 * 4, 6, [&](Eigen::Index, Eigen::Index) { return rng.gaussian(); });
  seq.provenance.resize(3 * 4 * 4);
  const TriPlane tp = tokens_to_triplane(seq, 4, 3, proj);
  const Eigen::VectorXd expect =
      proj.proj * seq.tokens.row(5).transpose() + proj.bias;
  CHECK((tp.planes[0].row(5).transpose() - expect).norm() < 1e-12);
}

TEST_CASE("bilinear sampling is exact for affine plane features") {
  // Features affine in the node coordinates are reproduced exactly by
  // bilinear interpolation - the classical sharpness test.
  const int res = 8, feat = 2;
  TriPlane tp = TriPlane::zeros(res, feat);
  const double cu[3] = {0.3, -0.7, 0.25};
  const double cv[3] = {-0.5, 0.2, 0.9};
  const double c0[3] = {1.0, -2.0, 0.5};
  for (int p = 0; p < 3; ++p)
    for (int r = 0; r < res; ++r)      // v (second coordinate)
      for (int c = 0; c < res; ++c) {  // u (first coordinate)
        tp.planes[p](r * res + c, 0) = c0[p] + cu[p] * c + cv[p] * r;
        tp.planes[p](r * res + c, 1) = 2.0;  // constant second channel
      }

  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d pt{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                             rng.uniform(-1.0, 1.0)};
    const Eigen::VectorXd f = sample_triplane(tp, pt);
    REQUIRE(f.size() == 3 * feat);
    const double uv[3][2] = {{to_node(pt.x(), res), to_node(pt.y(), res)},
                             {to_node(pt.x(), res), to_node(pt.z(), res)},
                             {to_node(pt.y(), res), to_node(pt.z(), res)}};
    for (int p = 0; p < 3; ++p) {
      const double expect = c0[p] + cu[p] * uv[p][0] + cv[p] * uv[p][1];
      CHECK(f[p * feat + 0] == doctest::Approx(expect).epsilon(1e-12));
      CHECK(f[p * feat + 1] == doctest::Approx(2.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("sampling clamps outside the unit cube") {
  const int res = 4, feat = 1;
  TriPlane tp = TriPlane::zeros(res, feat);
  tp.planes[0].col(0).setLinSpaced(16, 0.0, 15.0);
  const Eigen::VectorXd inside = sample_triplane(tp, {1.0, 1.0, 0.0});
  const Eigen::VectorXd outside = sample_triplane(tp, {3.5, 2.0, 0.0});
  CHECK(inside[0] == outside[0]);
  CHECK(inside[0] == 15.0);  // corner node value
}

TEST_CASE("sampling gradients scatter to the four taps per plane") {
  const int res = 5, feat = 3;
  Rng rng(4);
  TriPlane tp = TriPlane::zeros(res, feat);
  for (auto& plane : tp.planes)
    plane = Eigen::MatrixXd::NullaryExpr(
        res * res, feat, [&](Eigen::Index, Eigen::Index) { return rng.gaussian(); });

  const Eigen::Vector3d pt{0.23, -0.51, 0.78};
  TriPlaneTaps taps;
  sample_triplane(tp, pt, &taps);
  const Eigen::VectorXd d_feat = Eigen::VectorXd::NullaryExpr(
      3 * feat, [&](Eigen::Index) { return rng.gaussian(); });

  std::array<Eigen::MatrixXd, 3> d_planes;
  for (auto& d : d_planes) d = Eigen::MatrixXd::Zero(res * res, feat);
  sample_triplane_backward(taps, feat, d_feat, d_planes);

  const double h = 1e-6;
  for (int p = 0; p < 3; ++p) {
    for (int probe = 0; probe < 8; ++probe) {
      const int node = static_cast<int>(rng.uniform_int(0, res * res - 1));
      const int c = static_cast<int>(rng.uniform_int(0, feat - 1));
      const double keep = tp.planes[p](node, c);
      tp.planes[p](node, c) = keep + h;
      const double lp = sample_triplane(tp, pt).dot(d_feat);
      tp.planes[p](node, c) = keep - h;
      const double lm = sample_triplane(tp, pt).dot(d_feat);
      tp.planes[p](node, c) = keep;
      const double fd = (lp - lm) / (2.0 * h);
      CHECK(d_planes[p](node, c) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("decoder activations: softplus density, sigmoid color, empty start") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(softplus(50.0) == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(softplus(-50.0) > 0.0);
  CHECK(sigmoid(0.0) == 0.5);

  Rng rng(2);
  const FieldDecoderParams dec = make_field_decoder(6, {8}, rng);
  // zero features decode to a near-empty field thanks to the low density bias
  const FieldSample s = decode_field(dec, Eigen::VectorXd::Zero(6));
  CHECK(s.density < 0.05);
  CHECK(s.rgb.minCoeff() > 0.0);
  CHECK(s.rgb.maxCoeff() < 1.0);
}

TEST_CASE("decoder backward matches finite differences") {
  Rng rng(8);
  const FieldDecoderParams dec = make_field_decoder(4, {6}, rng);
  Eigen::VectorXd feat =
      Eigen::VectorXd::NullaryExpr(4, [&](Eigen::Index) { return rng.gaussian(); });

  const double d_density = 0.7;
  const Eigen::Vector3d d_rgb{0.3, -1.1, 0.5};

  Mlp::Trace trace;
  Eigen::Vector4d raw;
  decode_field(dec, feat, trace, raw);
  Mlp::Grads g = Mlp::Grads::zeros_like(dec.mlp);
  const Eigen::VectorXd d_feat =
      decode_field_backward(dec, trace, raw, d_density, d_rgb, g);

  const auto loss = [&](const Eigen::VectorXd& f) {
    const FieldSample s = decode_field(dec, f);
    return d_density * s.density + d_rgb.dot(s.rgb);
  };
  const double h = 1e-6;
  for (int i = 0; i < 4; ++i) {
    Eigen::VectorXd fp = feat, fm = feat;
    fp[i] += h;
    fm[i] -= h;
    const double fd = (loss(fp) - loss(fm)) / (2.0 * h);
    CHECK(d_feat[i] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("analytic shapes: signed distances and the density shell") {
  const AnalyticShape sphere = make_shape(ShapeKind::Sphere);
  CHECK(sphere.sdf({0.0, 0.0, 0.0}) == doctest::Approx(-sphere.radius));
  CHECK(sphere.sdf({1.0, 0.0, 0.0}) == doctest::Approx(1.0 - sphere.radius));
  // the surface sits exactly at half the maximum density
  CHECK(sphere.density({sphere.radius, 0.0, 0.0}) ==
        doctest::Approx(sphere.sigma_max / 2.0).epsilon(1e-12));
  CHECK(sphere.density({0.0, 0.0, 0.0}) == doctest::Approx(sphere.sigma_max));
  CHECK(sphere.density({0.9, 0.0, 0.0}) == 0.0);

  const AnalyticShape torus = make_shape(ShapeKind::Torus);
  // a point on the tube center circle is maximally inside
  CHECK(torus.sdf({torus.major_radius, 0.0, 0.0}) ==
        doctest::Approx(-torus.minor_radius));
  CHECK(torus.density({0.0, 0.0, 0.0}) == 0.0);  // hole

  const AnalyticShape box = make_shape(ShapeKind::Box);
  CHECK(box.sdf({0.0, 0.0, 0.0}) < 0.0);
  CHECK(box.sdf({box.half_extents.x(), 0.0, 0.0}) == doctest::Approx(0.0));
  CHECK(box.sdf({1.0, 1.0, 1.0}) > 0.0);

  for (const auto& shape : {sphere, torus, box}) {
    const FieldSample s = shape.sample({0.05, -0.1, 0.2});
    CHECK(s.density >= 0.0);
    CHECK((s.rgb.array() >= 0.0).all());
    CHECK((s.rgb.array() <= 1.0).all());
  }
}
