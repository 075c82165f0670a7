// SPDX-License-Identifier: Apache-2.0
#include "cdi3d/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cdi3d/errors.hpp"

namespace cdi3d {

PatchEmbed make_patch_embed(int patch_size, int in_channels, int dim, Rng& rng) {
  if (patch_size < 1 || in_channels < 1 || dim < 1)
    throw ConfigError("make_patch_embed: bad sizes");
  PatchEmbed e;
  e.patch_size = patch_size;
  e.in_channels = in_channels;
  const int in = patch_size * patch_size * in_channels;
  e.proj.resize(dim, in);
  const double sd = 1.0 / std::sqrt(static_cast<double>(in));
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < in; ++c) e.proj(r, c) = sd * rng.gaussian();
  e.bias = Eigen::VectorXd::Zero(dim);
  return e;
}

PatchEmbed identity_patch_embed(int patch_size, int in_channels) {
  PatchEmbed e;
  e.patch_size = patch_size;
  e.in_channels = in_channels;
  const int n = patch_size * patch_size * in_channels;
  e.proj = Eigen::MatrixXd::Identity(n, n);
  e.bias = Eigen::VectorXd::Zero(n);
  return e;
}

TokenSequence patchify(const Image& image, const PatchEmbed& embed, int view_id) {
  const int ps = embed.patch_size;
  if (image.height % ps != 0 || image.width % ps != 0)
    throw ConfigError("patchify: image dims must be divisible by patch_size");
  if (image.channels != embed.in_channels)
    throw ConfigError("patchify: channel count does not match embedding");

  const int rows = image.height / ps;
  const int cols = image.width / ps;
  const int flat = ps * ps * image.channels;

  TokenSequence out;
  out.tokens.resize(rows * cols, embed.dim());
  out.provenance.resize(static_cast<size_t>(rows) * cols);

  Eigen::VectorXd patch(flat);
  for (int pr = 0; pr < rows; ++pr) {
    for (int pc = 0; pc < cols; ++pc) {
      int k = 0;
      for (int y = 0; y < ps; ++y)
        for (int x = 0; x < ps; ++x)
          for (int c = 0; c < image.channels; ++c)
            patch[k++] = image.at(pr * ps + y, pc * ps + x, c);
      const int idx = pr * cols + pc;
      out.tokens.row(idx) = (embed.proj * patch + embed.bias).transpose();
      out.provenance[idx] = {view_id, idx};
    }
  }
  return out;
}

TokenSequence concat_view_tokens(const std::vector<ViewTokens>& mains,
                                 const std::vector<ViewTokens>& left,
                                 const std::vector<ViewTokens>& right) {
  std::vector<const ViewTokens*> ordered;
  std::set<int> seen;

  std::vector<const ViewTokens*> main_sorted;
  for (const auto& m : mains) main_sorted.push_back(&m);
  std::sort(main_sorted.begin(), main_sorted.end(),
            [](const ViewTokens* a, const ViewTokens* b) {
              return a->role.main_index < b->role.main_index;
            });
  for (const auto* m : main_sorted)
    if (seen.insert(m->view_id).second) ordered.push_back(m);

  std::vector<const ViewTokens*> interp;
  for (const auto& v : left) interp.push_back(&v);
  for (const auto& v : right) interp.push_back(&v);
  std::stable_sort(interp.begin(), interp.end(),
                   [](const ViewTokens* a, const ViewTokens* b) {
                     double aa = std::fmod(a->azimuth_deg, 360.0);
                     double bb = std::fmod(b->azimuth_deg, 360.0);
                     if (aa < 0) aa += 360.0;
                     if (bb < 0) bb += 360.0;
                     return aa < bb;
                   });
  for (const auto* v : interp)
    if (seen.insert(v->view_id).second) ordered.push_back(v);

  if (ordered.empty()) throw ConfigError("concat_view_tokens: no views");
  const int dim = ordered.front()->seq.dim();
  int total = 0;
  for (const auto* v : ordered) {
    if (v->seq.dim() != dim)
      throw ConfigError("concat_view_tokens: token dim mismatch");
    total += v->seq.length();
  }

  TokenSequence out;
  out.tokens.resize(total, dim);
  out.provenance.reserve(total);
  int row = 0;
  for (const auto* v : ordered) {
    out.tokens.middleRows(row, v->seq.length()) = v->seq.tokens;
    out.provenance.insert(out.provenance.end(), v->seq.provenance.begin(),
                          v->seq.provenance.end());
    row += v->seq.length();
  }
  return out;
}

AttentionParams make_attention(int dim, int heads, Rng& rng) {
  if (heads < 1 || dim % heads != 0)
    throw ConfigError("make_attention: dim must be divisible by heads");
  AttentionParams a;
  a.heads = heads;
  const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
  auto init = [&] {
    Eigen::MatrixXd m(dim, dim);
    for (int r = 0; r < dim; ++r)
      for (int c = 0; c < dim; ++c) m(r, c) = sd * rng.gaussian();
    return m;
  };
  a.w_q = init();
  a.w_k = init();
  a.w_v = init();
  return a;
}

PositionEmbedding make_position_embedding(int length, int dim, Rng& rng,
                                          double scale) {
  PositionEmbedding p;
  p.p.resize(length, dim);
  for (int r = 0; r < length; ++r)
    for (int c = 0; c < dim; ++c) p.p(r, c) = scale * rng.gaussian();
  return p;
}

namespace {

// Rowwise softmax with max subtraction; stable for logits up to ~1e300.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    Eigen::ArrayXd e = (logits.row(r).array() - mx).exp();
    out.row(r) = (e / e.sum()).matrix();
  }
  return out;
}

void check_dims(const Eigen::MatrixXd& p, const Eigen::MatrixXd& f,
                const AttentionParams& params) {
  const Eigen::Index d = params.w_q.rows();
  if (p.cols() != d || f.cols() != d || params.w_k.rows() != d ||
      params.w_v.rows() != d)
    throw ConfigError("attention: dimension mismatch");
  if (d % params.heads != 0)
    throw ConfigError("attention: dim not divisible by heads");
}

}  // namespace

Eigen::MatrixXd cross_modal_attention(const Eigen::MatrixXd& p,
                                      const Eigen::MatrixXd& f,
                                      const AttentionParams& params) {
  check_dims(p, f, params);
  const Eigen::Index d = p.cols();
  const int heads = params.heads;
  const Eigen::Index dh = d / heads;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dh));

  const Eigen::MatrixXd q = p * params.w_q;
  const Eigen::MatrixXd k = f * params.w_k;
  const Eigen::MatrixXd v = f * params.w_v;

  Eigen::MatrixXd out(p.rows(), d);
  for (int h = 0; h < heads; ++h) {
    const auto qh = q.middleCols(h * dh, dh);
    const auto kh = k.middleCols(h * dh, dh);
    const auto vh = v.middleCols(h * dh, dh);
    const Eigen::MatrixXd attn = softmax_rows(qh * kh.transpose() * inv_sqrt_d);
    out.middleCols(h * dh, dh) = attn * vh;
  }
  return out;
}

Eigen::MatrixXd fuse(const Eigen::MatrixXd& p, const Eigen::MatrixXd& f,
                     const AttentionParams& params) {
  return p + cross_modal_attention(p, f, params);
}

FusionGrads fuse_backward(const Eigen::MatrixXd& p, const Eigen::MatrixXd& f,
                          const AttentionParams& params,
                          const Eigen::MatrixXd& d_out) {
  check_dims(p, f, params);
  if (d_out.rows() != p.rows() || d_out.cols() != p.cols())
    throw ConfigError("fuse_backward: d_out shape mismatch");

  const Eigen::Index d = p.cols();
  const int heads = params.heads;
  const Eigen::Index dh = d / heads;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dh));

  const Eigen::MatrixXd q = p * params.w_q;
  const Eigen::MatrixXd k = f * params.w_k;
  const Eigen::MatrixXd v = f * params.w_v;

  Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(q.rows(), q.cols());
  Eigen::MatrixXd dk = Eigen::MatrixXd::Zero(k.rows(), k.cols());
  Eigen::MatrixXd dv = Eigen::MatrixXd::Zero(v.rows(), v.cols());

  for (int h = 0; h < heads; ++h) {
    const Eigen::MatrixXd qh = q.middleCols(h * dh, dh);
    const Eigen::MatrixXd kh = k.middleCols(h * dh, dh);
    const Eigen::MatrixXd vh = v.middleCols(h * dh, dh);
    const Eigen::MatrixXd attn = softmax_rows(qh * kh.transpose() * inv_sqrt_d);
    const Eigen::MatrixXd d_oh = d_out.middleCols(h * dh, dh);

    dv.middleCols(h * dh, dh) += attn.transpose() * d_oh;

    Eigen::MatrixXd d_attn = d_oh * vh.transpose();
    // softmax backward, rowwise: dL = A .* (dA - rowsum(dA .* A))
    Eigen::MatrixXd d_logits(attn.rows(), attn.cols());
    for (Eigen::Index r = 0; r < attn.rows(); ++r) {
      const double dot = d_attn.row(r).dot(attn.row(r));
      d_logits.row(r) =
          (attn.row(r).array() * (d_attn.row(r).array() - dot)).matrix();
    }
    d_logits *= inv_sqrt_d;
    dq.middleCols(h * dh, dh) += d_logits * kh;
    dk.middleCols(h * dh, dh) += d_logits.transpose() * qh;
  }

  FusionGrads g;
  g.d_wq = p.transpose() * dq;
  g.d_wk = f.transpose() * dk;
  g.d_wv = f.transpose() * dv;
  g.d_p = d_out + dq * params.w_q.transpose();
  g.d_f = dk * params.w_k.transpose() + dv * params.w_v.transpose();
  return g;
}

}  // namespace cdi3d
