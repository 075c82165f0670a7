// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cdi3d/camera.hpp"
#include "cdi3d/image.hpp"
#include "cdi3d/rng.hpp"

namespace cdi3d {

struct TokenProvenance {
  int view_id = -1;
  int patch_index = -1;
  bool operator==(const TokenProvenance&) const = default;
};

// L x D token matrix with per-token provenance (tokens are rows).
struct TokenSequence {
  Eigen::MatrixXd tokens;
  std::vector<TokenProvenance> provenance;

  int length() const { return static_cast<int>(tokens.rows()); }
  int dim() const { return static_cast<int>(tokens.cols()); }
};

// Linear patch embedding: token = proj * flatten(patch) + bias.
struct PatchEmbed {
  Eigen::MatrixXd proj;  // D x (ps*ps*C)
  Eigen::VectorXd bias;
  int patch_size = 8;
  int in_channels = 3;

  int dim() const { return static_cast<int>(proj.rows()); }
};

PatchEmbed make_patch_embed(int patch_size, int in_channels, int dim, Rng& rng);
// D = ps*ps*C, proj = I; tokens are the raw flattened patches.
PatchEmbed identity_patch_embed(int patch_size, int in_channels);

TokenSequence patchify(const Image& image, const PatchEmbed& embed, int view_id);

// A tokenized view with enough pose context to order and deduplicate.
struct ViewTokens {
  TokenSequence seq;
  ViewRole role;
  double azimuth_deg = 0.0;
  int view_id = -1;
};

// Token-axis concatenation: mains in index order, then interpolated views by
// azimuth. Shared interpolated views (main i's right set == main i+1's left
// set) appear once, keyed by view_id.
TokenSequence concat_view_tokens(const std::vector<ViewTokens>& mains,
                                 const std::vector<ViewTokens>& left,
                                 const std::vector<ViewTokens>& right);

struct AttentionParams {
  Eigen::MatrixXd w_q, w_k, w_v;  // D x D
  int heads = 1;
};

AttentionParams make_attention(int dim, int heads, Rng& rng);

struct PositionEmbedding {
  Eigen::MatrixXd p;  // L_p x D
};

PositionEmbedding make_position_embedding(int length, int dim, Rng& rng,
                                          double scale = 0.02);

// softmax(q k^T / sqrt(d_head)) v with q from p and k, v from f.
Eigen::MatrixXd cross_modal_attention(const Eigen::MatrixXd& p,
                                      const Eigen::MatrixXd& f,
                                      const AttentionParams& params);

// f^F = p + attention(p, f)
Eigen::MatrixXd fuse(const Eigen::MatrixXd& p, const Eigen::MatrixXd& f,
                     const AttentionParams& params);

struct FusionGrads {
  Eigen::MatrixXd d_p, d_f, d_wq, d_wk, d_wv;
};

// Reverse mode through fuse() for a given upstream gradient d_out.
FusionGrads fuse_backward(const Eigen::MatrixXd& p, const Eigen::MatrixXd& f,
                          const AttentionParams& params,
                          const Eigen::MatrixXd& d_out);

}  // namespace cdi3d
