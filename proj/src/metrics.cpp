// SPDX-License-Identifier: Apache-2.0
#include "cdi3d/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>

#include "cdi3d/errors.hpp"
#include "cdi3d/rng.hpp"

namespace cdi3d {

void MetricsConfig::validate() const {
  if (chamfer_samples < 1 || iou_resolution < 2 || eval_resolution < 16 ||
      eval_azimuth_count < 1 || fscore_tau <= 0.0 || eval_radius <= 0.0 ||
      eval_elevations_deg.empty())
    throw ConfigError("metrics config: out-of-range value");
}

std::vector<Eigen::Vector3d> sample_mesh_points(const TriangleMesh& mesh,
                                                int count, uint64_t seed) {
  if (mesh.faces.empty()) throw ConfigError("sample_mesh_points: empty mesh");
  std::vector<double> cum(mesh.faces.size());
  double total = 0.0;
  for (size_t i = 0; i < mesh.faces.size(); ++i) {
    const auto& f = mesh.faces[i];
    const Eigen::Vector3d e1 = mesh.vertices[f[1]] - mesh.vertices[f[0]];
    const Eigen::Vector3d e2 = mesh.vertices[f[2]] - mesh.vertices[f[0]];
    total += 0.5 * e1.cross(e2).norm();
    cum[i] = total;
  }
  if (total <= 0.0) throw NumericError("sample_mesh_points: zero surface area");

  Rng rng(seed);
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double r = rng.uniform() * total;
    const size_t fi =
        std::lower_bound(cum.begin(), cum.end(), r) - cum.begin();
    const auto& f = mesh.faces[std::min(fi, mesh.faces.size() - 1)];
    double u = rng.uniform(), v = rng.uniform();
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    pts.push_back(mesh.vertices[f[0]] +
                  u * (mesh.vertices[f[1]] - mesh.vertices[f[0]]) +
                  v * (mesh.vertices[f[2]] - mesh.vertices[f[0]]));
  }
  return pts;
}

PointGrid::PointGrid(std::vector<Eigen::Vector3d> points)
    : points_(std::move(points)) {
  if (points_.empty()) throw ConfigError("PointGrid: empty point set");
  Eigen::Vector3d hi = points_[0];
  lo_ = points_[0];
  for (const auto& p : points_) {
    lo_ = lo_.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Eigen::Vector3d ext = (hi - lo_).cwiseMax(1e-12);
  const double vol = ext.prod();
  // Aim for ~2 points per occupied cell.
  cell_ = std::cbrt(vol / std::max<double>(points_.size() / 2.0, 1.0));
  cell_ = std::max(cell_, 1e-9);
  for (int a = 0; a < 3; ++a)
    dims_[a] = std::clamp(static_cast<int>(ext[a] / cell_) + 1, 1, 160);
  cells_.resize(static_cast<size_t>(dims_[0]) * dims_[1] * dims_[2]);
  for (size_t i = 0; i < points_.size(); ++i) {
    int c[3];
    for (int a = 0; a < 3; ++a)
      c[a] = std::clamp(static_cast<int>((points_[i][a] - lo_[a]) / cell_), 0,
                        dims_[a] - 1);
    cells_[(static_cast<size_t>(c[2]) * dims_[1] + c[1]) * dims_[0] + c[0]]
        .push_back(static_cast<int>(i));
  }
}

double PointGrid::nearest_sq(const Eigen::Vector3d& query) const {
  // Unclamped home cell; ring r cells only contain points at distance
  // >= (r-1)*cell, which bounds the search exactly.
  int q[3];
  for (int a = 0; a < 3; ++a)
    q[a] = static_cast<int>(std::floor((query[a] - lo_[a]) / cell_));

  double best = std::numeric_limits<double>::infinity();
  int max_ring = 2;
  for (int a = 0; a < 3; ++a)
    max_ring = std::max({max_ring, q[a] + 1, dims_[a] - q[a] + 1});

  for (int r = 0; r <= max_ring; ++r) {
    if (std::isfinite(best)) {
      const double bound = (r - 1) * cell_;
      if (bound > 0.0 && bound * bound >= best) break;
    }
    for (int dz = -r; dz <= r; ++dz) {
      const int z = q[2] + dz;
      if (z < 0 || z >= dims_[2]) continue;
      for (int dy = -r; dy <= r; ++dy) {
        const int y = q[1] + dy;
        if (y < 0 || y >= dims_[1]) continue;
        const bool shell_yz = std::abs(dz) == r || std::abs(dy) == r;
        for (int dx = -r; dx <= r; ++dx) {
          if (!shell_yz && std::abs(dx) != r) continue;
          const int x = q[0] + dx;
          if (x < 0 || x >= dims_[0]) continue;
          const auto& bucket =
              cells_[(static_cast<size_t>(z) * dims_[1] + y) * dims_[0] + x];
          for (int idx : bucket)
            best = std::min(best, (points_[idx] - query).squaredNorm());
        }
      }
    }
  }
  return best;
}

namespace {

double mean_nearest_sq(const std::vector<Eigen::Vector3d>& from,
                       const PointGrid& to) {
  double sum = 0.0;
  for (const auto& p : from) sum += to.nearest_sq(p);
  return sum / static_cast<double>(from.size());
}

}  // namespace

double chamfer_distance(const std::vector<Eigen::Vector3d>& a,
                        const std::vector<Eigen::Vector3d>& b) {
  if (a.empty() || b.empty())
    throw ConfigError("chamfer_distance: empty point set");
  const PointGrid ga(a), gb(b);
  return 0.5 * (mean_nearest_sq(a, gb) + mean_nearest_sq(b, ga));
}

double f_score(const std::vector<Eigen::Vector3d>& pred,
               const std::vector<Eigen::Vector3d>& gt, double tau) {
  if (pred.empty() || gt.empty()) throw ConfigError("f_score: empty point set");
  const double tau_sq = tau * tau;
  const PointGrid gp(pred), gg(gt);
  int hits = 0;
  for (const auto& p : pred)
    if (gg.nearest_sq(p) <= tau_sq) ++hits;
  const double precision = static_cast<double>(hits) / pred.size();
  hits = 0;
  for (const auto& p : gt)
    if (gp.nearest_sq(p) <= tau_sq) ++hits;
  const double recall = static_cast<double>(hits) / gt.size();
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

namespace {

// Crossing coordinates of axis-parallel scanlines against a mesh. Lines run
// along `axis`; (u, v) index the two remaining axes in ascending order
// (x-lines -> (y, z), y-lines -> (x, z), z-lines -> (x, y)).
struct ScanTable {
  int res;
  std::vector<std::vector<double>> lines;  // res*res, sorted crossings

  const std::vector<double>& line(int iu, int iv) const {
    return lines[static_cast<size_t>(iv) * res + iu];
  }
};

ScanTable build_scan_table(const TriangleMesh& mesh, int axis,
                           const Eigen::Vector3d& lo,
                           const Eigen::Vector3d& cell, int res) {
  const int ua = axis == 0 ? 1 : 0;
  const int va = axis == 2 ? 1 : 2;
  ScanTable table;
  table.res = res;
  table.lines.resize(static_cast<size_t>(res) * res);

  // Keep scanlines off triangle edges: offsets irrational w.r.t. the grid.
  const double ju = 0.5 + 3.7e-5;
  const double jv = 0.5 + 7.3e-5;

  for (const auto& f : mesh.faces) {
    const Eigen::Vector3d& p0 = mesh.vertices[f[0]];
    const Eigen::Vector3d e1 = mesh.vertices[f[1]] - p0;
    const Eigen::Vector3d e2 = mesh.vertices[f[2]] - p0;
    const double det = e1[ua] * e2[va] - e2[ua] * e1[va];
    if (std::abs(det) < 1e-14) continue;  // parallel to the scan axis

    double umin = p0[ua], umax = p0[ua], vmin = p0[va], vmax = p0[va];
    for (int k : {f[1], f[2]}) {
      umin = std::min(umin, mesh.vertices[k][ua]);
      umax = std::max(umax, mesh.vertices[k][ua]);
      vmin = std::min(vmin, mesh.vertices[k][va]);
      vmax = std::max(vmax, mesh.vertices[k][va]);
    }
    const int iu0 = std::max(0, static_cast<int>(std::ceil((umin - lo[ua]) / cell[ua] - ju)) - 1);
    const int iu1 = std::min(res - 1, static_cast<int>(std::floor((umax - lo[ua]) / cell[ua] - ju)) + 1);
    const int iv0 = std::max(0, static_cast<int>(std::ceil((vmin - lo[va]) / cell[va] - jv)) - 1);
    const int iv1 = std::min(res - 1, static_cast<int>(std::floor((vmax - lo[va]) / cell[va] - jv)) + 1);

    for (int iv = iv0; iv <= iv1; ++iv) {
      const double v = lo[va] + (iv + jv) * cell[va];
      for (int iu = iu0; iu <= iu1; ++iu) {
        const double u = lo[ua] + (iu + ju) * cell[ua];
        const double ru = u - p0[ua];
        const double rv = v - p0[va];
        const double a = (ru * e2[va] - e2[ua] * rv) / det;
        const double b = (e1[ua] * rv - ru * e1[va]) / det;
        if (a < 0.0 || b < 0.0 || a + b > 1.0) continue;
        table.lines[static_cast<size_t>(iv) * res + iu].push_back(
            p0[axis] + a * e1[axis] + b * e2[axis]);
      }
    }
  }
  for (auto& line : table.lines) std::sort(line.begin(), line.end());
  return table;
}

bool parity_inside(const std::vector<double>& crossings, double coord) {
  int below = 0;
  for (double c : crossings) {
    if (c < coord)
      ++below;
    else
      break;
  }
  return (below & 1) != 0;
}

// res^3 occupancy bitmap by majority vote over the three scan axes.
std::vector<uint8_t> occupancy(const TriangleMesh& mesh,
                               const Eigen::Vector3d& lo,
                               const Eigen::Vector3d& cell, int res) {
  const ScanTable tx = build_scan_table(mesh, 0, lo, cell, res);
  const ScanTable ty = build_scan_table(mesh, 1, lo, cell, res);
  const ScanTable tz = build_scan_table(mesh, 2, lo, cell, res);

  std::vector<uint8_t> inside(static_cast<size_t>(res) * res * res, 0);
  size_t i = 0;
  for (int iz = 0; iz < res; ++iz) {
    const double z = lo[2] + (iz + 0.5) * cell[2];
    for (int iy = 0; iy < res; ++iy) {
      const double y = lo[1] + (iy + 0.5) * cell[1];
      for (int ix = 0; ix < res; ++ix, ++i) {
        const double x = lo[0] + (ix + 0.5) * cell[0];
        const int votes = (parity_inside(tx.line(iy, iz), x) ? 1 : 0) +
                          (parity_inside(ty.line(ix, iz), y) ? 1 : 0) +
                          (parity_inside(tz.line(ix, iy), z) ? 1 : 0);
        inside[i] = votes >= 2 ? 1 : 0;
      }
    }
  }
  return inside;
}

}  // namespace

double volume_iou(const TriangleMesh& a, const TriangleMesh& b,
                  int resolution) {
  if (a.faces.empty() || b.faces.empty())
    throw ConfigError("volume_iou: empty mesh");
  Eigen::Vector3d lo_a, hi_a, lo_b, hi_b;
  mesh_bounds(a, lo_a, hi_a);
  mesh_bounds(b, lo_b, hi_b);
  Eigen::Vector3d lo = lo_a.cwiseMin(lo_b);
  Eigen::Vector3d hi = hi_a.cwiseMax(hi_b);
  const Eigen::Vector3d pad = (hi - lo).cwiseMax(1e-6) * (1.0 / resolution);
  lo -= pad;
  hi += pad;
  const Eigen::Vector3d cell = (hi - lo) / resolution;

  const std::vector<uint8_t> in_a = occupancy(a, lo, cell, resolution);
  const std::vector<uint8_t> in_b = occupancy(b, lo, cell, resolution);
  long inter = 0, uni = 0;
  for (size_t i = 0; i < in_a.size(); ++i) {
    inter += in_a[i] & in_b[i];
    uni += in_a[i] | in_b[i];
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
}

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b) || a.empty()) throw ConfigError("psnr: shape mismatch");
  double mse = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.data.size());
  if (mse < 1e-10) return 99.0;
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b) || a.empty()) throw ConfigError("ssim: shape mismatch");
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  if (a.height < kWin || a.width < kWin)
    throw ConfigError("ssim: image smaller than the 11x11 window");

  double kernel[kWin][kWin];
  double ksum = 0.0;
  for (int i = 0; i < kWin; ++i)
    for (int j = 0; j < kWin; ++j) {
      const double dy = i - kWin / 2, dx = j - kWin / 2;
      kernel[i][j] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
      ksum += kernel[i][j];
    }
  for (auto& row : kernel)
    for (double& k : row) k /= ksum;

  double total = 0.0;
  long count = 0;
  for (int c = 0; c < a.channels; ++c) {
    for (int y = 0; y + kWin <= a.height; ++y) {
      for (int x = 0; x + kWin <= a.width; ++x) {
        double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
        for (int i = 0; i < kWin; ++i)
          for (int j = 0; j < kWin; ++j) {
            const double w = kernel[i][j];
            const double va = a.at(y + i, x + j, c);
            const double vb = b.at(y + i, x + j, c);
            mx += w * va;
            my += w * vb;
            xx += w * va * va;
            yy += w * vb * vb;
            xy += w * va * vb;
          }
        const double sx = xx - mx * mx;
        const double sy = yy - my * my;
        const double sxy = xy - mx * my;
        total += ((2 * mx * my + kC1) * (2 * sxy + kC2)) /
                 ((mx * mx + my * my + kC1) * (sx + sy + kC2));
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

namespace {

struct TriangleGrid {
  const TriangleMesh* mesh = nullptr;
  Eigen::Vector3d lo, hi, cell;
  int dims[3] = {1, 1, 1};
  std::vector<std::vector<int>> cells;

  explicit TriangleGrid(const TriangleMesh& m) : mesh(&m) {
    mesh_bounds(m, lo, hi);
    const Eigen::Vector3d ext = (hi - lo).cwiseMax(1e-9);
    lo -= 1e-6 * ext;
    hi += 1e-6 * ext;
    const int res = std::clamp(
        static_cast<int>(std::cbrt(2.0 * static_cast<double>(m.faces.size()))),
        4, 96);
    for (int a = 0; a < 3; ++a) dims[a] = res;
    cell = (hi - lo).cwiseQuotient(
        Eigen::Vector3d(dims[0], dims[1], dims[2]));
    cells.resize(static_cast<size_t>(dims[0]) * dims[1] * dims[2]);
    for (size_t fi = 0; fi < m.faces.size(); ++fi) {
      Eigen::Vector3d flo = m.vertices[m.faces[fi][0]];
      Eigen::Vector3d fhi = flo;
      for (int k : {1, 2}) {
        flo = flo.cwiseMin(m.vertices[m.faces[fi][k]]);
        fhi = fhi.cwiseMax(m.vertices[m.faces[fi][k]]);
      }
      int c0[3], c1[3];
      for (int a = 0; a < 3; ++a) {
        c0[a] = std::clamp(static_cast<int>((flo[a] - lo[a]) / cell[a]), 0,
                           dims[a] - 1);
        c1[a] = std::clamp(static_cast<int>((fhi[a] - lo[a]) / cell[a]), 0,
                           dims[a] - 1);
      }
      for (int z = c0[2]; z <= c1[2]; ++z)
        for (int y = c0[1]; y <= c1[1]; ++y)
          for (int x = c0[0]; x <= c1[0]; ++x)
            cells[(static_cast<size_t>(z) * dims[1] + y) * dims[0] + x]
                .push_back(static_cast<int>(fi));
    }
  }

  const std::vector<int>& at(int x, int y, int z) const {
    return cells[(static_cast<size_t>(z) * dims[1] + y) * dims[0] + x];
  }
};

bool ray_triangle(const Eigen::Vector3d& orig, const Eigen::Vector3d& dir,
                  const Eigen::Vector3d& v0, const Eigen::Vector3d& v1,
                  const Eigen::Vector3d& v2, double& t, double& u, double& v) {
  const Eigen::Vector3d e1 = v1 - v0;
  const Eigen::Vector3d e2 = v2 - v0;
  const Eigen::Vector3d pvec = dir.cross(e2);
  const double det = e1.dot(pvec);
  if (std::abs(det) < 1e-14) return false;
  const double inv = 1.0 / det;
  const Eigen::Vector3d tvec = orig - v0;
  u = tvec.dot(pvec) * inv;
  if (u < 0.0 || u > 1.0) return false;
  const Eigen::Vector3d qvec = tvec.cross(e1);
  v = dir.dot(qvec) * inv;
  if (v < 0.0 || u + v > 1.0) return false;
  t = e2.dot(qvec) * inv;
  return t > 1e-9;
}

// Nearest hit via 3D-DDA through the triangle grid.
bool trace_ray(const TriangleGrid& grid, const Eigen::Vector3d& orig,
               const Eigen::Vector3d& dir, int& hit_face, double& hit_t,
               double& hit_u, double& hit_v) {
  // Slab test against the grid bounds.
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dir[a]) < 1e-15) {
      if (orig[a] < grid.lo[a] || orig[a] > grid.hi[a]) return false;
      continue;
    }
    double ta = (grid.lo[a] - orig[a]) / dir[a];
    double tb = (grid.hi[a] - orig[a]) / dir[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1) return false;

  const Eigen::Vector3d entry = orig + (t0 + 1e-12) * dir;
  int c[3], step[3];
  double t_max[3], t_delta[3];
  for (int a = 0; a < 3; ++a) {
    c[a] = std::clamp(static_cast<int>((entry[a] - grid.lo[a]) / grid.cell[a]),
                      0, grid.dims[a] - 1);
    if (dir[a] > 1e-15) {
      step[a] = 1;
      t_max[a] = (grid.lo[a] + (c[a] + 1) * grid.cell[a] - orig[a]) / dir[a];
      t_delta[a] = grid.cell[a] / dir[a];
    } else if (dir[a] < -1e-15) {
      step[a] = -1;
      t_max[a] = (grid.lo[a] + c[a] * grid.cell[a] - orig[a]) / dir[a];
      t_delta[a] = -grid.cell[a] / dir[a];
    } else {
      step[a] = 0;
      t_max[a] = std::numeric_limits<double>::infinity();
      t_delta[a] = std::numeric_limits<double>::infinity();
    }
  }

  hit_t = std::numeric_limits<double>::infinity();
  hit_face = -1;
  while (true) {
    for (int fi : grid.at(c[0], c[1], c[2])) {
      const auto& f = grid.mesh->faces[fi];
      double t, u, v;
      if (ray_triangle(orig, dir, grid.mesh->vertices[f[0]],
                       grid.mesh->vertices[f[1]], grid.mesh->vertices[f[2]], t,
                       u, v) &&
          t < hit_t) {
        hit_t = t;
        hit_face = fi;
        hit_u = u;
        hit_v = v;
      }
    }
    const int axis = t_max[0] <= t_max[1]
                         ? (t_max[0] <= t_max[2] ? 0 : 2)
                         : (t_max[1] <= t_max[2] ? 1 : 2);
    if (hit_face >= 0 && hit_t <= t_max[axis]) return true;
    if (t_max[axis] > t1) return hit_face >= 0;
    c[axis] += step[axis];
    if (c[axis] < 0 || c[axis] >= grid.dims[axis]) return hit_face >= 0;
    t_max[axis] += t_delta[axis];
  }
}

}  // namespace

Image render_mesh_rgb(const TriangleMesh& mesh, const CameraPose& pose,
                      int resolution, double fov_deg,
                      const Eigen::Vector3d& background) {
  if (mesh.faces.empty()) throw ConfigError("render_mesh_rgb: empty mesh");
  const TriangleGrid grid(mesh);
  const Intrinsics intr = make_intrinsics(resolution, resolution, fov_deg);
  Image img(resolution, resolution, 3);
  for (int y = 0; y < resolution; ++y) {
    for (int x = 0; x < resolution; ++x) {
      const Ray ray = ray_for_pixel(pose, intr, x, y);
      int face;
      double t, u, v;
      Eigen::Vector3d color = background;
      if (trace_ray(grid, ray.origin, ray.direction, face, t, u, v)) {
        const auto& f = mesh.faces[face];
        if (mesh.has_colors()) {
          color = (1.0 - u - v) * mesh.colors[f[0]] + u * mesh.colors[f[1]] +
                  v * mesh.colors[f[2]];
        } else {
          color = {0.5, 0.5, 0.5};
        }
      }
      for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = color[ch];
    }
  }
  return img;
}

EvalReport evaluate_protocol(const TriangleMesh& gt, const TriangleMesh& pred,
                             const MetricsConfig& cfg, uint64_t seed) {
  cfg.validate();
  EvalReport report;

  const auto gt_pts =
      sample_mesh_points(gt, cfg.chamfer_samples, seed_stream(seed, "eval/sample-gt"));
  const auto pred_pts = sample_mesh_points(
      pred, cfg.chamfer_samples, seed_stream(seed, "eval/sample-pred"));
  report.chamfer = chamfer_distance(pred_pts, gt_pts);
  report.f_score = f_score(pred_pts, gt_pts, cfg.fscore_tau);
  report.volume_iou = volume_iou(pred, gt, cfg.iou_resolution);

  for (double el : cfg.eval_elevations_deg) {
    for (int k = 0; k < cfg.eval_azimuth_count; ++k) {
      const double az = 360.0 * k / cfg.eval_azimuth_count;
      const CameraPose pose = look_at_pose(az, el, cfg.eval_radius);
      const Image img_gt =
          render_mesh_rgb(gt, pose, cfg.eval_resolution, cfg.eval_fov_deg);
      const Image img_pred =
          render_mesh_rgb(pred, pose, cfg.eval_resolution, cfg.eval_fov_deg);
      EvalView view;
      view.elevation_deg = el;
      view.azimuth_deg = az;
      view.psnr = psnr(img_pred, img_gt);
      view.ssim = ssim(img_pred, img_gt);
      report.views.push_back(view);
    }
  }
  for (const auto& v : report.views) {
    report.psnr_mean += v.psnr;
    report.ssim_mean += v.ssim;
  }
  if (!report.views.empty()) {
    report.psnr_mean /= static_cast<double>(report.views.size());
    report.ssim_mean /= static_cast<double>(report.views.size());
  }
  return report;
}

void write_eval_report(const std::string& json_path,
                       const std::string& csv_path, const EvalReport& report) {
  nlohmann::json j;
  j["chamfer"] = report.chamfer;
  j["f_score"] = report.f_score;
  j["volume_iou"] = report.volume_iou;
  j["psnr_mean"] = report.psnr_mean;
  j["ssim_mean"] = report.ssim_mean;
  j["views"] = nlohmann::json::array();
  for (const auto& v : report.views)
    j["views"].push_back({{"elevation_deg", v.elevation_deg},
                          {"azimuth_deg", v.azimuth_deg},
                          {"psnr", v.psnr},
                          {"ssim", v.ssim}});
  std::ofstream out(json_path);
  if (!out) throw IoError("write_eval_report: cannot open " + json_path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write_eval_report: write failed " + json_path);

  std::ofstream csv(csv_path);
  if (!csv) throw IoError("write_eval_report: cannot open " + csv_path);
  csv << "elevation_deg,azimuth_deg,psnr,ssim\n";
  char line[128];
  for (const auto& v : report.views) {
    std::snprintf(line, sizeof line, "%g,%g,%.6f,%.6f\n", v.elevation_deg,
                  v.azimuth_deg, v.psnr, v.ssim);
    csv << line;
  }
  if (!csv) throw IoError("write_eval_report: write failed " + csv_path);
}

}  // namespace cdi3d
