// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "cdi3d/renderer.hpp"

namespace cdi3d {

struct TriangleMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Eigen::Vector3d> colors;  // per-vertex, empty if uncolored
  std::vector<std::array<int, 3>> faces;

  bool has_colors() const { return colors.size() == vertices.size(); }
};

// Scalar field sampled on resolution^3 nodes over [lo, hi]^3;
// node (ix, iy, iz) is stored at (iz * R + iy) * R + ix.
struct DensityGrid {
  int resolution = 0;
  double lo = -1.0, hi = 1.0;
  std::vector<double> values;

  int node_index(int ix, int iy, int iz) const {
    return (iz * resolution + iy) * resolution + ix;
  }
  double value(int ix, int iy, int iz) const {
    return values[node_index(ix, iy, iz)];
  }
  double spacing() const { return (hi - lo) / (resolution - 1); }
  Eigen::Vector3d position(int ix, int iy, int iz) const {
    const double s = spacing();
    return {lo + ix * s, lo + iy * s, lo + iz * s};
  }
  double max_value() const;
};

DensityGrid sample_density_grid(const FieldFn& field, int resolution,
                                double lo = -1.0, double hi = 1.0);

// Classic 256-case marching cubes. Vertices on shared cell edges are emitted
// once (edge-keyed), so the surface is watertight by construction; faces that
// collapse onto fewer than three distinct vertices are dropped. Triangles
// wind counterclockwise seen from outside (higher density = inside).
TriangleMesh marching_cubes(const DensityGrid& grid, double iso);

void colorize_mesh(TriangleMesh& mesh, const FieldFn& field);

// Wavefront OBJ with per-vertex colors as "v x y z r g b".
void save_obj(const std::string& path, const TriangleMesh& mesh);
TriangleMesh load_obj(const std::string& path);

// binary_little_endian PLY (float32 positions, uchar colors).
void save_ply(const std::string& path, const TriangleMesh& mesh);

// Merge vertices closer than tol (coordinate quantization); remaps faces and
// drops the ones that collapse.
TriangleMesh weld_vertices(const TriangleMesh& mesh, double tol);

double mesh_surface_area(const TriangleMesh& mesh);
// Divergence-theorem volume; positive when faces wind outward.
double mesh_signed_volume(const TriangleMesh& mesh);
void mesh_bounds(const TriangleMesh& mesh, Eigen::Vector3d& lo,
                 Eigen::Vector3d& hi);

}  // namespace cdi3d
