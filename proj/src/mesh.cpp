// SPDX-License-Identifier: Apache-2.0
#include "cdi3d/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "cdi3d/errors.hpp"
#include "cdi3d/log.hpp"

namespace cdi3d {

namespace {
#include "mc_tables.inc"

// Bourke cube corner offsets (x, y, z).
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdgeEnds[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0},
                                  {4, 5}, {5, 6}, {6, 7}, {7, 4},
                                  {0, 4}, {1, 5}, {2, 6}, {3, 7}};
}  // namespace

double DensityGrid::max_value() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, v);
  return m;
}

DensityGrid sample_density_grid(const FieldFn& field, int resolution, double lo,
                                double hi) {
  if (resolution < 2 || !(hi > lo))
    throw ConfigError("sample_density_grid: bad grid spec");
  DensityGrid g;
  g.resolution = resolution;
  g.lo = lo;
  g.hi = hi;
  g.values.resize(static_cast<size_t>(resolution) * resolution * resolution);
  const double s = g.spacing();
  size_t i = 0;
  for (int iz = 0; iz < resolution; ++iz)
    for (int iy = 0; iy < resolution; ++iy)
      for (int ix = 0; ix < resolution; ++ix)
        g.values[i++] =
            field({lo + ix * s, lo + iy * s, lo + iz * s}).density;
  return g;
}

TriangleMesh marching_cubes(const DensityGrid& grid, double iso) {
  const int res = grid.resolution;
  TriangleMesh mesh;
  // Key: packed (smaller node index, larger node index) of the grid edge.
  std::unordered_map<uint64_t, int> edge_vertex;

  auto vertex_on_edge = [&](int ax, int ay, int az, int bx, int by, int bz) {
    const uint64_t na = grid.node_index(ax, ay, az);
    const uint64_t nb = grid.node_index(bx, by, bz);
    const uint64_t key =
        (std::min(na, nb) << 32) | std::max(na, nb);
    auto it = edge_vertex.find(key);
    if (it != edge_vertex.end()) return it->second;

    const double va = grid.value(ax, ay, az);
    const double vb = grid.value(bx, by, bz);
    double t = 0.5;
    if (std::abs(vb - va) > 1e-300) t = (iso - va) / (vb - va);
    t = std::clamp(t, 0.0, 1.0);
    const Eigen::Vector3d pa = grid.position(ax, ay, az);
    const Eigen::Vector3d pb = grid.position(bx, by, bz);
    const int id = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(pa + t * (pb - pa));
    edge_vertex.emplace(key, id);
    return id;
  };

  for (int iz = 0; iz + 1 < res; ++iz) {
    for (int iy = 0; iy + 1 < res; ++iy) {
      for (int ix = 0; ix + 1 < res; ++ix) {
        int cube = 0;
        double val[8];
        for (int c = 0; c < 8; ++c) {
          val[c] = grid.value(ix + kCorner[c][0], iy + kCorner[c][1],
                              iz + kCorner[c][2]);
          if (val[c] > iso) cube |= 1 << c;
        }
        if (kEdgeTable[cube] == 0) continue;

        int edge_vid[12];
        for (int e = 0; e < 12; ++e) {
          if (!(kEdgeTable[cube] & (1 << e))) continue;
          const int* ca = kCorner[kEdgeEnds[e][0]];
          const int* cb = kCorner[kEdgeEnds[e][1]];
          edge_vid[e] = vertex_on_edge(ix + ca[0], iy + ca[1], iz + ca[2],
                                       ix + cb[0], iy + cb[1], iz + cb[2]);
        }
        for (int t = 0; kTriTable[cube][t] != -1; t += 3) {
          // reversed order: the tables assume bits mark the low side of iso,
          // our cube index marks the high side, so raw winding points inward
          std::array<int, 3> f = {edge_vid[kTriTable[cube][t]],
                                  edge_vid[kTriTable[cube][t + 2]],
                                  edge_vid[kTriTable[cube][t + 1]]};
          if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) continue;
          mesh.faces.push_back(f);
        }
      }
    }
  }
  if (mesh.faces.empty())
    log_info("marching_cubes: no surface crossed iso=" + std::to_string(iso));
  return mesh;
}

void colorize_mesh(TriangleMesh& mesh, const FieldFn& field) {
  mesh.colors.resize(mesh.vertices.size());
  for (size_t i = 0; i < mesh.vertices.size(); ++i)
    mesh.colors[i] = field(mesh.vertices[i]).rgb;
}

void save_obj(const std::string& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw IoError("save_obj: cannot open " + path);
  char line[256];
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    if (mesh.has_colors()) {
      const auto& c = mesh.colors[i];
      std::snprintf(line, sizeof line, "v %.17g %.17g %.17g %.17g %.17g %.17g\n",
                    v.x(), v.y(), v.z(), c.x(), c.y(), c.z());
    } else {
      std::snprintf(line, sizeof line, "v %.17g %.17g %.17g\n", v.x(), v.y(),
                    v.z());
    }
    out << line;
  }
  for (const auto& f : mesh.faces)
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw IoError("save_obj: write failed for " + path);
}

TriangleMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_obj: cannot open " + path);
  TriangleMesh mesh;
  bool any_color = false;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      double x, y, z;
      ss >> x >> y >> z;
      if (!ss) throw IoError("load_obj: malformed vertex in " + path);
      mesh.vertices.push_back({x, y, z});
      double r, g, b;
      if (ss >> r >> g >> b) {
        any_color = true;
        mesh.colors.push_back({r, g, b});
      } else {
        mesh.colors.push_back({0.5, 0.5, 0.5});
      }
    } else if (tag == "f") {
      std::array<int, 3> f;
      for (int i = 0; i < 3; ++i) {
        std::string tok;
        ss >> tok;
        if (tok.empty()) throw IoError("load_obj: malformed face in " + path);
        f[i] = std::stoi(tok.substr(0, tok.find('/'))) - 1;
      }
      mesh.faces.push_back(f);
    }
  }
  if (!any_color) mesh.colors.clear();
  return mesh;
}

void save_ply(const std::string& path, const TriangleMesh& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_ply: cannot open " + path);
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "element face " << mesh.faces.size() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    float xyz[3] = {static_cast<float>(mesh.vertices[i].x()),
                    static_cast<float>(mesh.vertices[i].y()),
                    static_cast<float>(mesh.vertices[i].z())};
    out.write(reinterpret_cast<const char*>(xyz), sizeof xyz);
    Eigen::Vector3d c =
        mesh.has_colors() ? mesh.colors[i] : Eigen::Vector3d(0.5, 0.5, 0.5);
    unsigned char rgb[3];
    for (int k = 0; k < 3; ++k)
      rgb[k] = static_cast<unsigned char>(
          std::lround(std::clamp(c[k], 0.0, 1.0) * 255.0));
    out.write(reinterpret_cast<const char*>(rgb), sizeof rgb);
  }
  for (const auto& f : mesh.faces) {
    const unsigned char n = 3;
    out.write(reinterpret_cast<const char*>(&n), 1);
    int32_t idx[3] = {f[0], f[1], f[2]};
    out.write(reinterpret_cast<const char*>(idx), sizeof idx);
  }
  if (!out) throw IoError("save_ply: write failed for " + path);
}

TriangleMesh weld_vertices(const TriangleMesh& mesh, double tol) {
  if (tol <= 0.0) throw ConfigError("weld_vertices: tol must be positive");
  std::map<std::array<int64_t, 3>, int> cell_to_id;
  std::vector<int> remap(mesh.vertices.size());
  TriangleMesh out;
  auto quant = [tol](double v) {
    return static_cast<int64_t>(std::floor(v / tol + 0.5));
  };
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    const std::array<int64_t, 3> key = {quant(v.x()), quant(v.y()),
                                        quant(v.z())};
    auto [it, inserted] = cell_to_id.emplace(key, static_cast<int>(out.vertices.size()));
    if (inserted) {
      out.vertices.push_back(v);
      if (mesh.has_colors()) out.colors.push_back(mesh.colors[i]);
    }
    remap[i] = it->second;
  }
  for (const auto& f : mesh.faces) {
    std::array<int, 3> g = {remap[f[0]], remap[f[1]], remap[f[2]]};
    if (g[0] == g[1] || g[1] == g[2] || g[0] == g[2]) continue;
    out.faces.push_back(g);
  }
  return out;
}

double mesh_surface_area(const TriangleMesh& mesh) {
  double area = 0.0;
  for (const auto& f : mesh.faces) {
    const Eigen::Vector3d e1 = mesh.vertices[f[1]] - mesh.vertices[f[0]];
    const Eigen::Vector3d e2 = mesh.vertices[f[2]] - mesh.vertices[f[0]];
    area += 0.5 * e1.cross(e2).norm();
  }
  return area;
}

double mesh_signed_volume(const TriangleMesh& mesh) {
  double vol = 0.0;
  for (const auto& f : mesh.faces)
    vol += mesh.vertices[f[0]].dot(
               mesh.vertices[f[1]].cross(mesh.vertices[f[2]])) /
           6.0;
  return vol;
}

void mesh_bounds(const TriangleMesh& mesh, Eigen::Vector3d& lo,
                 Eigen::Vector3d& hi) {
  if (mesh.vertices.empty()) throw ConfigError("mesh_bounds: empty mesh");
  lo = hi = mesh.vertices.front();
  for (const auto& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
}

}  // namespace cdi3d
