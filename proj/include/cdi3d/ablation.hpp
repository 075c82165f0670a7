// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "cdi3d/camera.hpp"
#include "cdi3d/mesh.hpp"
#include "cdi3d/reconstruct.hpp"
#include "cdi3d/triplane.hpp"

namespace cdi3d {

// One trajectory variant: how many interpolated views per gap and which
// elevation pattern they cycle through.
struct AblationRow {
  std::string label;
  int num_interp = 0;
  std::vector<double> elevation_pattern;
};

// n0..n3 sweep the interpolated-view count at +/-30 elevation; the
// elevation rows hold n=2 and vary the tilt.
std::vector<AblationRow> default_ablation_rows();

struct AblationConfig {
  ReconstructConfig recon;
  TrajectoryConfig trajectory;  // num_interp / pattern overridden per row
  std::vector<AblationRow> rows;  // empty -> default_ablation_rows()
  int image_size = 64;
  int gt_grid = 96;
  int mesh_grid = 48;
  int iou_resolution = 64;
  int chamfer_samples = 20000;
};

struct AblationEntry {
  std::string label;
  std::string shape;
  int view_count = 0;
  double volume_iou = 0.0;
  double chamfer = 0.0;
  bool empty_mesh = false;
  bool diverged = false;
};

struct AblationReport {
  std::vector<AblationEntry> entries;
};

// Renders ground truth along each row's trajectory, reconstructs, extracts a
// mesh and scores it against the analytic shape.
AblationReport run_ablation(const std::vector<ShapeKind>& shapes,
                            const AblationConfig& cfg, uint64_t seed);

std::string shape_name(ShapeKind kind);
std::string format_ablation_table(const AblationReport& report);
void write_ablation_report(const std::string& json_path,
                           const std::string& txt_path,
                           const AblationReport& report);

// Shared helpers for the single-scene pipeline.
SupervisionSet render_supervision(const AnalyticShape& shape,
                                  const std::vector<CameraPose>& poses,
                                  const RenderConfig& rc);
TriangleMesh extract_shape_mesh(const AnalyticShape& shape, int grid);
TriangleMesh extract_field_mesh(const FieldParams& fp, int grid,
                                double iso_fraction = 0.5);

}  // namespace cdi3d
