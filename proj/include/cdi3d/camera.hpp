// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

namespace cdi3d {

// Which role a view plays in the pipeline. Interpolated views are generated
// once per gap and shared between the two adjacent mains; the canonical tag
// emitted by tilt_trajectory() is InterpRight(i, slot), i.e. "slot-th view to
// the right of main i". slot is 1-based, matching the interpolation index.
struct ViewRole {
  enum class Kind { Main, InterpLeft, InterpRight };
  Kind kind = Kind::Main;
  int main_index = 0;
  int slot = 0;  // 0 for Main, else in [1, num_interp]

  static ViewRole main(int index) { return {Kind::Main, index, 0}; }
  static ViewRole interp_left(int main_index, int slot) {
    return {Kind::InterpLeft, main_index, slot};
  }
  static ViewRole interp_right(int main_index, int slot) {
    return {Kind::InterpRight, main_index, slot};
  }

  bool is_main() const { return kind == Kind::Main; }
  std::string str() const;               // "main:0" | "left:1:2" | "right:0:1"
  static ViewRole parse(const std::string& s);
  bool operator==(const ViewRole&) const = default;
};

// World-to-camera rigid transform plus the spherical parameters it was built
// from. Conventions: world up is +Z, azimuth 0 places the camera on +X, and
// the optical axis passes through the world origin (look-at construction).
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // world -> camera
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
  double radius = 0.0;

  Eigen::Vector3d center() const { return -rotation.transpose() * translation; }
};

struct TrajectoryConfig {
  int num_main_views = 4;   // N
  int num_interp = 2;       // n per gap
  double radius = 2.0;
  // elevation offsets in degrees, applied cyclically over the interpolated
  // views in azimuth order
  std::vector<double> interp_elevation_pattern = {30.0, -30.0};

  void validate() const;  // throws ConfigError
};

CameraPose look_at_pose(double azimuth_deg, double elevation_deg, double radius);

std::vector<std::pair<ViewRole, CameraPose>> main_view_poses(
    const TrajectoryConfig& config);

// N main poses plus N*num_interp interpolated poses, sorted by azimuth with
// mains first at equal azimuth. Interpolated azimuths evenly subdivide each
// gap; their elevations follow interp_elevation_pattern cyclically.
std::vector<std::pair<ViewRole, CameraPose>> tilt_trajectory(
    const TrajectoryConfig& config);

struct RelativePose {
  double d_azimuth_deg = 0.0;  // wrapped to (-180, 180]
  double d_elevation_deg = 0.0;
  double d_radius = 0.0;
};

RelativePose relative_pose(const CameraPose& cond, const CameraPose& target);

// JSON pose files:
// [{"role": "...", "azimuth_deg": ..., "elevation_deg": ..., "radius": ...,
//   "R": [9 numbers row-major], "T": [3 numbers]}, ...]
void write_pose_file(const std::string& path,
                     const std::vector<std::pair<ViewRole, CameraPose>>& poses);
std::vector<std::pair<ViewRole, CameraPose>> read_pose_file(
    const std::string& path);

}  // namespace cdi3d
