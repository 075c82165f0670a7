// SPDX-License-Identifier: Apache-2.0
#include "cdi3d/camera.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cdi3d/errors.hpp"

namespace cdi3d {

using nlohmann::json;

namespace {

constexpr double kDegToRad = M_PI / 180.0;

double wrap_360(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w < 0) w += 360.0;
  return w;
}

}  // namespace

std::string ViewRole::str() const {
  switch (kind) {
    case Kind::Main:
      return "main:" + std::to_string(main_index);
    case Kind::InterpLeft:
      return "left:" + std::to_string(main_index) + ":" + std::to_string(slot);
    case Kind::InterpRight:
      return "right:" + std::to_string(main_index) + ":" + std::to_string(slot);
  }
  return {};
}

ViewRole ViewRole::parse(const std::string& s) {
  const auto p1 = s.find(':');
  if (p1 == std::string::npos) throw ConfigError("bad view role: " + s);
  const std::string tag = s.substr(0, p1);
  const std::string rest = s.substr(p1 + 1);
  if (tag == "main") return ViewRole::main(std::stoi(rest));
  const auto p2 = rest.find(':');
  if (p2 == std::string::npos) throw ConfigError("bad view role: " + s);
  const int main_index = std::stoi(rest.substr(0, p2));
  const int slot = std::stoi(rest.substr(p2 + 1));
  if (tag == "left") return ViewRole::interp_left(main_index, slot);
  if (tag == "right") return ViewRole::interp_right(main_index, slot);
  throw ConfigError("bad view role: " + s);
}

void TrajectoryConfig::validate() const {
  if (num_main_views < 2) throw ConfigError("num_main_views must be >= 2");
  if (num_interp < 0) throw ConfigError("num_interp must be >= 0");
  if (radius <= 0) throw ConfigError("radius must be > 0");
  if (num_interp > 0 && interp_elevation_pattern.empty())
    throw ConfigError("interp_elevation_pattern must be non-empty when num_interp > 0");
  for (double e : interp_elevation_pattern)
    if (!(e > -90.0 && e < 90.0))
      throw ConfigError("elevation pattern entries must lie in (-90, 90)");
}

CameraPose look_at_pose(double azimuth_deg, double elevation_deg, double radius) {
  if (!(radius > 0)) throw ConfigError("look_at_pose: radius must be > 0");
  if (!(elevation_deg > -90.0 && elevation_deg < 90.0))
    throw ConfigError("look_at_pose: elevation must lie in (-90, 90); the up vector degenerates at the poles");

  const double az = azimuth_deg * kDegToRad;
  const double el = elevation_deg * kDegToRad;
  const Eigen::Vector3d center(radius * std::cos(el) * std::cos(az),
                               radius * std::cos(el) * std::sin(az),
                               radius * std::sin(el));

  const Eigen::Vector3d up(0.0, 0.0, 1.0);
  const Eigen::Vector3d forward = (-center).normalized();  // toward origin
  const Eigen::Vector3d right = forward.cross(up).normalized();
  const Eigen::Vector3d down = forward.cross(right);  // camera +y (image down)

  CameraPose pose;
  pose.rotation.row(0) = right;
  pose.rotation.row(1) = down;
  pose.rotation.row(2) = forward;
  pose.translation = -pose.rotation * center;
  pose.azimuth_deg = azimuth_deg;
  pose.elevation_deg = elevation_deg;
  pose.radius = radius;
  return pose;
}

std::vector<std::pair<ViewRole, CameraPose>> main_view_poses(
    const TrajectoryConfig& config) {
  config.validate();
  std::vector<std::pair<ViewRole, CameraPose>> out;
  out.reserve(config.num_main_views);
  const double step = 360.0 / config.num_main_views;
  for (int i = 0; i < config.num_main_views; ++i)
    out.emplace_back(ViewRole::main(i), look_at_pose(i * step, 0.0, config.radius));
  return out;
}

std::vector<std::pair<ViewRole, CameraPose>> tilt_trajectory(
    const TrajectoryConfig& config) {
  config.validate();
  auto out = main_view_poses(config);

  if (config.num_interp > 0) {
    const double gap = 360.0 / config.num_main_views;
    // Interpolated views in azimuth order; the elevation pattern cycles over
    // this order.
    int interp_counter = 0;
    std::vector<std::pair<ViewRole, CameraPose>> interp;
    interp.reserve(static_cast<size_t>(config.num_main_views) * config.num_interp);
    for (int g = 0; g < config.num_main_views; ++g) {
      for (int s = 1; s <= config.num_interp; ++s) {
        const double az = g * gap + gap * s / (config.num_interp + 1);
        const double elev = config.interp_elevation_pattern
            [interp_counter % config.interp_elevation_pattern.size()];
        interp.emplace_back(ViewRole::interp_right(g, s),
                            look_at_pose(az, elev, config.radius));
        ++interp_counter;
      }
    }
    out.insert(out.end(), interp.begin(), interp.end());
  }

  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    const double aza = wrap_360(a.second.azimuth_deg);
    const double azb = wrap_360(b.second.azimuth_deg);
    if (aza != azb) return aza < azb;
    return a.first.is_main() && !b.first.is_main();
  });
  return out;
}

RelativePose relative_pose(const CameraPose& cond, const CameraPose& target) {
  RelativePose rel;
  double d = std::fmod(target.azimuth_deg - cond.azimuth_deg, 360.0);
  if (d <= -180.0) d += 360.0;
  if (d > 180.0) d -= 360.0;
  rel.d_azimuth_deg = d;
  rel.d_elevation_deg = target.elevation_deg - cond.elevation_deg;
  rel.d_radius = target.radius - cond.radius;
  return rel;
}

void write_pose_file(const std::string& path,
                     const std::vector<std::pair<ViewRole, CameraPose>>& poses) {
  json arr = json::array();
  for (const auto& [role, pose] : poses) {
    json j;
    j["role"] = role.str();
    j["azimuth_deg"] = pose.azimuth_deg;
    j["elevation_deg"] = pose.elevation_deg;
    j["radius"] = pose.radius;
    json R = json::array();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) R.push_back(pose.rotation(r, c));
    j["R"] = std::move(R);
    j["T"] = {pose.translation.x(), pose.translation.y(), pose.translation.z()};
    arr.push_back(std::move(j));
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);
  out << arr.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

std::vector<std::pair<ViewRole, CameraPose>> read_pose_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for read: " + path);
  json arr;
  try {
    in >> arr;
  } catch (const json::exception& e) {
    throw IoError("bad pose file " + path + ": " + e.what());
  }
  if (!arr.is_array()) throw IoError("pose file must hold a JSON array: " + path);
  std::vector<std::pair<ViewRole, CameraPose>> out;
  out.reserve(arr.size());
  for (const auto& j : arr) {
    CameraPose pose;
    pose.azimuth_deg = j.at("azimuth_deg").get<double>();
    pose.elevation_deg = j.at("elevation_deg").get<double>();
    pose.radius = j.at("radius").get<double>();
    const auto& R = j.at("R");
    const auto& T = j.at("T");
    if (R.size() != 9 || T.size() != 3)
      throw IoError("pose entry has malformed R/T in " + path);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) pose.rotation(r, c) = R[3 * r + c].get<double>();
    for (int i = 0; i < 3; ++i) pose.translation(i) = T[i].get<double>();
    out.emplace_back(ViewRole::parse(j.at("role").get<std::string>()), pose);
  }
  return out;
}

}  // namespace cdi3d
