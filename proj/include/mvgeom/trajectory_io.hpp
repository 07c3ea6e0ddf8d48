#pragma once

// TUM-style trajectory text: "timestamp tx ty tz qx qy qz qw" per line,
// '#' comments. Poses are camera-to-world, so the translation is the camera
// center.

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mvgeom/error.hpp"

namespace mvgeom {

struct TimedPose {
  double timestamp = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();

  Eigen::Matrix3d rotation() const { return orientation.toRotationMatrix(); }
};

struct Trajectory {
  std::vector<TimedPose> poses;

  std::size_t size() const { return poses.size(); }
  bool empty() const { return poses.empty(); }
};

/// Quaternions further than this from unit norm are treated as corrupt.
inline constexpr double kQuaternionNormTolerance = 1e-3;

/// Normalizes q. Already-unit quaternions (within 8 ulp) are returned untouched.
inline Eigen::Quaterniond checked_unit_quaternion(const Eigen::Quaterniond& q, const std::string& where) {
  const double n = q.norm();
  if (!(n > 1e-12)) throw Error(ErrorCode::ZeroQuaternion, where);
  if (std::abs(n - 1.0) > kQuaternionNormTolerance)
    throw Error(ErrorCode::NonUnitQuaternion, where + ": norm " + std::to_string(n));
  if (std::abs(n - 1.0) <= 8 * std::numeric_limits<double>::epsilon()) return q;
  return Eigen::Quaterniond(q.coeffs() / n);
}

namespace detail {

inline bool parse_double(std::string_view token, double& out) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
  return ec == std::errc{} && ptr == token.data() + token.size() && std::isfinite(out);
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace detail

/// Parses trajectory text already in memory. `name` labels error messages.
inline Trajectory parse_trajectory_text(std::string_view text, const std::string& name = "<text>") {
  Trajectory traj;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;

    const auto fields = detail::split_ws(line);
    if (fields.empty() || fields.front().front() == '#') continue;
    const std::string where = name + ":" + std::to_string(line_no);
    if (fields.size() != 8)
      throw Error(ErrorCode::MalformedLine, where + ": expected 8 fields, got " + std::to_string(fields.size()));

    double v[8];
    for (int k = 0; k < 8; ++k)
      if (!detail::parse_double(fields[k], v[k]))
        throw Error(ErrorCode::MalformedLine, where + ": non-numeric field '" + std::string(fields[k]) + "'");

    TimedPose pose;
    pose.timestamp = v[0];
    pose.position = Eigen::Vector3d(v[1], v[2], v[3]);
    // Eigen's (w, x, y, z) constructor; file order is x y z w.
    pose.orientation = checked_unit_quaternion(Eigen::Quaterniond(v[7], v[4], v[5], v[6]), where);

    if (!traj.poses.empty() && !(pose.timestamp > traj.poses.back().timestamp))
      throw Error(ErrorCode::NonMonotonicTimestamps, where);
    traj.poses.push_back(pose);
  }
  return traj;
}

inline Trajectory parse_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trajectory_text(buf.str(), path.string());
}

inline std::string format_trajectory(const Trajectory& traj) {
  std::string out = "# timestamp tx ty tz qx qy qz qw\n";
  char line[512];
  for (const auto& p : traj.poses) {
    const auto& q = p.orientation;
    std::snprintf(line, sizeof(line), "%.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", p.timestamp,
                  p.position.x(), p.position.y(), p.position.z(), q.x(), q.y(), q.z(), q.w());
    out += line;
  }
  return out;
}

inline void write_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, path.string());
  out << format_trajectory(traj);
  if (!out) throw Error(ErrorCode::IoFailure, path.string() + ": write failed");
}

}  // namespace mvgeom
