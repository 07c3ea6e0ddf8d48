#pragma once

// Disparity back-projection, similarity application and symmetric Chamfer
// distance between world-space point clouds.

#include <Eigen/Core>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvgeom/error.hpp"
#include "mvgeom/kdtree.hpp"
#include "mvgeom/npy.hpp"
#include "mvgeom/parallel.hpp"
#include "mvgeom/trajectory.hpp"
#include "mvgeom/trajectory_io.hpp"

namespace mvgeom {

/// Pinhole intrinsics in pixels.
struct Intrinsics {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;

  Intrinsics() = default;
  Intrinsics(double fx_, double fy_, double cx_, double cy_) : fx(fx_), fy(fy_), cx(cx_), cy(cy_) {
    if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorCode::InvalidArgument, "focal lengths must be positive");
  }

  bool operator==(const Intrinsics&) const = default;
};

/// fx = fy = 0.7 W, principal point at the image center.
inline Intrinsics intrinsics_from_rule(std::size_t width, std::size_t height) {
  if (width == 0 || height == 0) throw Error(ErrorCode::ZeroDimension, "image dimensions must be positive");
  const double w = static_cast<double>(width);
  const double h = static_cast<double>(height);
  return {0.7 * w, 0.7 * w, w / 2.0, h / 2.0};
}

/// Inverse depth per pixel, row-major.
struct DisparityMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  DisparityMap() = default;
  DisparityMap(std::size_t h, std::size_t w, std::vector<double> v) : height(h), width(w), values(std::move(v)) {
    if (values.size() != h * w) throw Error(ErrorCode::ShapeMismatch, "disparity size does not match H x W");
    for (double d : values) {
      if (!std::isfinite(d)) throw Error(ErrorCode::NonFiniteInput, "non-finite disparity");
      if (d < 0.0) throw Error(ErrorCode::InvalidArgument, "negative disparity");
    }
  }

  static DisparityMap from_array(const ArrayFile& a) {
    if (a.shape.size() != 2) throw Error(ErrorCode::ShapeMismatch, "disparity must be a 2-D array");
    return DisparityMap(a.shape[0], a.shape[1], a.to_f64());
  }

  double at(std::size_t v, std::size_t u) const { return values[v * width + u]; }
};

struct PointCloud {
  std::vector<Eigen::Vector3d> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

inline constexpr double kDefaultMinDisparity = 1e-4;
inline constexpr std::size_t kDefaultStride = 4;

/// Camera-frame point for pixel (u, v) at depth z.
inline Eigen::Vector3d unproject(double u, double v, double z, const Intrinsics& k) {
  return {(u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z};
}

/// Pixel coordinates of a world point seen from a camera-to-world pose.
inline Eigen::Vector2d project(const Eigen::Vector3d& world, const Mat3& r, const Vec3& c, const Intrinsics& k) {
  const Eigen::Vector3d cam = r.transpose() * (world - c);
  return {k.fx * cam.x() / cam.z() + k.cx, k.fy * cam.y() / cam.z() + k.cy};
}

/// Back-projects pixels on the stride grid whose disparity is at least
/// min_disp. Depth is 1 / disparity; the pose maps camera to world.
inline PointCloud backproject(const DisparityMap& d, const Intrinsics& k, const Mat3& r, const Vec3& c,
                              std::size_t stride = kDefaultStride, double min_disp = kDefaultMinDisparity) {
  if (stride == 0) throw Error(ErrorCode::InvalidArgument, "stride must be positive");
  if (!(min_disp > 0.0)) throw Error(ErrorCode::InvalidArgument, "min_disp must be positive");

  PointCloud out;
  for (std::size_t v = 0; v < d.height; v += stride) {
    for (std::size_t u = 0; u < d.width; u += stride) {
      const double disp = d.at(v, u);
      if (!(disp >= min_disp)) continue;
      const Eigen::Vector3d cam = unproject(static_cast<double>(u), static_cast<double>(v), 1.0 / disp, k);
      out.points.push_back(r * cam + c);
    }
  }
  if (out.empty()) throw Error(ErrorCode::EmptyCloud, "no pixel passed the disparity filter");
  return out;
}

inline PointCloud backproject(const DisparityMap& d, const Intrinsics& k, const TimedPose& pose,
                              std::size_t stride = kDefaultStride, double min_disp = kDefaultMinDisparity) {
  return backproject(d, k, pose.rotation(), pose.position, stride, min_disp);
}

/// q -> s R q + t for every point.
inline PointCloud apply_similarity(const PointCloud& cloud, const SimilarityTransform& xf) {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const auto& q : cloud.points) out.points.push_back(xf.apply(q));
  return out;
}

struct ChamferOptions {
  unsigned threads = 1;
  std::size_t chunk = 4096;
};

/// Mean Euclidean distance from each point of `from` to its nearest neighbor
/// in `tree`. Per-chunk sums are reduced in chunk order.
inline double mean_nearest_distance(std::span<const Eigen::Vector3d> from, const KdTree& tree,
                                    const ChamferOptions& opts = {}) {
  const double sum =
      parallel_sum(from.size(), opts.threads, [&](std::size_t i) { return std::sqrt(tree.nearest_squared(from[i])); },
                   opts.chunk);
  return sum / static_cast<double>(from.size());
}

/// Symmetric Chamfer distance with exact k-d tree nearest neighbors and
/// non-squared Euclidean distances.
inline double chamfer(const PointCloud& p, const PointCloud& q, const ChamferOptions& opts = {}) {
  if (p.empty() || q.empty()) throw Error(ErrorCode::EmptyCloud, "chamfer needs two non-empty clouds");
  const KdTree tree_q(q.points);
  const double pq = mean_nearest_distance(p.points, tree_q, opts);
  const KdTree tree_p(p.points);
  const double qp = mean_nearest_distance(q.points, tree_p, opts);
  return pq + qp;
}

/// Exhaustive O(|P||Q|) Chamfer distance, same summation order as chamfer().
inline double chamfer_bruteforce(const PointCloud& p, const PointCloud& q, std::size_t chunk = 4096) {
  if (p.empty() || q.empty()) throw Error(ErrorCode::EmptyCloud, "chamfer needs two non-empty clouds");
  auto directed = [chunk](const std::vector<Eigen::Vector3d>& from, const std::vector<Eigen::Vector3d>& to) {
    const double sum = parallel_sum(
        from.size(), 1,
        [&](std::size_t i) {
          double best = std::numeric_limits<double>::infinity();
          for (const auto& t : to) best = std::min(best, squared_distance(from[i], t));
          return std::sqrt(best);
        },
        chunk);
    return sum / static_cast<double>(from.size());
  };
  return directed(p.points, q.points) + directed(q.points, p.points);
}

}  // namespace mvgeom
