#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace mvgeom {

/// Squared Euclidean distance. Shared by the tree and the brute-force scan so
/// both evaluate the identical expression.
inline double squared_distance(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

/// Static balanced 3-d tree for exact nearest-neighbor distance queries.
/// Splits at the median along the widest bounding-box axis.
class KdTree {
 public:
  explicit KdTree(std::span<const Eigen::Vector3d> points, std::uint32_t leaf_size = 12)
      : points_(points.begin(), points.end()), leaf_size_(std::max<std::uint32_t>(1, leaf_size)) {
    if (!points_.empty()) {
      nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
      build(0, static_cast<std::uint32_t>(points_.size()));
    }
  }

  std::size_t size() const { return points_.size(); }

  /// Squared distance from q to its nearest stored point (+inf when empty).
  double nearest_squared(const Eigen::Vector3d& q) const {
    double best = std::numeric_limits<double>::infinity();
    if (!nodes_.empty()) search(0, q, best);
    return best;
  }

 private:
  struct Node {
    std::uint32_t begin, end;
    std::uint32_t left, right;  // child indices, unused for leaves
    double split;
    std::int32_t axis;  // -1 for leaves
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end) {
    const auto index = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({begin, end, 0, 0, 0.0, -1});
    if (end - begin <= leaf_size_) return index;

    Eigen::Vector3d lo = points_[begin], hi = points_[begin];
    for (std::uint32_t i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(points_[i]);
      hi = hi.cwiseMax(points_[i]);
    }
    int axis;
    (hi - lo).maxCoeff(&axis);
    if (!(hi[axis] > lo[axis])) return index;  // all points identical

    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(points_.begin() + begin, points_.begin() + mid, points_.begin() + end,
                     [axis](const Eigen::Vector3d& a, const Eigen::Vector3d& b) { return a[axis] < b[axis]; });
    const double split = points_[mid][axis];

    const std::uint32_t left = build(begin, mid);
    const std::uint32_t right = build(mid, end);
    nodes_[index] = {begin, end, left, right, split, axis};
    return index;
  }

  void search(std::uint32_t index, const Eigen::Vector3d& q, double& best) const {
    const Node& node = nodes_[index];
    if (node.axis < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) best = std::min(best, squared_distance(q, points_[i]));
      return;
    }
    // Left holds coordinates <= split, right holds >= split along the axis.
    const double diff = q[node.axis] - node.split;
    const std::uint32_t near = diff < 0.0 ? node.left : node.right;
    const std::uint32_t far = diff < 0.0 ? node.right : node.left;
    search(near, q, best);
    if (diff * diff < best) search(far, q, best);
  }

  std::vector<Eigen::Vector3d> points_;
  std::vector<Node> nodes_;
  std::uint32_t leaf_size_;
};

}  // namespace mvgeom
