#pragma once

// Similarity alignment of two camera trajectories and the ATE / RTE
// statistics computed after alignment.

#include <Eigen/Core>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "mvgeom/error.hpp"
#include "mvgeom/trajectory_io.hpp"

namespace mvgeom {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// x -> s * R * x + t, s > 0 and R in SO(3).
struct SimilarityTransform {
  double s = 1.0;
  Mat3 r = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return s * (r * x) + t; }

  SimilarityTransform inverse() const {
    SimilarityTransform inv;
    inv.s = 1.0 / s;
    inv.r = r.transpose();
    inv.t = -(inv.s * (inv.r * t));
    return inv;
  }
};

inline constexpr double kDefaultMaxDt = 0.02;
inline constexpr std::size_t kMinPairs = 3;

/// Time-associated pose pairs from a reference run and an estimated run.
struct PairedRuns {
  std::vector<Vec3> ref_centers;
  std::vector<Vec3> est_centers;
  std::vector<Mat3> ref_rotations;
  std::vector<Mat3> est_rotations;
  /// Reference timestamps of the surviving pairs.
  std::vector<double> frame_ids;

  std::size_t size() const { return ref_centers.size(); }
};

/// Greedy nearest-timestamp association: candidate pairs within max_dt are
/// taken in order of increasing |dt|, each pose used at most once. The result
/// is ordered by reference timestamp.
inline PairedRuns associate(const Trajectory& a, const Trajectory& b, double max_dt = kDefaultMaxDt) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::TooFewPairs, "cannot associate an empty trajectory");

  std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
  std::size_t lo = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ta = a.poses[i].timestamp;
    while (lo < b.size() && b.poses[lo].timestamp < ta - max_dt) ++lo;
    for (std::size_t j = lo; j < b.size() && b.poses[j].timestamp <= ta + max_dt; ++j)
      candidates.emplace_back(std::abs(b.poses[j].timestamp - ta), i, j);
  }
  std::sort(candidates.begin(), candidates.end());

  std::vector<char> used_a(a.size(), 0), used_b(b.size(), 0);
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  for (const auto& [dt, i, j] : candidates) {
    if (dt > max_dt || used_a[i] || used_b[j]) continue;
    used_a[i] = used_b[j] = 1;
    matches.emplace_back(i, j);
  }
  if (matches.size() < kMinPairs)
    throw Error(ErrorCode::TooFewPairs, std::to_string(matches.size()) + " pairs within max_dt, need 3");
  std::sort(matches.begin(), matches.end());

  PairedRuns runs;
  for (const auto& [i, j] : matches) {
    runs.ref_centers.push_back(a.poses[i].position);
    runs.est_centers.push_back(b.poses[j].position);
    runs.ref_rotations.push_back(a.poses[i].rotation());
    runs.est_rotations.push_back(b.poses[j].rotation());
    runs.frame_ids.push_back(a.poses[i].timestamp);
  }
  return runs;
}

/// Closed-form least-squares similarity mapping est_centers onto ref_centers
/// (Umeyama). Minimizes sum_i || ref_i - (s R est_i + t) ||^2 over s > 0 and
/// R in SO(3); a reflection in the optimal orthogonal factor is replaced by the
/// best proper rotation.
inline SimilarityTransform umeyama(std::span<const Vec3> ref_centers, std::span<const Vec3> est_centers) {
  const std::size_t n = ref_centers.size();
  if (est_centers.size() != n) throw Error(ErrorCode::LengthMismatch, "umeyama on unequal point counts");
  if (n < kMinPairs) throw Error(ErrorCode::TooFewPairs, "umeyama needs at least 3 points");

  const double inv_n = 1.0 / static_cast<double>(n);
  Vec3 mu_ref = Vec3::Zero(), mu_est = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mu_ref += ref_centers[i];
    mu_est += est_centers[i];
  }
  mu_ref *= inv_n;
  mu_est *= inv_n;

  Mat3 cov = Mat3::Zero();  // (1/N) sum (est - mu_est)(ref - mu_ref)^T
  double var_est = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 de = est_centers[i] - mu_est;
    cov += de * (ref_centers[i] - mu_ref).transpose();
    var_est += de.squaredNorm();
  }
  cov *= inv_n;
  var_est *= inv_n;
  if (!std::isfinite(var_est) || !cov.allFinite())
    throw Error(ErrorCode::NonFiniteInput, "non-finite trajectory centers");
  if (var_est < 1e-12) throw Error(ErrorCode::DegenerateGeometry, "estimated centers are (nearly) coincident");

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sigma = svd.singularValues();
  if (sigma(1) <= 1e-12 * std::max(1.0, sigma(0)))
    throw Error(ErrorCode::DegenerateGeometry, "cross-covariance rank < 2, rotation is not unique");

  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Vec3 d(1.0, 1.0, (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0);

  SimilarityTransform xf;
  xf.r = v * d.asDiagonal() * u.transpose();
  xf.s = sigma.dot(d) / var_est;
  xf.t = mu_ref - xf.s * (xf.r * mu_est);
  return xf;
}

inline SimilarityTransform umeyama(const PairedRuns& runs) { return umeyama(runs.ref_centers, runs.est_centers); }

/// Per-frame residual lengths || ref_i - (s R est_i + t) ||.
inline std::vector<double> ate_residuals(std::span<const Vec3> ref_centers, std::span<const Vec3> est_centers,
                                         const SimilarityTransform& xf) {
  if (ref_centers.size() != est_centers.size())
    throw Error(ErrorCode::LengthMismatch, "ATE on unequal point counts");
  std::vector<double> out(ref_centers.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (ref_centers[i] - xf.apply(est_centers[i])).norm();
  return out;
}

inline double ate_rmse(std::span<const Vec3> ref_centers, std::span<const Vec3> est_centers,
                       const SimilarityTransform& xf) {
  if (ref_centers.size() != est_centers.size())
    throw Error(ErrorCode::LengthMismatch, "ATE on unequal point counts");
  if (ref_centers.empty()) throw Error(ErrorCode::EmptySet, "ATE over zero frames");
  double sum = 0.0;
  for (std::size_t i = 0; i < ref_centers.size(); ++i)
    sum += (ref_centers[i] - xf.apply(est_centers[i])).squaredNorm();
  return std::sqrt(sum / static_cast<double>(ref_centers.size()));
}

struct RteSummary {
  std::vector<double> per_frame_deg;
  double mean_deg = 0.0;
  double median_deg = 0.0;
};

inline bool is_rotation(const Mat3& r, double tol = 1e-6) {
  return r.allFinite() && (r.transpose() * r - Mat3::Identity()).norm() <= tol && r.determinant() > 0.0;
}

/// Geodesic angle in degrees of R^T * R', with the arccos argument clamped.
inline double rotation_angle_deg(const Mat3& r_err) {
  const double c = std::clamp((r_err.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

/// Median with the midpoint mean for even counts.
inline double median(std::vector<double> v) {
  if (v.empty()) throw Error(ErrorCode::EmptySet, "median of nothing");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

inline RteSummary rte(std::span<const Mat3> ref_rotations, std::span<const Mat3> est_rotations, const Mat3& r_align) {
  if (ref_rotations.size() != est_rotations.size())
    throw Error(ErrorCode::LengthMismatch, "RTE on unequal rotation counts");
  if (ref_rotations.empty()) throw Error(ErrorCode::EmptySet, "RTE over zero frames");
  if (!is_rotation(r_align)) throw Error(ErrorCode::InvalidRotation, "alignment rotation");

  RteSummary out;
  out.per_frame_deg.reserve(ref_rotations.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < ref_rotations.size(); ++i) {
    if (!is_rotation(ref_rotations[i]) || !is_rotation(est_rotations[i]))
      throw Error(ErrorCode::InvalidRotation, "frame " + std::to_string(i));
    const double theta = rotation_angle_deg(ref_rotations[i].transpose() * (r_align * est_rotations[i]));
    out.per_frame_deg.push_back(theta);
    sum += theta;
  }
  out.mean_deg = sum / static_cast<double>(out.per_frame_deg.size());
  out.median_deg = median(out.per_frame_deg);
  return out;
}

}  // namespace mvgeom
