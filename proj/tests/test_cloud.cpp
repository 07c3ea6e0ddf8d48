#include <gtest/gtest.h>

#include <random>

#include "mvgeom/cloud.hpp"
#include "test_util.hpp"

using namespace mvgeom;
using testutil::random_rotation;

namespace {

PointCloud random_cloud(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.emplace_back(u(rng), u(rng), u(rng));
  return c;
}

double brute_nearest(const std::vector<Eigen::Vector3d>& pts, const Eigen::Vector3d& q) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : pts) best = std::min(best, (p - q).norm());
  return best;
}

}  // namespace

TEST(Intrinsics, RuleValues) {
  EXPECT_EQ(intrinsics_from_rule(640, 480), Intrinsics(448, 448, 320, 240));
  const Intrinsics garden = intrinsics_from_rule(648, 420);
  EXPECT_NEAR(garden.fx, 453.6, 1e-12);
  EXPECT_EQ(garden.fx, garden.fy);
  EXPECT_EQ(garden.cx, 324.0);
  EXPECT_EQ(garden.cy, 210.0);
  const Intrinsics tiny = intrinsics_from_rule(1, 1);
  EXPECT_NEAR(tiny.fx, 0.7, 1e-15);
  EXPECT_EQ(tiny.cx, 0.5);
  EXPECT_EQ(tiny.cy, 0.5);
  EXPECT_THROW(intrinsics_from_rule(0, 10), Error);
  EXPECT_THROW(Intrinsics(0, 1, 0, 0), Error);
}

TEST(Backproject, PrincipalAndOffsetRays) {
  const Intrinsics k(2, 2, 1, 1);
  DisparityMap d(3, 4, std::vector<double>(12, 0.0));
  d.values[1 * 4 + 1] = 0.5;  // (u, v) = (cx, cy)
  d.values[1 * 4 + 3] = 1.0;  // (u, v) = (cx + fx, cy)
  const PointCloud c = backproject(d, k, Mat3::Identity(), Vec3::Zero(), 1);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_TRUE(c.points[0].isApprox(Vec3(0, 0, 2)));
  EXPECT_TRUE(c.points[1].isApprox(Vec3(1, 0, 1)));
}

TEST(Backproject, FilterAndStride) {
  const Intrinsics k(10, 10, 4, 4);
  DisparityMap d(8, 8, std::vector<double>(64, 1.0));
  d.values[0] = 1e-5;
  EXPECT_EQ(backproject(d, k, Mat3::Identity(), Vec3::Zero(), 1).size(), 63u);
  EXPECT_EQ(backproject(d, k, Mat3::Identity(), Vec3::Zero(), 4).size(), 3u);
  DisparityMap zero(2, 2, std::vector<double>(4, 0.0));
  try {
    backproject(zero, k, Mat3::Identity(), Vec3::Zero(), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyCloud);
  }
  EXPECT_THROW(DisparityMap(1, 1, {-1.0}), Error);
  EXPECT_THROW(DisparityMap(1, 1, {std::numeric_limits<double>::infinity()}), Error);
  EXPECT_THROW(DisparityMap(2, 2, {1.0}), Error);
}

TEST(Backproject, ForwardProjectionRecoversPixels) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> disp(0.05, 5.0), f(50, 800), u(-10, 10);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t w = 16 + trial, h = 12 + trial;
    const Intrinsics k(f(rng), f(rng), w / 2.0 + u(rng), h / 2.0 + u(rng));
    std::vector<double> vals(w * h);
    for (auto& v : vals) v = disp(rng);
    const DisparityMap d(h, w, vals);
    const Mat3 r = random_rotation(rng);
    const Vec3 c(u(rng), u(rng), u(rng));
    const PointCloud pc = backproject(d, k, r, c, 1);
    ASSERT_EQ(pc.size(), w * h);
    for (std::size_t v = 0, idx = 0; v < h; ++v)
      for (std::size_t x = 0; x < w; ++x, ++idx) {
        const Eigen::Vector2d px = project(pc.points[idx], r, c, k);
        EXPECT_NEAR(px.x(), static_cast<double>(x), 1e-6);
        EXPECT_NEAR(px.y(), static_cast<double>(v), 1e-6);
      }
  }
}

TEST(Similarity, ApplyCases) {
  std::mt19937_64 rng(32);
  const PointCloud c = random_cloud(rng, 100);
  const PointCloud same = apply_similarity(c, SimilarityTransform{});
  EXPECT_EQ(same.points, c.points);

  PointCloud one;
  one.points.emplace_back(1, 1, 1);
  SimilarityTransform scale;
  scale.s = 2.0;
  EXPECT_EQ(apply_similarity(one, scale).points[0], Vec3(2, 2, 2));

  SimilarityTransform xf;
  xf.s = 0.3;
  xf.r = random_rotation(rng);
  xf.t = Vec3(1, 2, 3);
  const PointCloud out = apply_similarity(c, xf);
  for (std::size_t i = 0; i < c.size(); ++i) {
    Vec3 expect;
    for (int row = 0; row < 3; ++row) {
      double acc = 0.0;
      for (int col = 0; col < 3; ++col) acc += xf.r(row, col) * c.points[i](col);
      expect(row) = xf.s * acc + xf.t(row);
    }
    EXPECT_LT((out.points[i] - expect).norm(), 1e-12);
  }
}

TEST(Chamfer, HandCases) {
  PointCloud p, q;
  p.points.emplace_back(0, 0, 0);
  q.points.emplace_back(3, 4, 0);
  EXPECT_EQ(chamfer(p, q), 10.0);
  EXPECT_EQ(chamfer_bruteforce(p, q), 10.0);
  std::mt19937_64 rng(33);
  const PointCloud r = random_cloud(rng, 500);
  EXPECT_EQ(chamfer(r, r), 0.0);
  EXPECT_EQ(chamfer_bruteforce(r, r), 0.0);
  EXPECT_THROW(chamfer(PointCloud{}, r), Error);
}

TEST(Chamfer, MatchesBruteForceAndKdTreeIsExact) {
  std::mt19937_64 rng(34);
  std::uniform_int_distribution<std::size_t> size(1, 2000);
  for (int trial = 0; trial < 30; ++trial) {
    // Mix uniform clouds with clustered and duplicate-heavy ones.
    PointCloud p = random_cloud(rng, size(rng), 1.0 + trial);
    PointCloud q = random_cloud(rng, size(rng), 0.5);
    if (trial % 3 == 0)
      for (std::size_t i = 0; i < q.size(); i += 2) q.points[i] = q.points[0];
    const double fast = chamfer(p, q), slow = chamfer_bruteforce(p, q);
    EXPECT_NEAR(fast, slow, 1e-12 * std::max(1.0, slow));

    const KdTree tree(q.points);
    for (std::size_t i = 0; i < std::min<std::size_t>(p.size(), 200); ++i)
      EXPECT_EQ(std::sqrt(tree.nearest_squared(p.points[i])), brute_nearest(q.points, p.points[i]));
  }
}

TEST(Chamfer, SymmetryRigidInvarianceScaleEquivariance) {
  std::mt19937_64 rng(35);
  for (int trial = 0; trial < 10; ++trial) {
    const PointCloud p = random_cloud(rng, 800), q = random_cloud(rng, 600, 1.3);
    const double base = chamfer(p, q);
    EXPECT_EQ(base, chamfer(q, p));

    SimilarityTransform rigid;
    rigid.r = random_rotation(rng);
    rigid.t = Vec3(3, -1, 2);
    EXPECT_NEAR(chamfer(apply_similarity(p, rigid), apply_similarity(q, rigid)), base, 1e-9);

    SimilarityTransform scale;
    scale.s = 3.5;
    EXPECT_NEAR(chamfer(apply_similarity(p, scale), apply_similarity(q, scale)), 3.5 * base, 1e-9);
  }
}

TEST(Chamfer, ThreadCountDoesNotChangeResult) {
  std::mt19937_64 rng(36);
  const PointCloud p = random_cloud(rng, 30000), q = random_cloud(rng, 25000);
  ChamferOptions one, many;
  many.threads = 4;
  EXPECT_EQ(chamfer(p, q, one), chamfer(p, q, many));
}

TEST(KdTree, SmallAndDegenerateSets) {
  std::vector<Eigen::Vector3d> pts(50, Eigen::Vector3d(1, 1, 1));
  const KdTree same(pts);
  EXPECT_EQ(same.nearest_squared(Eigen::Vector3d(1, 1, 2)), 1.0);
  std::vector<Eigen::Vector3d> single = {Eigen::Vector3d(0, 0, 0)};
  EXPECT_EQ(KdTree(single).nearest_squared(Eigen::Vector3d(0, 3, 4)), 25.0);
}
