#include "robust_rrt/geometry.hpp"
#include "robust_rrt/core.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>

using namespace robust_rrt;
using rrt_test::brute_hausdorff;
using rrt_test::halfplane_in_hull;

namespace {

Vec Vec2(double a, double b) { return (Vec(2) << a, b).finished(); }

std::vector<Point2> random_points(Stream& rng, std::size_t n, double scale = 10.0) {
  std::vector<Point2> pts;
  for (std::size_t i = 0; i < n; ++i) pts.emplace_back(rng.uniform(-scale, scale), rng.uniform(-scale, scale));
  return pts;
}

std::vector<Vec> random_set(Stream& rng, std::size_t n, int dim) {
  std::vector<Vec> out;
  for (std::size_t i = 0; i < n; ++i) {
    Vec v(dim);
    for (int k = 0; k < dim; ++k) v[k] = rng.uniform(-5.0, 5.0);
    out.push_back(v);
  }
  return out;
}

ConvexHull2D unit_square() {
  return convex_hull_2d(std::vector<Point2>{{0, 0}, {1, 0}, {1, 1}, {0, 1}});
}

}  // namespace

TEST(Hausdorff, SingletonsReduceToEuclidean) {
  std::vector<Point2> a{{0, 0}}, b{{3, 4}};
  EXPECT_DOUBLE_EQ(hausdorff_distance(a, b), 5.0);
}

TEST(Hausdorff, SelfDistanceIsZero) {
  Stream rng(11);
  const auto a = random_points(rng, 40);
  EXPECT_EQ(hausdorff_distance(a, a), 0.0);
}

TEST(Hausdorff, MatchesPairwiseEnumeration) {
  std::vector<Point2> a{{0, 0}, {2, 0}}, b{{0, 0}, {0, 1}};
  EXPECT_DOUBLE_EQ(hausdorff_distance(a, b), brute_hausdorff(a, b));
  EXPECT_DOUBLE_EQ(hausdorff_distance(a, b), 2.0);

  Stream rng(12);
  for (int t = 0; t < 200; ++t) {
    const auto x = random_set(rng, 1 + rng.index(15), 3);
    const auto y = random_set(rng, 1 + rng.index(15), 3);
    EXPECT_NEAR(hausdorff_distance(x, y), brute_hausdorff(x, y), 1e-12);
  }
}

TEST(Hausdorff, Errors) {
  std::vector<Point2> a{{0, 0}}, empty;
  EXPECT_THROW(hausdorff_distance(a, empty), Error);
  EXPECT_THROW(hausdorff_distance(empty, a), Error);
  try {
    hausdorff_distance(empty, a);
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "empty set has no Hausdorff distance");
  }
  std::vector<Vec> x{Vec::Zero(2)}, y{Vec::Zero(3)};
  EXPECT_THROW(hausdorff_distance(x, y), Error);
}

TEST(Hausdorff, MetricAxioms) {
  Stream rng(13);
  for (int t = 0; t < 500; ++t) {
    const auto a = random_set(rng, 1 + rng.index(8), 2);
    const auto b = random_set(rng, 1 + rng.index(8), 2);
    const auto c = random_set(rng, 1 + rng.index(8), 2);
    const double ab = hausdorff_distance(a, b), ba = hausdorff_distance(b, a);
    EXPECT_GE(ab, 0.0);
    EXPECT_EQ(ab, ba);
    EXPECT_LE(hausdorff_distance(a, c), ab + hausdorff_distance(b, c) + 1e-12);
    EXPECT_GT(ab, 0.0);  // continuous draws never coincide
  }
}

TEST(ConvexHull, TriangleIsCounterClockwise) {
  const auto h = convex_hull_2d(std::vector<Point2>{{0, 0}, {0, 1}, {1, 0}});
  ASSERT_EQ(h.size(), 3u);
  EXPECT_FALSE(h.degenerate());
  for (std::size_t i = 0; i < 3; ++i) EXPECT_GT(cross(h.vertices[i], h.vertices[(i + 1) % 3], h.vertices[(i + 2) % 3]), 0.0);
}

TEST(ConvexHull, InteriorPointExcluded) {
  const auto h = convex_hull_2d(std::vector<Point2>{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}});
  ASSERT_EQ(h.size(), 4u);
  for (const auto& v : h.vertices) EXPECT_NE(v, Point2(0.5, 0.5));
}

TEST(ConvexHull, CollinearPointsDropped) {
  const auto h = convex_hull_2d(std::vector<Point2>{{0, 0}, {0.5, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0.5}});
  EXPECT_EQ(h.size(), 4u);
}

TEST(ConvexHull, Degenerate) {
  const auto point = convex_hull_2d(std::vector<Point2>{{1, 2}, {1, 2}, {1, 2}});
  EXPECT_EQ(point.size(), 1u);
  EXPECT_TRUE(point.degenerate());
  const auto seg = convex_hull_2d(std::vector<Point2>{{0, 0}, {1, 1}, {2, 2}, {0.5, 0.5}});
  ASSERT_EQ(seg.size(), 2u);
  EXPECT_TRUE(seg.degenerate());
  EXPECT_TRUE(point_in_hull(seg, {1.5, 1.5}));
  EXPECT_FALSE(point_in_hull(seg, {1.5, 1.6}));
  EXPECT_FALSE(point_in_hull(seg, {2.5, 2.5}));
  EXPECT_THROW(convex_hull_2d(std::vector<Point2>{}), Error);
}

TEST(ConvexHull, MembershipMatchesHalfPlaneOracle) {
  Stream rng(21);
  for (int t = 0; t < 40; ++t) {
    const auto pts = random_points(rng, 50);
    const auto h = convex_hull_2d(pts);
    for (std::size_t i = 0; i < h.size(); ++i)
      EXPECT_GE(cross(h.vertices[i], h.vertices[(i + 1) % h.size()], h.vertices[(i + 2) % h.size()]), 0.0);
    for (const auto& p : pts) {
      EXPECT_TRUE(point_in_hull(h, p));
      EXPECT_TRUE(halfplane_in_hull(pts, p));
    }
    for (int q = 0; q < 50; ++q) {
      const Point2 p(rng.uniform(-12.0, 12.0), rng.uniform(-12.0, 12.0));
      EXPECT_EQ(point_in_hull(h, p), halfplane_in_hull(pts, p));
    }
  }
}

TEST(ConvexHull, PermutationInvariant) {
  Stream rng(22);
  auto pts = random_points(rng, 60);
  const auto h1 = convex_hull_2d(pts);
  std::shuffle(pts.begin(), pts.end(), rng);
  const auto h2 = convex_hull_2d(pts);
  EXPECT_EQ(h1.vertices, h2.vertices);
}

TEST(ConvexHull, MonotoneUnderUnion) {
  Stream rng(23);
  for (int t = 0; t < 50; ++t) {
    auto s = random_points(rng, 20);
    const auto small = convex_hull_2d(s);
    const auto extra = random_points(rng, 10, 15.0);
    s.insert(s.end(), extra.begin(), extra.end());
    const auto big = convex_hull_2d(s);
    for (const auto& v : small.vertices) EXPECT_TRUE(point_in_hull(big, v));
  }
}

TEST(PointInHull, Square) {
  const auto sq = unit_square();
  EXPECT_TRUE(point_in_hull(sq, {0.5, 0.5}));
  EXPECT_TRUE(point_in_hull(sq, {1.0, 0.5}));
  EXPECT_FALSE(point_in_hull(sq, {1.0 + 1e-6, 0.5}));
  EXPECT_TRUE(point_in_hull(sq, {1.0 + 1e-6, 0.5}, 1e-5));
  EXPECT_DOUBLE_EQ(signed_distance(sq, {0.5, 0.5}), -0.5);
  EXPECT_DOUBLE_EQ(signed_distance(sq, {3.0, 0.5}), 2.0);
}

TEST(Clearance, SquareVersusBall) {
  EXPECT_NEAR(hull_obstacle_clearance(unit_square(), make_ball(Vec2(5.0, 0.0), 1.0)), 3.0, 1e-6);
}

TEST(Clearance, MatchesDenseBoundarySampling) {
  Stream rng(31);
  for (int t = 0; t < 100; ++t) {
    const auto h = convex_hull_2d(random_points(rng, 12, 2.0));
    const Obstacle ball = make_ball(Vec2(rng.uniform(-6.0, 6.0), rng.uniform(-6.0, 6.0)), rng.uniform(0.2, 2.0));
    Vec lo = Vec2(rng.uniform(-6.0, 4.0), rng.uniform(-6.0, 4.0));
    const Obstacle box = make_box(lo, lo + Vec2(rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0)));
    for (const auto& o : {ball, box}) {
      double dense = 1e300;
      bool hit = false;
      const auto& v = h.vertices;
      for (std::size_t i = 0; i < v.size(); ++i) {
        for (int k = 0; k <= 4000; ++k) {
          const Point2 p = v[i] + (v[(i + 1) % v.size()] - v[i]) * (k / 4000.0);
          dense = std::min(dense, signed_distance(o, p));
        }
      }
      // Obstacle points inside the hull mean overlap even when the boundary clears.
      if (const auto* b = std::get_if<BallObstacle>(&o)) hit = point_in_hull(h, b->center);
      else {
        const auto& r = std::get<BoxObstacle>(o);
        hit = point_in_hull(h, r.lo) || point_in_hull(h, r.hi) || point_in_hull(h, {r.lo.x(), r.hi.y()}) ||
              point_in_hull(h, {r.hi.x(), r.lo.y()});
      }
      const double c = hull_obstacle_clearance(h, o);
      if (dense > 1e-3 && !hit) {
        EXPECT_NEAR(c, dense, 2e-3 * (1.0 + dense));
      } else if (dense < -1e-3 || hit) {
        EXPECT_LE(c, 0.0);
      }
      double vmin = 1e300;
      for (const auto& p : v) vmin = std::min(vmin, signed_distance(o, p));
      EXPECT_LE(c, vmin + 1e-12);
    }
  }
}

TEST(Clearance, ContainedCenterIsNonPositive) {
  EXPECT_LE(hull_obstacle_clearance(unit_square(), make_ball(Vec2(0.5, 0.5), 0.1)), 0.0);
  EXPECT_LE(hull_obstacle_clearance(unit_square(), make_box(Vec2(0.2, 0.2), Vec2(0.4, 0.4))), 0.0);
}

TEST(Clearance, TangentBallIsZero) {
  EXPECT_NEAR(hull_obstacle_clearance(unit_square(), make_ball(Vec2(2.0, 0.5), 1.0)), 0.0, 1e-9);
  EXPECT_NEAR(hull_obstacle_clearance(unit_square(), make_box(Vec2(1.0, 0.3), Vec2(2.0, 2.0))), 0.0, 1e-9);
}

TEST(Clearance, DegenerateHulls) {
  const auto point = convex_hull_2d(std::vector<Point2>{{0, 0}});
  EXPECT_NEAR(hull_obstacle_clearance(point, make_ball(Vec2(3.0, 4.0), 1.0)), 4.0, 1e-12);
  const auto seg = convex_hull_2d(std::vector<Point2>{{-1, 0}, {1, 0}});
  EXPECT_NEAR(hull_obstacle_clearance(seg, make_box(Vec2(-0.5, 1.0), Vec2(0.5, 2.0))), 1.0, 1e-12);
  EXPECT_LE(hull_obstacle_clearance(seg, make_box(Vec2(-0.5, -1.0), Vec2(0.5, 1.0))), 0.0);
}

TEST(Obstacles, Validation) {
  EXPECT_THROW(make_ball(Vec2(0.0, 0.0), 0.0), Error);
  EXPECT_THROW(make_box(Vec2(0.0, 0.0), Vec2(1.0, 0.0)), Error);
  EXPECT_THROW(make_goal({0, 1}, Vec2(0.0, 0.0), -1.0), Error);
}

TEST(Goal, ShrinkSemantics) {
  const auto g = make_goal({0, 1}, Vec2(10.0, 0.0), 0.7);
  Vec x = Vec::Zero(4);
  x[0] = 10.0;
  EXPECT_TRUE(goal_contains(g, x, 0.3));
  x[0] = 10.5;
  EXPECT_FALSE(goal_contains(g, x, 0.3));
  x[0] = 10.7;
  EXPECT_TRUE(goal_contains(g, x, 0.0));
  x[0] = 10.0;
  EXPECT_FALSE(goal_contains(g, x, 0.7));
  EXPECT_FALSE(goal_contains(g, x, 1.0));
}

TEST(Goal, Projection) {
  const auto g = make_goal({0, 2}, Vec2(2.5, 0.0), 0.25);
  Vec x(5);
  x << 2.5, 100.0, 0.1, -3.0, 0.0;
  EXPECT_TRUE(goal_contains(g, x));
  x[2] = 0.3;
  EXPECT_FALSE(goal_contains(g, x));
}
