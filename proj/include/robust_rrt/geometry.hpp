#pragma once

#include "robust_rrt/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <variant>
#include <vector>

namespace robust_rrt {

using Point2 = Eigen::Vector2d;

/// Collinearity and containment tolerance, in planner units.
inline constexpr double kGeomTol = 1e-9;

// ---------------------------------------------------------------------------
// Hausdorff distance
// ---------------------------------------------------------------------------

/// Directed distance sup_{a in A} inf_{b in B} |a - b|.
template <class RangeA, class RangeB>
double directed_hausdorff(const RangeA& a, const RangeB& b) {
  double worst = 0.0;
  for (const auto& p : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : b) {
      best = std::min(best, (p - q).squaredNorm());
      if (best <= worst) break;  // cannot raise the running sup
    }
    worst = std::max(worst, best);
  }
  return std::sqrt(worst);
}

/// Symmetric Hausdorff distance between two finite point sets (Euclidean).
template <class RangeA, class RangeB>
double hausdorff_distance(const RangeA& a, const RangeB& b) {
  if (std::begin(a) == std::end(a) || std::begin(b) == std::end(b))
    throw Error("empty set has no Hausdorff distance");
  const auto dim = std::begin(a)->size();
  for (const auto& p : a)
    if (p.size() != dim) throw Error("Hausdorff distance: dimension mismatch");
  for (const auto& q : b)
    if (q.size() != dim) throw Error("Hausdorff distance: dimension mismatch");
  return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

// ---------------------------------------------------------------------------
// Convex hulls
// ---------------------------------------------------------------------------

inline double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

/// Counter-clockwise convex polygon. One vertex is a point hull, two a segment.
struct ConvexHull2D {
  std::vector<Point2> vertices;

  bool degenerate() const { return vertices.size() < 3; }
  std::size_t size() const { return vertices.size(); }
};

/// Andrew's monotone chain. Middle points within kGeomTol of a hull edge are dropped.
inline ConvexHull2D convex_hull_2d(std::vector<Point2> pts) {
  if (pts.empty()) throw Error("convex hull of an empty point set");
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() == 1) return {std::move(pts)};

  // Pop while the last vertex is not strictly left of (o -> p) by more than the tolerance.
  auto turns_left = [](const Point2& o, const Point2& a, const Point2& p) {
    return cross(o, a, p) > kGeomTol * (p - o).norm();
  };

  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && !turns_left(hull[k - 2], hull[k - 1], p)) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && !turns_left(hull[k - 2], hull[k - 1], pts[i])) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);  // last point repeats the first
  if (hull.size() == 2 && hull[0] == hull[1]) hull.resize(1);
  return {std::move(hull)};
}

inline ConvexHull2D convex_hull_2d(std::span<const Point2> pts) {
  return convex_hull_2d(std::vector<Point2>(pts.begin(), pts.end()));
}

inline double point_segment_distance(const Point2& p, const Point2& a, const Point2& b) {
  const Point2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

/// Signed distance from p to the hull: negative inside, positive outside.
inline double signed_distance(const ConvexHull2D& h, const Point2& p) {
  const auto& v = h.vertices;
  if (v.size() == 1) return (p - v[0]).norm();
  if (v.size() == 2) return point_segment_distance(p, v[0], v[1]);
  double boundary = std::numeric_limits<double>::infinity();
  bool inside = true;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point2& a = v[i];
    const Point2& b = v[(i + 1) % v.size()];
    if (cross(a, b, p) < 0.0) inside = false;
    boundary = std::min(boundary, point_segment_distance(p, a, b));
  }
  return inside ? -boundary : boundary;
}

/// True iff p is within tol of every inner half-plane of the hull (or of the
/// point / segment for degenerate hulls).
inline bool point_in_hull(const ConvexHull2D& h, const Point2& p, double tol = kGeomTol) {
  const auto& v = h.vertices;
  if (v.size() < 3) return signed_distance(h, p) <= tol;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point2& a = v[i];
    const Point2& b = v[(i + 1) % v.size()];
    if (cross(a, b, p) / (b - a).norm() < -tol) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Obstacles and goals
// ---------------------------------------------------------------------------

struct BallObstacle {
  Vec center;
  double radius;
};

struct BoxObstacle {
  Vec lo;
  Vec hi;
};

using Obstacle = std::variant<BallObstacle, BoxObstacle>;

inline Obstacle make_ball(Vec center, double radius) {
  if (!(radius > 0.0)) throw Error("ball obstacle radius must be positive");
  return BallObstacle{std::move(center), radius};
}

inline Obstacle make_box(Vec lo, Vec hi) {
  if (lo.size() != hi.size()) throw Error("box obstacle bounds have different dimensions");
  for (Eigen::Index i = 0; i < lo.size(); ++i)
    if (!(lo[i] < hi[i])) throw Error("box obstacle needs lo < hi componentwise");
  return BoxObstacle{std::move(lo), std::move(hi)};
}

/// Signed Euclidean distance from a 2-D point to the obstacle set.
inline double signed_distance(const Obstacle& o, const Point2& p) {
  if (const auto* b = std::get_if<BallObstacle>(&o)) return (p - b->center.head<2>()).norm() - b->radius;
  const auto& box = std::get<BoxObstacle>(o);
  const Point2 c = 0.5 * (box.lo.head<2>() + box.hi.head<2>());
  const Point2 half = 0.5 * (box.hi.head<2>() - box.lo.head<2>());
  const Point2 q = (p - c).cwiseAbs() - half;
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

namespace detail {

inline double segment_segment_distance(const Point2& a0, const Point2& a1, const Point2& b0,
                                       const Point2& b1) {
  auto orient = [](const Point2& o, const Point2& a, const Point2& b) { return cross(o, a, b); };
  const double d1 = orient(b0, b1, a0), d2 = orient(b0, b1, a1);
  const double d3 = orient(a0, a1, b0), d4 = orient(a0, a1, b1);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return 0.0;
  return std::min({point_segment_distance(a0, b0, b1), point_segment_distance(a1, b0, b1),
                   point_segment_distance(b0, a0, a1), point_segment_distance(b1, a0, a1)});
}

// Maximum separation of b from a along the outward edge normals of a.
inline double max_separation(const std::vector<Point2>& a, const std::vector<Point2>& b) {
  double best = -std::numeric_limits<double>::infinity();
  const std::size_t n = a.size();
  if (n < 2) return best;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& p = a[i];
    const Point2& q = a[(i + 1) % n];
    Point2 normal(q.y() - p.y(), p.x() - q.x());  // outward for CCW
    const double len = normal.norm();
    if (len == 0.0) continue;
    normal /= len;
    double a_max = -std::numeric_limits<double>::infinity();
    for (const auto& v : a) a_max = std::max(a_max, normal.dot(v));
    double b_min = std::numeric_limits<double>::infinity();
    for (const auto& v : b) b_min = std::min(b_min, normal.dot(v));
    best = std::max(best, b_min - a_max);
  }
  return best;
}

}  // namespace detail

/// Distance between the hull and the obstacle. Positive when disjoint (the
/// exact Euclidean gap), at most zero when they intersect.
inline double hull_obstacle_clearance(const ConvexHull2D& h, const Obstacle& o) {
  if (const auto* b = std::get_if<BallObstacle>(&o))
    return signed_distance(h, Point2(b->center.head<2>())) - b->radius;

  const auto& box = std::get<BoxObstacle>(o);
  const std::vector<Point2> rect = {{box.lo[0], box.lo[1]},
                                    {box.hi[0], box.lo[1]},
                                    {box.hi[0], box.hi[1]},
                                    {box.lo[0], box.hi[1]}};
  const auto& v = h.vertices;
  if (v.size() == 1) return signed_distance(o, v[0]);

  double sep = detail::max_separation(rect, v);
  if (v.size() == 2) {
    // A segment is its own two-edge polygon; both normals are candidate axes.
    sep = std::max({sep, detail::max_separation(v, rect),
                    detail::max_separation({v[1], v[0]}, rect)});
  } else {
    sep = std::max(sep, detail::max_separation(v, rect));
  }
  if (sep <= 0.0) return sep;

  double best = std::numeric_limits<double>::infinity();
  const std::size_t nv = v.size() == 2 ? 1 : v.size();
  for (std::size_t i = 0; i < nv; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      best = std::min(best, detail::segment_segment_distance(v[i], v[(i + 1) % v.size()], rect[j],
                                                             rect[(j + 1) % 4]));
  return best;
}

/// Closed ball over a coordinate projection of the state.
struct GoalRegion {
  std::vector<int> projection;
  Vec center;
  double radius;
};

inline GoalRegion make_goal(std::vector<int> projection, Vec center, double radius) {
  if (!(radius > 0.0)) throw Error("goal radius must be positive");
  if (projection.size() != static_cast<std::size_t>(center.size()))
    throw Error("goal projection and center have different dimensions");
  return {std::move(projection), std::move(center), radius};
}

inline bool goal_contains(const GoalRegion& g, const Vec& x, double shrink = 0.0) {
  const double r = g.radius - shrink;
  if (r <= 0.0) return false;
  double d2 = 0.0;
  for (std::size_t i = 0; i < g.projection.size(); ++i) {
    const int k = g.projection[i];
    if (k < 0 || k >= x.size()) throw Error("goal projection index out of range");
    const double d = x[k] - g.center[static_cast<Eigen::Index>(i)];
    d2 += d * d;
  }
  return d2 <= r * r;
}

/// Projects a state onto the declared collision coordinates. A single index
/// maps onto the x axis of the plane.
inline Point2 project2(const Vec& x, std::span<const int> idx) {
  Point2 p(0.0, 0.0);
  for (std::size_t i = 0; i < idx.size() && i < 2; ++i) p[static_cast<Eigen::Index>(i)] = x[idx[i]];
  return p;
}

}  // namespace robust_rrt
