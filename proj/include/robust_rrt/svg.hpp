#pragma once

#include "robust_rrt/planner.hpp"

#include <cstdio>
#include <set>
#include <sstream>
#include <string>

namespace robust_rrt {

struct SvgOptions {
  double width_px = 800.0;
  std::size_t max_hulls = 4000;  // hulls drawn beyond this are skipped, plan hulls always drawn
};

namespace detail {

class SvgCanvas {
 public:
  SvgCanvas(Point2 lo, Point2 hi, double width_px) : lo_(lo), hi_(hi) {
    const Point2 span = (hi - lo).cwiseMax(Point2(1e-9, 1e-9));
    scale_ = width_px / span.x();
    w_ = width_px;
    h_ = span.y() * scale_;
  }

  double x(double v) const { return (v - lo_.x()) * scale_; }
  double y(double v) const { return (hi_.y() - v) * scale_; }
  double len(double v) const { return v * scale_; }
  double width() const { return w_; }
  double height() const { return h_; }

 private:
  Point2 lo_, hi_;
  double scale_ = 1.0, w_ = 0.0, h_ = 0.0;
};

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline void draw_obstacle(std::ostringstream& out, const SvgCanvas& c, const Obstacle& o, double pad,
                          const char* style) {
  if (const auto* b = std::get_if<BallObstacle>(&o)) {
    out << "<circle cx=\"" << fmt(c.x(b->center.x())) << "\" cy=\"" << fmt(c.y(b->center.y())) << "\" r=\""
        << fmt(c.len(b->radius + pad)) << "\" " << style << "/>\n";
  } else {
    const auto& r = std::get<BoxObstacle>(o);
    if (pad > 0.0) {
      out << "<rect x=\"" << fmt(c.x(r.lo.x() - pad)) << "\" y=\"" << fmt(c.y(r.hi.y() + pad)) << "\" width=\""
          << fmt(c.len(r.hi.x() - r.lo.x() + 2 * pad)) << "\" height=\"" << fmt(c.len(r.hi.y() - r.lo.y() + 2 * pad))
          << "\" rx=\"" << fmt(c.len(pad)) << "\" " << style << "/>\n";
    } else {
      out << "<rect x=\"" << fmt(c.x(r.lo.x())) << "\" y=\"" << fmt(c.y(r.hi.y())) << "\" width=\""
          << fmt(c.len(r.hi.x() - r.lo.x())) << "\" height=\"" << fmt(c.len(r.hi.y() - r.lo.y())) << "\" " << style
          << "/>\n";
    }
  }
}

inline void draw_hull(std::ostringstream& out, const SvgCanvas& c, const ConvexHull2D& h, const char* style) {
  if (h.vertices.size() == 1) {
    out << "<circle cx=\"" << fmt(c.x(h.vertices[0].x())) << "\" cy=\"" << fmt(c.y(h.vertices[0].y()))
        << "\" r=\"1.5\" " << style << "/>\n";
    return;
  }
  out << "<polygon points=\"";
  for (std::size_t i = 0; i < h.vertices.size(); ++i)
    out << (i ? " " : "") << fmt(c.x(h.vertices[i].x())) << "," << fmt(c.y(h.vertices[i].y()));
  out << "\" " << style << "/>\n";
}

}  // namespace detail

/// Top-down rendering of obstacles, goal, nominal tree edges, per-node
/// reachable-set hulls and the returned plan.
inline std::string render_svg(const Scenario& sc, const PlanResult& result, const SvgOptions& opt = {}) {
  const auto proj = collision_projection(sc.plant);
  Point2 lo = project2(sc.sampling_box.lo, proj), hi = project2(sc.sampling_box.hi, proj);
  auto grow = [&](Point2 a, Point2 b) {
    lo = lo.cwiseMin(a);
    hi = hi.cwiseMax(b);
  };
  for (const auto& o : sc.obstacles) {
    if (const auto* b = std::get_if<BallObstacle>(&o)) {
      const Point2 r(b->radius, b->radius);
      grow(b->center - r, b->center + r);
    } else {
      const auto& r = std::get<BoxObstacle>(o);
      grow(r.lo, r.hi);
    }
  }
  const Point2 gc = sc.goal.center.size() >= 2 ? Point2(sc.goal.center[0], sc.goal.center[1])
                                               : Point2(sc.goal.center[0], 0.0);
  grow(gc - Point2(sc.goal.radius, sc.goal.radius), gc + Point2(sc.goal.radius, sc.goal.radius));
  if (result.tree)
    for (const auto& n : result.tree->nodes()) {
      const Point2 p = project2(n.nominal, proj);
      grow(p, p);
    }
  const Point2 margin = 0.05 * (hi - lo).cwiseMax(Point2(1.0, 1.0));
  lo -= margin;
  hi += margin;
  if (hi.y() - lo.y() < 1e-6 * (hi.x() - lo.x())) {
    lo.y() -= 0.5;
    hi.y() += 0.5;
  }
  const detail::SvgCanvas c(lo, hi, opt.width_px);
  using detail::fmt;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(c.width()) << "\" height=\"" << fmt(c.height())
      << "\" viewBox=\"0 0 " << fmt(c.width()) << " " << fmt(c.height()) << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  const double pad = sc.padding();
  for (const auto& o : sc.obstacles) {
    if (pad > 0.0) detail::draw_obstacle(out, c, o, pad, "fill=\"#f4c7c3\" stroke=\"none\"");
    detail::draw_obstacle(out, c, o, 0.0, "fill=\"#c0392b\" stroke=\"none\"");
  }

  out << "<circle cx=\"" << fmt(c.x(gc.x())) << "\" cy=\"" << fmt(c.y(gc.y())) << "\" r=\""
      << fmt(c.len(sc.goal.radius)) << "\" fill=\"#b7e4c7\" stroke=\"#2d6a4f\"/>\n";
  if (pad > 0.0 && sc.goal.radius > pad)
    out << "<circle cx=\"" << fmt(c.x(gc.x())) << "\" cy=\"" << fmt(c.y(gc.y())) << "\" r=\""
        << fmt(c.len(sc.goal.radius - pad)) << "\" fill=\"none\" stroke=\"#2d6a4f\" stroke-dasharray=\"4 3\"/>\n";

  if (result.tree) {
    const DualTree& tree = *result.tree;
    std::set<std::size_t> on_plan;
    if (result.plan)
      for (const auto& s : result.plan->steps) on_plan.insert(s.node_id);
    if (result.plan) on_plan.insert(0);

    std::size_t drawn = 0;
    for (const auto& n : tree.nodes()) {
      if (on_plan.count(n.id) || drawn >= opt.max_hulls) continue;
      detail::draw_hull(out, c, n.reach_set.hull, "fill=\"#a9cce3\" fill-opacity=\"0.25\" stroke=\"#5dade2\" stroke-width=\"0.5\"");
      ++drawn;
    }
    out << "<g stroke=\"#7f8c8d\" stroke-width=\"0.6\">\n";
    for (const auto& n : tree.nodes()) {
      if (!n.parent) continue;
      const Point2 a = project2(tree.node(*n.parent).nominal, proj), b = project2(n.nominal, proj);
      out << "<line x1=\"" << fmt(c.x(a.x())) << "\" y1=\"" << fmt(c.y(a.y())) << "\" x2=\"" << fmt(c.x(b.x()))
          << "\" y2=\"" << fmt(c.y(b.y())) << "\"/>\n";
    }
    out << "</g>\n";

    if (result.plan) {
      for (std::size_t id : on_plan)
        detail::draw_hull(out, c, tree.node(id).reach_set.hull,
                          "fill=\"#f5b041\" fill-opacity=\"0.45\" stroke=\"#b9770e\" stroke-width=\"0.8\"");
      out << "<polyline fill=\"none\" stroke=\"#1a5276\" stroke-width=\"2\" points=\"";
      const Point2 r0 = project2(tree.node(0).nominal, proj);
      out << fmt(c.x(r0.x())) << "," << fmt(c.y(r0.y()));
      for (const auto& s : result.plan->steps) {
        const Point2 p = project2(tree.node(s.node_id).nominal, proj);
        out << " " << fmt(c.x(p.x())) << "," << fmt(c.y(p.y()));
      }
      out << "\"/>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace robust_rrt
