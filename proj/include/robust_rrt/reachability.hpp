#pragma once

#include "robust_rrt/core.hpp"
#include "robust_rrt/geometry.hpp"
#include "robust_rrt/parallel.hpp"
#include "robust_rrt/systems.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace robust_rrt {

/// One RandUP sample: a state, its frozen parameter draw and its mode.
struct Particle {
  Vec state;
  Vec theta;
  int mode = 0;
  std::uint64_t stream_id = 0;
};

/// Particle approximation of a reachable set.
struct ParticleSet {
  std::vector<Particle> particles;
  ConvexHull2D hull;  // over the collision projection
  Vec nominal_mean;
  double time = 0.0;
  double epsilon = 0.0;
  std::optional<Vec> reference;  // feedback tracking state, when the plant has one
  bool nominal_disturbance = false;  // propagate with the nominal w instead of sampling W

  std::size_t size() const { return particles.size(); }

  /// Shared mode of all particles, or -1 when they disagree.
  int mode() const {
    if (particles.empty()) return -1;
    const int m = particles.front().mode;
    for (const auto& p : particles)
      if (p.mode != m) return -1;
    return m;
  }

  std::vector<Point2> projected(std::span<const int> projection) const {
    std::vector<Point2> pts;
    pts.reserve(particles.size());
    for (const auto& p : particles) pts.push_back(project2(p.state, projection));
    return pts;
  }
};

/// Recomputes the hull and the particle mean.
inline void refresh(ParticleSet& set, std::span<const int> projection) {
  if (set.particles.empty()) throw Error("particle set is empty");
  Vec mean = Vec::Zero(set.particles.front().state.size());
  for (const auto& p : set.particles) mean += p.state;
  set.nominal_mean = mean / static_cast<double>(set.particles.size());
  set.hull = convex_hull_2d(set.projected(projection));
}

/// N particles with x0 ~ Unif(X_0) and theta ~ Unif(Theta), each on its own
/// substream of the master seed.
inline ParticleSet init_particles(const Plant& plant, const UncertaintyBounds& bounds, std::size_t n,
                                  std::uint64_t seed, int initial_mode = 0, double epsilon = 0.0) {
  if (n == 0) throw Error("particle count must be at least 1");
  ParticleSet set;
  set.particles.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Stream rng(seed, StreamDomain::ParticleInit, i);
    Vec x0 = sample_initial(bounds.init, rng);
    Vec theta = rng.uniform(bounds.param);
    set.particles.push_back({std::move(x0), std::move(theta), initial_mode, i});
  }
  set.epsilon = epsilon;
  if (has_feedback(plant)) set.reference = initial_center(bounds.init);
  refresh(set, collision_projection(plant));
  return set;
}

/// Single particle at the centre of X_0 with nominal parameters and
/// disturbances: the nominal-RRT baseline.
inline ParticleSet nominal_particles(const Plant& plant, const UncertaintyBounds& bounds,
                                     int initial_mode = 0, double epsilon = 0.0) {
  ParticleSet set;
  set.particles.push_back({initial_center(bounds.init), nominal_param(plant), initial_mode, 0});
  set.epsilon = epsilon;
  set.nominal_disturbance = true;
  if (has_feedback(plant)) set.reference = initial_center(bounds.init);
  refresh(set, collision_projection(plant));
  return set;
}

/// Identifies the random substreams of one extension.
struct ExtensionKey {
  std::uint64_t seed = 0;
  std::uint64_t extension = 0;
  StreamDomain domain = StreamDomain::Propagation;
};

struct ReachResult {
  ParticleSet set;
  std::vector<std::vector<Vec>> traces;  // traces[particle][substep], substep 0 is the start
  std::vector<Vec> reference_trace;      // empty unless the plant has feedback
};

/// Propagates every particle through a constant-control segment. Returns
/// nothing when any particle diverges.
inline std::optional<ReachResult> compute_reach_set(const ParticleSet& from, const Vec& u, double tau,
                                                    const Plant& plant, const Box& disturbance, double h,
                                                    const ExtensionKey& key, WorkerPool& pool) {
  if (from.particles.empty()) throw Error("cannot propagate an empty particle set");
  const std::vector<double> steps = substep_lengths(tau, h);

  ReachResult out;
  try {
    if (const auto* fb = std::get_if<FeedbackWrapper>(&plant)) {
      if (!from.reference) throw Error("feedback plant requires a reference state");
      out.reference_trace.reserve(steps.size() + 1);
      out.reference_trace.push_back(*from.reference);
      for (double dt : steps)
        out.reference_trace.push_back(advance_reference(*fb, out.reference_trace.back(), u, dt));
    }
  } catch (const DivergenceError&) {
    return std::nullopt;
  }

  const std::size_t n = from.particles.size();
  out.traces.resize(n);
  std::vector<int> final_mode(n, 0);
  std::vector<char> diverged(n, 0);
  const Vec& w_nominal = nominal_disturbance(plant);

  pool.for_each_index(n, [&](std::size_t i) {
    const Particle& p = from.particles[i];
    Stream rng(key.seed, key.domain, key.extension, p.stream_id);
    auto& trace = out.traces[i];
    trace.reserve(steps.size() + 1);
    trace.push_back(p.state);
    RolloutState s{p.state, p.mode};
    try {
      for (std::size_t k = 0; k < steps.size(); ++k) {
        const Vec w = from.nominal_disturbance ? w_nominal : rng.uniform(disturbance);
        const Vec* ref = out.reference_trace.empty() ? nullptr : &out.reference_trace[k];
        s = advance(plant, s, u, ref, w, p.theta, steps[k]);
        trace.push_back(s.x);
      }
    } catch (const DivergenceError&) {
      diverged[i] = 1;
    }
    final_mode[i] = s.mode;
  });

  for (char d : diverged)
    if (d) return std::nullopt;

  ParticleSet& next = out.set;
  next.particles.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Particle& p = from.particles[i];
    next.particles.push_back({out.traces[i].back(), p.theta, final_mode[i], p.stream_id});
  }
  next.time = from.time + tau;
  next.epsilon = from.epsilon;
  next.nominal_disturbance = from.nominal_disturbance;
  if (!out.reference_trace.empty()) next.reference = out.reference_trace.back();
  refresh(next, collision_projection(plant));
  return out;
}

/// Exact reachable interval of x' = theta + w from an interval of initial states.
inline std::pair<double, double> exact_interval_reach(const Plant& plant, const UncertaintyBounds& bounds,
                                                      std::pair<double, double> x0, double tau) {
  if (plant_name(plant) != "linear1d") throw Error("exact interval reach requires the linear1d system");
  if (tau < 0.0) throw Error("duration must be nonnegative");
  return {x0.first + (bounds.param.lo[0] + bounds.disturbance.lo[0]) * tau,
          x0.second + (bounds.param.hi[0] + bounds.disturbance.hi[0]) * tau};
}

namespace detail {
inline ConvexHull2D bounding_rectangle(const std::vector<Point2>& pts) {
  Point2 lo = pts.front(), hi = pts.front();
  for (const auto& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return convex_hull_2d(std::vector<Point2>{lo, {hi.x(), lo.y()}, hi, {lo.x(), hi.y()}});
}
}  // namespace detail

/// Smallest hull clearance over all sub-step boundaries and obstacles.
/// Clearances above `ignore_above` are not resolved exactly (the result is then
/// only known to exceed it); the scan stops once a value <= `stop_below` is seen.
inline double min_trace_clearance(const std::vector<std::vector<Vec>>& traces, std::span<const int> projection,
                                  std::span<const Obstacle> obstacles, double stop_below = -1e300,
                                  double ignore_above = std::numeric_limits<double>::infinity()) {
  double best = std::numeric_limits<double>::infinity();
  if (traces.empty() || obstacles.empty()) return best;
  const std::size_t steps = traces.front().size();
  std::vector<Point2> pts(traces.size());
  for (std::size_t k = 0; k < steps; ++k) {
    for (std::size_t i = 0; i < traces.size(); ++i) pts[i] = project2(traces[i][k], projection);
    const ConvexHull2D box = detail::bounding_rectangle(pts);
    std::optional<ConvexHull2D> hull;
    for (const auto& o : obstacles) {
      // The bounding rectangle contains the hull, so its clearance is a lower bound.
      const double coarse = hull_obstacle_clearance(box, o);
      if (coarse >= best || coarse > ignore_above) continue;
      if (!hull) hull = convex_hull_2d(pts);
      best = std::min(best, hull_obstacle_clearance(*hull, o));
      if (best <= stop_below) return best;
    }
  }
  return best;
}

/// True iff, at every sub-step boundary, the hull of projected particle states
/// keeps clearance strictly greater than epsilon from every obstacle.
inline bool padded_collision_free(const std::vector<std::vector<Vec>>& traces, std::span<const int> projection,
                                  std::span<const Obstacle> obstacles, double epsilon) {
  if (traces.empty()) throw Error("collision check needs at least one trace");
  return min_trace_clearance(traces, projection, obstacles, epsilon, epsilon) > epsilon;
}

/// True iff every particle lies in the goal shrunk by epsilon.
inline bool padded_goal_contained(const ParticleSet& set, const GoalRegion& goal, double epsilon) {
  for (const auto& p : set.particles)
    if (!goal_contains(goal, p.state, epsilon)) return false;
  return !set.particles.empty();
}

}  // namespace robust_rrt
