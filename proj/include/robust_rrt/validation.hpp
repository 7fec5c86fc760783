#pragma once

#include "robust_rrt/core.hpp"
#include "robust_rrt/geometry.hpp"
#include "robust_rrt/parallel.hpp"
#include "robust_rrt/planner.hpp"
#include "robust_rrt/reachability.hpp"
#include "robust_rrt/systems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace robust_rrt {

// ---------------------------------------------------------------------------
// Monte-Carlo plan validation
// ---------------------------------------------------------------------------

struct ValidityRecord {
  std::size_t rollouts = 0;
  std::size_t collisions = 0;
  std::size_t goal_misses = 0;
  bool valid = false;
  std::vector<double> worst_clearance;  // per rollout; +inf without obstacles

  double min_clearance() const {
    double m = std::numeric_limits<double>::infinity();
    for (double c : worst_clearance) m = std::min(m, c);
    return m;
  }
};

enum class ValidationMode {
  Fresh,   // new draws of x0, theta and w, independent of planning
  Replay,  // the planner's own particles and substreams
};

namespace detail {

struct RolloutOutcome {
  bool collided = false;
  bool reached = false;
  double worst_clearance = std::numeric_limits<double>::infinity();
};

inline double point_clearance(const Vec& x, std::span<const int> projection, std::span<const Obstacle> obstacles) {
  double best = std::numeric_limits<double>::infinity();
  const Point2 p = project2(x, projection);
  for (const auto& o : obstacles) best = std::min(best, signed_distance(o, p));
  return best;
}

}  // namespace detail

/// Executes the plan on M rollouts against the true (unpadded) obstacles and
/// goal. A rollout fails on the first sub-step in contact with an obstacle,
/// or when its final state misses the goal.
inline ValidityRecord monte_carlo_validate(const Plan& plan, const Scenario& sc, std::size_t rollouts,
                                           std::uint64_t seed, WorkerPool& pool,
                                           ValidationMode mode = ValidationMode::Fresh) {
  const auto& projection = collision_projection(sc.plant);
  const double h = sc.params.step;
  ValidityRecord rec;

  if (mode == ValidationMode::Replay) {
    PlannerParams params = sc.params;
    params.seed = plan.seed;
    ParticleSet set = root_particles(sc, params);
    const std::size_t n = set.size();
    std::vector<detail::RolloutOutcome> out(n);
    for (std::size_t i = 0; i < n; ++i)
      out[i].worst_clearance = detail::point_clearance(set.particles[i].state, projection, sc.obstacles);
    bool diverged = false;
    for (const auto& step : plan.steps) {
      auto reach = compute_reach_set(set, step.control, step.duration, sc.plant, sc.bounds.disturbance, h,
                                     ExtensionKey{plan.seed, step.stream_key}, pool);
      if (!reach) {
        diverged = true;
        break;
      }
      for (std::size_t i = 0; i < n; ++i)
        for (const auto& x : reach->traces[i])
          out[i].worst_clearance =
              std::min(out[i].worst_clearance, detail::point_clearance(x, projection, sc.obstacles));
      set = std::move(reach->set);
    }
    rec.rollouts = n;
    for (std::size_t i = 0; i < n; ++i) {
      const bool collided = out[i].worst_clearance <= 0.0;
      const bool reached = !diverged && goal_contains(sc.goal, set.particles[i].state);
      rec.collisions += collided;
      rec.goal_misses += !collided && !reached;
      rec.worst_clearance.push_back(out[i].worst_clearance);
    }
    rec.valid = rec.collisions + rec.goal_misses == 0;
    return rec;
  }

  std::vector<detail::RolloutOutcome> out(rollouts);
  const auto* fb = std::get_if<FeedbackWrapper>(&sc.plant);
  pool.for_each_index(rollouts, [&](std::size_t r) {
    Stream init_rng(seed, StreamDomain::Validation, r, 0);
    Stream w_rng(seed, StreamDomain::Validation, r, 1);
    RolloutState s{sample_initial(sc.bounds.init, init_rng), sc.initial_mode};
    const Vec theta = init_rng.uniform(sc.bounds.param);
    Vec mu = initial_center(sc.bounds.init);
    auto& o = out[r];
    o.worst_clearance = detail::point_clearance(s.x, projection, sc.obstacles);
    if (o.worst_clearance <= 0.0) {
      o.collided = true;
      return;
    }
    try {
      for (const auto& step : plan.steps) {
        for (double dt : substep_lengths(step.duration, h)) {
          const Vec w = w_rng.uniform(sc.bounds.disturbance);
          s = advance(sc.plant, s, step.control, fb ? &mu : nullptr, w, theta, dt);
          if (fb) mu = advance_reference(*fb, mu, step.control, dt);
          o.worst_clearance = std::min(o.worst_clearance, detail::point_clearance(s.x, projection, sc.obstacles));
          if (o.worst_clearance <= 0.0) {
            o.collided = true;
            return;
          }
        }
      }
    } catch (const DivergenceError&) {
      return;  // counted as a goal miss
    }
    o.reached = goal_contains(sc.goal, s.x);
  });

  rec.rollouts = rollouts;
  for (const auto& o : out) {
    rec.collisions += o.collided;
    rec.goal_misses += !o.collided && !o.reached;
    rec.worst_clearance.push_back(o.worst_clearance);
  }
  rec.valid = rec.collisions + rec.goal_misses == 0;
  return rec;
}

// ---------------------------------------------------------------------------
// Lipschitz bound checks
// ---------------------------------------------------------------------------

/// Growth constant of the trajectory bound: sqrt(2 max(1, 2 t^2 K^2)) e^{K t}.
inline double trajectory_lipschitz(double K, double t) {
  const double a = std::max(1.0, 2.0 * t * t * K * K);
  return std::sqrt(2.0 * a) * std::exp(K * t);
}

/// Operating region over which the Lipschitz constants are claimed.
struct OperatingBox {
  Box state;
  Box control;
  Box param;
  Box disturbance;
};

struct BoundCheckResult {
  std::size_t trials = 0;
  std::size_t violations = 0;
  double worst_ratio = 0.0;  // max of lhs / rhs over checked instants
};

/// Pairs of trajectories with shared (theta, w) and different (x0, u): counts
/// trials where |x1_t - x2_t| > L_t (|x1_0 - x2_0| + |u1 - u2|) at some sub-step.
inline BoundCheckResult lipschitz_bound_check(const SystemModel& sys, double K, const OperatingBox& box,
                                              std::size_t trials, double tau_max, std::uint64_t seed) {
  BoundCheckResult res;
  res.trials = trials;
  for (std::size_t k = 0; k < trials; ++k) {
    Stream rng(seed, StreamDomain::Study, k, 0);
    const Vec x1 = rng.uniform(box.state);
    const Vec x2 = rng.uniform(box.state);
    const Vec u1 = rng.uniform(box.control);
    const Vec u2 = rng.uniform(box.control);
    const Vec theta = rng.uniform(box.param);
    const double t = rng.uniform(0.0, tau_max);
    Stream w1(seed, StreamDomain::Study, k, 1), w2(seed, StreamDomain::Study, k, 1);
    std::vector<Vec> a, b;
    try {
      a = rollout(sys, x1, u1, t, theta, [&] { return w1.uniform(box.disturbance); }, sys.step_size);
      b = rollout(sys, x2, u2, t, theta, [&] { return w2.uniform(box.disturbance); }, sys.step_size);
    } catch (const DivergenceError&) {
      ++res.violations;
      continue;
    }
    const double base = (x1 - x2).norm() + (u1 - u2).norm();
    double elapsed = 0.0;
    const auto steps = substep_lengths(t, sys.step_size);
    bool violated = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (i > 0) elapsed += steps[i - 1];
      const double lhs = (a[i] - b[i]).norm();
      const double rhs = trajectory_lipschitz(K, elapsed) * base;
      if (rhs > 0.0) res.worst_ratio = std::max(res.worst_ratio, lhs / rhs);
      if (lhs > rhs) violated = true;
    }
    res.violations += violated;
  }
  return res;
}

/// Paired particle propagations with shared (theta, w) per particle index from
/// perturbed initial sets, controls and durations. Counts trials where
/// d_H(X1_t1, X2_t2) > L (d_H(X1_0, X2_0) + |t1 - t2| + |u1 - u2|),
/// L = max(L_{max(t1,t2)}, lambda).
inline BoundCheckResult reachset_lipschitz_check(const SystemModel& sys, double K, double lambda,
                                                 const OperatingBox& box, std::size_t trials, std::size_t particles,
                                                 double tau_max, double init_radius, std::uint64_t seed) {
  BoundCheckResult res;
  res.trials = trials;
  for (std::size_t k = 0; k < trials; ++k) {
    Stream rng(seed, StreamDomain::Study, k, 2);
    const Vec c1 = rng.uniform(box.state);
    const Vec c2 = rng.uniform(box.state);
    const Vec u1 = rng.uniform(box.control);
    const Vec u2 = rng.uniform(box.control);
    const double t1 = rng.uniform(0.0, tau_max);
    const double t2 = rng.uniform(0.0, tau_max);
    std::vector<Vec> x01, x02, xt1, xt2;
    bool diverged = false;
    for (std::size_t i = 0; i < particles; ++i) {
      Stream prng(seed, StreamDomain::Study, k, 1000 + i);
      const Vec theta = prng.uniform(box.param);
      const Vec offset = (prng.uniform(Box(Vec::Constant(c1.size(), -1.0), Vec::Constant(c1.size(), 1.0)))) * init_radius;
      const Vec offset2 = (prng.uniform(Box(Vec::Constant(c1.size(), -1.0), Vec::Constant(c1.size(), 1.0)))) * init_radius;
      x01.push_back(box.state.clamp(c1 + offset));
      x02.push_back(box.state.clamp(c2 + offset2));
      const std::uint64_t wkey = stream_key(seed, StreamDomain::Study, k, 5000 + i);
      Stream w1(wkey), w2(wkey);
      try {
        xt1.push_back(rollout(sys, x01.back(), u1, t1, theta, [&] { return w1.uniform(box.disturbance); },
                              sys.step_size).back());
        xt2.push_back(rollout(sys, x02.back(), u2, t2, theta, [&] { return w2.uniform(box.disturbance); },
                              sys.step_size).back());
      } catch (const DivergenceError&) {
        diverged = true;
        break;
      }
    }
    if (diverged) {
      ++res.violations;
      continue;
    }
    const double L = std::max(trajectory_lipschitz(K, std::max(t1, t2)), lambda);
    const double lhs = hausdorff_distance(xt1, xt2);
    const double rhs = L * (hausdorff_distance(x01, x02) + std::abs(t1 - t2) + (u1 - u2).norm());
    if (rhs > 0.0) res.worst_ratio = std::max(res.worst_ratio, lhs / rhs);
    res.violations += lhs > rhs;
  }
  return res;
}

/// Lipschitz constant K and flow bound lambda of the open-loop quadrotor over
/// an operating box.
struct QuadrotorConstantsBound {
  double K = 0.0;
  double lambda = 0.0;
  double state_jacobian_grid_max = 0.0;  // max |df/dx| over the evaluation grid
  double state_jacobian_interval = 0.0;  // interval upper bound on |df/dx|
  double control_jacobian = 0.0;         // |df/du| = |B|
};

/// K = max(|df/dx|, |df/du|) so that |f(x1,u1) - f(x2,u2)| <= K (|dx| + |du|).
/// |df/dx| is evaluated on a grid of `grid_per_axis`^4 (v, alpha) points and
/// bounded by interval arithmetic on the drag derivative 2 alpha |v|.
inline QuadrotorConstantsBound quadrotor_lipschitz_constants(const OperatingBox& box, double gravity,
                                                             int grid_per_axis = 32) {
  QuadrotorConstantsBound out;
  const auto [A, B] = quadrotor_linear_part(gravity);
  out.control_jacobian = Eigen::JacobiSVD<Mat>(B).singularValues()(0);

  auto axis_value = [&](double lo, double hi, int i) {
    return grid_per_axis == 1 ? lo : lo + (hi - lo) * i / (grid_per_axis - 1);
  };
  Eigen::Matrix4d J = A;
  for (int a = 0; a < grid_per_axis; ++a)
    for (int b = 0; b < grid_per_axis; ++b)
      for (int c = 0; c < grid_per_axis; ++c)
        for (int d = 0; d < grid_per_axis; ++d) {
          const double vx = axis_value(box.state.lo[2], box.state.hi[2], a);
          const double vy = axis_value(box.state.lo[3], box.state.hi[3], b);
          const double ax = axis_value(box.param.lo[0], box.param.hi[0], c);
          const double ay = axis_value(box.param.lo[1], box.param.hi[1], d);
          J(2, 2) = -2.0 * ax * std::abs(vx);
          J(3, 3) = -2.0 * ay * std::abs(vy);
          const double n = Eigen::JacobiSVD<Eigen::Matrix4d>(Eigen::Matrix4d(J)).singularValues()(0);
          out.state_jacobian_grid_max = std::max(out.state_jacobian_grid_max, n);
        }

  const double vmax = std::max({std::abs(box.state.lo[2]), std::abs(box.state.hi[2]), std::abs(box.state.lo[3]),
                                std::abs(box.state.hi[3])});
  const double amax = box.param.hi.maxCoeff();
  // |[[0,1],[0,-s]]| <= 1 + s for s >= 0.
  out.state_jacobian_interval = 1.0 + 2.0 * amax * vmax;
  out.K = std::max({out.state_jacobian_grid_max, out.state_jacobian_interval, out.control_jacobian});

  const double umax = box.control.lo.cwiseAbs().cwiseMax(box.control.hi.cwiseAbs()).maxCoeff();
  const double wmax = box.disturbance.lo.cwiseAbs().cwiseMax(box.disturbance.hi.cwiseAbs()).maxCoeff();
  const double accel = gravity * umax + amax * vmax * vmax + wmax;
  out.lambda = std::sqrt(2.0 * vmax * vmax + 2.0 * accel * accel);
  return out;
}

// ---------------------------------------------------------------------------
// Success-rate study
// ---------------------------------------------------------------------------

struct StudyRow {
  std::size_t budget = 0;
  std::size_t successes = 0;
  std::size_t runs = 0;
  double rate() const { return runs == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(runs); }
};

/// Success fraction per iteration budget over seeds params.seed + r.
inline std::vector<StudyRow> success_rate_study(const Scenario& sc, const std::vector<std::size_t>& budgets,
                                                std::size_t repeats, WorkerPool& pool) {
  std::vector<StudyRow> rows;
  for (std::size_t budget : budgets) {
    StudyRow row{budget, 0, repeats};
    for (std::size_t r = 0; r < repeats; ++r) {
      PlannerParams p = sc.params;
      p.max_iters = budget;
      p.seed = sc.params.seed + r;
      row.successes += plan(sc, p, pool).status == PlanStatus::Solved;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace robust_rrt
