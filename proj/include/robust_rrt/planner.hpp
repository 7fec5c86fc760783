#pragma once

#include "robust_rrt/core.hpp"
#include "robust_rrt/geometry.hpp"
#include "robust_rrt/parallel.hpp"
#include "robust_rrt/reachability.hpp"
#include "robust_rrt/systems.hpp"
#include "robust_rrt/tree.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace robust_rrt {

struct PlannerParams {
  std::size_t max_iters = 1000;
  double tau_max = 1.0;
  double zeta = 0.0;
  std::size_t particles = 100;
  double epsilon = 0.0;
  double step = 0.1;
  std::uint64_t seed = 0;
  Vec metric_weights;            // empty means unit weights
  bool nominal_rollout = false;  // nominal states from a (theta_hat, w_hat) rollout instead of the mean

  void validate() const {
    if (tau_max <= 0.0) throw Error("tau_max must be positive");
    if (!(step > 0.0) || step > tau_max) throw Error("step must lie in (0, tau_max]");
    if (zeta < 0.0) throw Error("zeta must be nonnegative");
    if (particles == 0) throw Error("particle count must be at least 1");
    if (epsilon < 0.0) throw Error("epsilon must be nonnegative");
  }
};

/// Nominal RRT: one particle with nominal parameters, constraints padded by `padding`.
struct BaselineMode {
  bool enabled = false;
  double padding = 0.0;
};

struct Scenario {
  std::string system;
  Plant plant;
  UncertaintyBounds bounds;
  Box sampling_box;
  std::vector<Obstacle> obstacles;
  GoalRegion goal;
  int initial_mode = 0;
  PlannerParams params;
  BaselineMode baseline;

  double padding() const { return baseline.enabled ? baseline.padding : params.epsilon; }

  void validate() const {
    params.validate();
    const auto n = static_cast<Eigen::Index>(state_dim(plant));
    if (sampling_box.dim() != n) throw Error("sampling box dimension does not match the state dimension");
    if (bounds.control.dim() != control_dim(plant)) throw Error("control box dimension mismatch");
    if (bounds.disturbance.dim() != disturbance_dim(plant)) throw Error("disturbance box dimension mismatch");
    if (bounds.param.dim() != param_dim(plant)) throw Error("parameter box dimension mismatch");
    const Vec c = initial_center(bounds.init);
    if (c.size() != n) throw Error("initial set dimension mismatch");
    for (int k : goal.projection)
      if (k < 0 || k >= n) throw Error("goal projection index out of range");
    if (params.metric_weights.size() != 0 && params.metric_weights.size() != n)
      throw Error("metric weights dimension mismatch");
    if (!bounds.param.contains(nominal_param(plant), 1e-12)) throw Error("nominal parameter lies outside the parameter box");
    if (!bounds.disturbance.contains(nominal_disturbance(plant), 1e-12))
      throw Error("nominal disturbance lies outside the disturbance box");
    if (initial_mode < 0 || initial_mode >= static_cast<int>(mode_labels(plant).size()))
      throw Error("initial mode out of range");
    if (baseline.enabled && baseline.padding < 0.0) throw Error("baseline padding must be nonnegative");
  }
};

struct PlannerStats {
  std::size_t iterations = 0;
  std::size_t nodes_added = 0;
  std::size_t rejected_collision = 0;
  std::size_t rejected_divergence = 0;
  std::size_t rejected_mode_nominal = 0;
  std::size_t rejected_mode_straddle = 0;
  std::size_t skipped_no_modes = 0;
  double wall_time_s = 0.0;
};

enum class PlanStatus { Solved, BudgetExhausted };

struct PlanResult {
  PlanStatus status = PlanStatus::BudgetExhausted;
  std::optional<Plan> plan;
  PlannerStats stats;
  std::optional<DualTree> tree;
  std::optional<std::size_t> goal_node;
};

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Node selection: the nearest nominal state when none lies within zeta of
/// x_s, otherwise a uniform draw among those that do.
inline std::size_t sample_node(const DualTree& tree, const Vec& x_s, double zeta, Stream& rng) {
  const auto [nearest, d] = tree.nearest_nominal(x_s);
  if (d > zeta) return nearest;
  const auto ball = tree.range_nominal(x_s, zeta);
  if (ball.empty()) return nearest;  // only reachable through round-off at d == zeta
  return ball[rng.index(ball.size())];
}

struct ControlSample {
  Vec control;
  double duration = 0.0;
};

inline ControlSample sample_control(const Box& control_box, double tau_max, Stream& rng) {
  ControlSample s;
  s.control = rng.uniform(control_box);
  s.duration = rng.uniform(0.0, tau_max);
  return s;
}

struct HybridControlSample {
  Vec control;
  double duration = 0.0;
  int mode = 0;
};

/// Adds a uniformly drawn target mode from `reachable` to a control sample.
inline std::optional<HybridControlSample> sample_control_hybrid(const Box& control_box, double tau_max,
                                                                const std::vector<int>& reachable, Stream& rng) {
  if (reachable.empty()) return std::nullopt;
  const ControlSample c = sample_control(control_box, tau_max, rng);
  return HybridControlSample{c.control, c.duration, reachable[rng.index(reachable.size())]};
}

/// Nominal rollout of a constant-control segment under (theta_hat, w_hat).
inline std::vector<RolloutState> nominal_rollout(const Plant& plant, const RolloutState& start, const Vec& u,
                                                 double tau, double h, const std::vector<Vec>* reference = nullptr) {
  std::vector<RolloutState> out{start};
  const auto steps = substep_lengths(tau, h);
  std::optional<Vec> mu;
  if (has_feedback(plant)) mu = start.x;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const Vec* ref = nullptr;
    if (reference && k < reference->size()) ref = &(*reference)[k];
    else if (mu) ref = &*mu;
    out.push_back(advance(plant, out.back(), u, ref, nominal_disturbance(plant), nominal_param(plant), steps[k]));
    if (mu) mu = advance_reference(std::get<FeedbackWrapper>(plant), *mu, u, steps[k]);
  }
  return out;
}

/// Modes reachable within tau_max from the nominal state, found by probing
/// nominal rollouts under the corners and centre of the control box.
inline std::vector<int> reachable_modes(const Plant& plant, const Vec& nominal, int mode, const Box& control_box,
                                        double tau_max, double h) {
  std::set<int> modes{mode};
  if (!is_hybrid(plant)) return {mode};
  const auto m = control_box.dim();
  std::vector<Vec> probes{control_box.center()};
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
    Vec u(m);
    for (Eigen::Index i = 0; i < m; ++i) u[i] = (mask >> i) & 1U ? control_box.hi[i] : control_box.lo[i];
    probes.push_back(u);
  }
  for (const auto& u : probes) {
    try {
      for (const auto& s : nominal_rollout(plant, {nominal, mode}, u, tau_max, h)) modes.insert(s.mode);
    } catch (const DivergenceError&) {
    }
  }
  return {modes.begin(), modes.end()};
}

// ---------------------------------------------------------------------------
// Hybrid extension
// ---------------------------------------------------------------------------

enum class ExtensionOutcome { Accepted, Diverged, NominalModeMismatch, ModeStraddle };

struct HybridExtension {
  ExtensionOutcome outcome = ExtensionOutcome::Diverged;
  std::optional<ReachResult> reach;
  std::optional<RolloutState> nominal;
};

/// Extends toward a desired mode: rejects when the nominal rollout or any
/// particle ends in another mode.
inline HybridExtension extend_hybrid(const ParticleSet& from, const Vec& nominal_state, const Vec& u, double tau,
                                     int desired_mode, const Plant& plant, const Box& disturbance, double h,
                                     const ExtensionKey& key, WorkerPool& pool) {
  HybridExtension ext;
  int start_mode = from.mode();
  if (start_mode < 0) start_mode = from.particles.front().mode;
  try {
    ext.nominal = nominal_rollout(plant, {nominal_state, start_mode}, u, tau, h).back();
  } catch (const DivergenceError&) {
    ext.outcome = ExtensionOutcome::Diverged;
    return ext;
  }
  if (ext.nominal->mode != desired_mode) {
    ext.outcome = ExtensionOutcome::NominalModeMismatch;
    return ext;
  }
  ext.reach = compute_reach_set(from, u, tau, plant, disturbance, h, key, pool);
  if (!ext.reach) {
    ext.outcome = ExtensionOutcome::Diverged;
    return ext;
  }
  for (const auto& p : ext.reach->set.particles) {
    if (p.mode != desired_mode) {
      ext.outcome = ExtensionOutcome::ModeStraddle;
      ext.reach.reset();
      return ext;
    }
  }
  ext.outcome = ExtensionOutcome::Accepted;
  return ext;
}

// ---------------------------------------------------------------------------
// Main loop
// ---------------------------------------------------------------------------

/// Root particle set for a scenario (RandUP particles, or the single nominal
/// particle in baseline mode).
inline ParticleSet root_particles(const Scenario& sc, const PlannerParams& params) {
  if (sc.baseline.enabled) return nominal_particles(sc.plant, sc.bounds, sc.initial_mode, sc.baseline.padding);
  return init_particles(sc.plant, sc.bounds, params.particles, params.seed, sc.initial_mode, params.epsilon);
}

/// Robust-RRT over particle reachable sets.
inline PlanResult plan(const Scenario& sc, const PlannerParams& params, WorkerPool& pool) {
  Scenario checked = sc;
  checked.params = params;
  checked.validate();
  const auto start = std::chrono::steady_clock::now();
  const double pad = sc.baseline.enabled ? sc.baseline.padding : params.epsilon;
  const auto& projection = collision_projection(sc.plant);
  const bool hybrid = is_hybrid(sc.plant);

  PlanResult result;
  ParticleSet root = root_particles(sc, params);
  std::optional<Vec> root_nominal;
  if (params.nominal_rollout) root_nominal = initial_center(sc.bounds.init);
  result.tree.emplace(std::move(root), params.metric_weights, root_nominal);
  DualTree& tree = *result.tree;
  std::vector<std::optional<std::vector<int>>> modes_cache(1);

  auto finish = [&](PlanStatus status) {
    result.status = status;
    result.stats.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return std::move(result);
  };

  if (padded_goal_contained(tree.node(0).reach_set, sc.goal, pad)) {
    result.plan = Plan{params.seed, {}};
    result.goal_node = 0;
    return finish(PlanStatus::Solved);
  }

  Stream rng(params.seed, StreamDomain::Planner);
  for (std::size_t it = 0; it < params.max_iters; ++it) {
    ++result.stats.iterations;
    const Vec x_s = rng.uniform(sc.sampling_box);
    const std::size_t parent = sample_node(tree, x_s, params.zeta, rng);
    const Node& from = tree.node(parent);
    const ExtensionKey key{params.seed, it};

    Vec u;
    double tau = 0.0;
    std::optional<ReachResult> reach;
    std::optional<int> edge_mode;
    std::optional<Vec> nominal_new;

    if (hybrid) {
      auto& cached = modes_cache[parent];
      if (!cached) {
        int mode = from.reach_set.mode();
        cached = mode < 0 ? std::vector<int>{}
                          : reachable_modes(sc.plant, from.nominal, mode, sc.bounds.control, params.tau_max,
                                            params.step);
      }
      const auto sample = sample_control_hybrid(sc.bounds.control, params.tau_max, *cached, rng);
      if (!sample) {
        ++result.stats.skipped_no_modes;
        continue;
      }
      u = sample->control;
      tau = sample->duration;
      edge_mode = sample->mode;
      auto ext = extend_hybrid(from.reach_set, from.nominal, u, tau, sample->mode, sc.plant, sc.bounds.disturbance,
                               params.step, key, pool);
      switch (ext.outcome) {
        case ExtensionOutcome::Diverged: ++result.stats.rejected_divergence; continue;
        case ExtensionOutcome::NominalModeMismatch: ++result.stats.rejected_mode_nominal; continue;
        case ExtensionOutcome::ModeStraddle: ++result.stats.rejected_mode_straddle; continue;
        case ExtensionOutcome::Accepted: break;
      }
      reach = std::move(ext.reach);
      if (params.nominal_rollout) nominal_new = ext.nominal->x;
    } else {
      const auto sample = sample_control(sc.bounds.control, params.tau_max, rng);
      u = sample.control;
      tau = sample.duration;
      reach = compute_reach_set(from.reach_set, u, tau, sc.plant, sc.bounds.disturbance, params.step, key, pool);
      if (!reach) {
        ++result.stats.rejected_divergence;
        continue;
      }
      if (params.nominal_rollout) {
        try {
          const RolloutState s{from.nominal, std::max(0, from.reach_set.mode())};
          nominal_new = nominal_rollout(sc.plant, s, u, tau, params.step, &reach->reference_trace).back().x;
        } catch (const DivergenceError&) {
          ++result.stats.rejected_divergence;
          continue;
        }
      }
    }

    if (!padded_collision_free(reach->traces, projection, sc.obstacles, pad)) {
      ++result.stats.rejected_collision;
      continue;
    }

    const std::size_t id = tree.add_node(parent, std::move(reach->set), Edge{u, tau, edge_mode, it}, nominal_new);
    modes_cache.emplace_back();
    ++result.stats.nodes_added;

    if (padded_goal_contained(tree.node(id).reach_set, sc.goal, pad)) {
      result.plan = build_path(tree, id, params.seed);
      result.goal_node = id;
      return finish(PlanStatus::Solved);
    }
  }
  return finish(PlanStatus::BudgetExhausted);
}

inline PlanResult plan(const Scenario& sc, WorkerPool& pool) { return plan(sc, sc.params, pool); }

}  // namespace robust_rrt
