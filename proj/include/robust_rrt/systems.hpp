#pragma once

#include "robust_rrt/core.hpp"
#include "robust_rrt/geometry.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace robust_rrt {

// ---------------------------------------------------------------------------
// Model descriptions
// ---------------------------------------------------------------------------

using VectorField = std::function<Vec(const Vec& x, const Vec& u, const Vec& w, const Vec& theta)>;
using DiscreteMap =
    std::function<Vec(const Vec& x, const Vec& u, const Vec& w, const Vec& theta, double h)>;

enum class Integration { ExactDiscrete, Euler, RK4 };

/// Smooth uncertain system x' = f_theta(x, u, w). Immutable after construction.
struct SystemModel {
  std::string name;
  int state_dim = 0;
  int control_dim = 0;
  int disturbance_dim = 0;
  int param_dim = 0;
  Integration integration = Integration::RK4;
  double step_size = 0.1;
  VectorField vector_field;   // Euler / RK4
  DiscreteMap discrete_map;   // ExactDiscrete
  Vec nominal_param;
  Vec nominal_disturbance;
  std::vector<int> collision_projection;
  std::optional<double> lipschitz_K;
};

/// Linear tracking feedback u = clamp(nu + gain (x - mu)) around a nominal
/// trajectory mu driven by the open-loop input nu under nominal parameters.
struct FeedbackWrapper {
  SystemModel base;
  Mat gain;  // control_dim x state_dim
  Box control_box;
};

/// Hybrid system: per-mode discrete flows, a guard checked at the post-flow
/// state and a reset applied when the guard holds.
struct HybridSystemModel {
  using Guard = std::function<bool(const Vec& x, const Vec& u, const Vec& w, const Vec& theta, int mode)>;
  using Reset = std::function<std::pair<int, Vec>(const Vec& x, const Vec& u, const Vec& w,
                                                  const Vec& theta, int mode)>;

  std::string name;
  int state_dim = 0;
  int control_dim = 0;
  int disturbance_dim = 0;
  int param_dim = 0;
  double step_size = 0.1;
  std::vector<std::string> modes;
  std::vector<DiscreteMap> flows;
  Guard guard;
  Reset reset;
  Vec nominal_param;
  Vec nominal_disturbance;
  std::vector<int> collision_projection;

  int mode_index(const std::string& label) const {
    for (std::size_t i = 0; i < modes.size(); ++i)
      if (modes[i] == label) return static_cast<int>(i);
    throw Error("unknown mode '" + label + "' for system " + name);
  }
};

using Plant = std::variant<SystemModel, FeedbackWrapper, HybridSystemModel>;

inline const std::string& plant_name(const Plant& p) {
  return std::visit(
      [](const auto& s) -> const std::string& {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, FeedbackWrapper>)
          return s.base.name;
        else
          return s.name;
      },
      p);
}

namespace detail {
template <class Fn>
decltype(auto) with_base(const Plant& p, Fn&& fn) {
  return std::visit(
      [&](const auto& s) -> decltype(auto) {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, FeedbackWrapper>)
          return fn(s.base);
        else
          return fn(s);
      },
      p);
}
}  // namespace detail

inline int state_dim(const Plant& p) { return detail::with_base(p, [](const auto& s) { return s.state_dim; }); }
inline int control_dim(const Plant& p) { return detail::with_base(p, [](const auto& s) { return s.control_dim; }); }
inline int disturbance_dim(const Plant& p) {
  return detail::with_base(p, [](const auto& s) { return s.disturbance_dim; });
}
inline int param_dim(const Plant& p) { return detail::with_base(p, [](const auto& s) { return s.param_dim; }); }
inline double step_size(const Plant& p) { return detail::with_base(p, [](const auto& s) { return s.step_size; }); }
inline const Vec& nominal_param(const Plant& p) {
  return detail::with_base(p, [](const auto& s) -> const Vec& { return s.nominal_param; });
}
inline const Vec& nominal_disturbance(const Plant& p) {
  return detail::with_base(p, [](const auto& s) -> const Vec& { return s.nominal_disturbance; });
}
inline const std::vector<int>& collision_projection(const Plant& p) {
  return detail::with_base(p, [](const auto& s) -> const std::vector<int>& { return s.collision_projection; });
}
inline bool is_hybrid(const Plant& p) { return std::holds_alternative<HybridSystemModel>(p); }
inline bool has_feedback(const Plant& p) { return std::holds_alternative<FeedbackWrapper>(p); }

inline std::vector<std::string> mode_labels(const Plant& p) {
  if (const auto* h = std::get_if<HybridSystemModel>(&p)) return h->modes;
  return {"default"};
}

/// Bounded uncertainty description: U, W, Theta and the initial set X_0.
struct BallSet {
  Vec center;
  double radius;
};
using InitialSet = std::variant<Box, BallSet>;

struct UncertaintyBounds {
  Box control;
  Box disturbance;
  Box param;
  InitialSet init;
};

inline Vec initial_center(const InitialSet& s) {
  if (const auto* b = std::get_if<Box>(&s)) return b->center();
  return std::get<BallSet>(s).center;
}

inline Vec sample_initial(const InitialSet& s, Stream& rng) {
  if (const auto* b = std::get_if<Box>(&s)) return rng.uniform(*b);
  const auto& ball = std::get<BallSet>(s);
  if (ball.radius == 0.0) return ball.center;
  const Box bbox(ball.center.array() - ball.radius, ball.center.array() + ball.radius);
  for (;;) {
    Vec x = rng.uniform(bbox);
    if ((x - ball.center).norm() <= ball.radius) return x;
  }
}

// ---------------------------------------------------------------------------
// Integration
// ---------------------------------------------------------------------------

inline Vec checked(Vec x) {
  if (!x.allFinite()) throw DivergenceError();
  return x;
}

/// One sub-step of length h under the model's integration scheme.
inline Vec step(const SystemModel& sys, const Vec& x, const Vec& u, const Vec& w, const Vec& theta,
                double h) {
  if (!(h > 0.0)) throw Error("step length must be positive");
  switch (sys.integration) {
    case Integration::ExactDiscrete:
      return checked(sys.discrete_map(x, u, w, theta, h));
    case Integration::Euler:
      return checked(x + h * sys.vector_field(x, u, w, theta));
    case Integration::RK4: {
      const auto& f = sys.vector_field;
      const Vec k1 = f(x, u, w, theta);
      const Vec k2 = f(x + 0.5 * h * k1, u, w, theta);
      const Vec k3 = f(x + 0.5 * h * k2, u, w, theta);
      const Vec k4 = f(x + h * k3, u, w, theta);
      return checked(x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    }
  }
  throw Error("unknown integration scheme");
}

/// Sub-step lengths covering a duration: full steps of h, then one partial
/// step for the remainder.
inline std::vector<double> substep_lengths(double tau, double h) {
  if (tau < 0.0) throw Error("duration must be nonnegative");
  if (!(h > 0.0)) throw Error("step length must be positive");
  const double ratio = tau / h;
  auto full = static_cast<std::size_t>(std::floor(ratio));
  if (ratio - static_cast<double>(full) > 1.0 - 1e-9) ++full;  // absorb round-off
  std::vector<double> out(full, h);
  const double rest = tau - static_cast<double>(full) * h;
  if (rest > 1e-12 * std::max(1.0, tau)) out.push_back(rest);
  return out;
}

/// States at every sub-step boundary of a constant-control segment.
/// `next_disturbance` is called once per sub-step.
template <class DisturbanceSource>
std::vector<Vec> rollout(const SystemModel& sys, const Vec& x0, const Vec& u, double tau,
                         const Vec& theta, DisturbanceSource&& next_disturbance, double h) {
  std::vector<Vec> trace{x0};
  for (double dt : substep_lengths(tau, h)) {
    const Vec w = next_disturbance();
    trace.push_back(step(sys, trace.back(), u, w, theta, dt));
  }
  return trace;
}

inline Vec feedback_control(const FeedbackWrapper& fb, const Vec& x, const Vec& mu, const Vec& nu) {
  return fb.control_box.clamp(nu + fb.gain * (x - mu));
}

struct HybridState {
  Vec x;
  int mode = 0;
};

inline HybridState hybrid_step(const HybridSystemModel& sys, const Vec& x, int mode, const Vec& u,
                               const Vec& w, const Vec& theta, double h) {
  if (mode < 0 || mode >= static_cast<int>(sys.modes.size()))
    throw Error("hybrid step: unknown mode " + std::to_string(mode));
  if (!(h > 0.0)) throw Error("step length must be positive");
  Vec next = checked(sys.flows[static_cast<std::size_t>(mode)](x, u, w, theta, h));
  if (sys.guard && sys.guard(next, u, w, theta, mode)) {
    auto [m, xr] = sys.reset(next, u, w, theta, mode);
    if (m < 0 || m >= static_cast<int>(sys.modes.size()))
      throw Error("hybrid reset produced unknown mode " + std::to_string(m));
    return {checked(std::move(xr)), m};
  }
  return {std::move(next), mode};
}

// ---------------------------------------------------------------------------
// Plant-level advance used by propagation and validation
// ---------------------------------------------------------------------------

/// Per-rollout mutable state: the physical state, its mode and (for feedback
/// plants) the tracked nominal state mu.
struct RolloutState {
  Vec x;
  int mode = 0;
};

/// Advances one sub-step. `reference` is mu at the start of the sub-step for
/// feedback plants and ignored otherwise.
inline RolloutState advance(const Plant& plant, const RolloutState& s, const Vec& nu,
                            const Vec* reference, const Vec& w, const Vec& theta, double h) {
  if (const auto* sm = std::get_if<SystemModel>(&plant)) return {step(*sm, s.x, nu, w, theta, h), s.mode};
  if (const auto* fb = std::get_if<FeedbackWrapper>(&plant)) {
    const Vec u = reference ? feedback_control(*fb, s.x, *reference, nu) : fb->control_box.clamp(nu);
    return {step(fb->base, s.x, u, w, theta, h), s.mode};
  }
  const auto& hy = std::get<HybridSystemModel>(plant);
  auto r = hybrid_step(hy, s.x, s.mode, nu, w, theta, h);
  return {std::move(r.x), r.mode};
}

/// Advances the feedback reference mu under nominal parameters and open-loop nu.
inline Vec advance_reference(const FeedbackWrapper& fb, const Vec& mu, const Vec& nu, double h) {
  return step(fb.base, mu, nu, fb.base.nominal_disturbance, fb.base.nominal_param, h);
}

// ---------------------------------------------------------------------------
// Benchmarks
// ---------------------------------------------------------------------------

/// Infinite-horizon discrete LQR gain (u = -K x) by Riccati iteration.
inline Mat dlqr(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, int max_iter = 100000,
                double tol = 1e-13) {
  Mat P = Q;
  for (int i = 0; i < max_iter; ++i) {
    const Mat BtP = B.transpose() * P;
    const Mat K = (R + BtP * B).ldlt().solve(BtP * A);
    const Mat next = Q + A.transpose() * P * A - A.transpose() * P * B * K;
    const double delta = (next - P).cwiseAbs().maxCoeff();
    P = next;
    if (delta < tol * std::max(1.0, P.cwiseAbs().maxCoeff())) break;
  }
  const Mat BtP = B.transpose() * P;
  return (R + BtP * B).ldlt().solve(BtP * A);
}

using ParamOverrides = std::map<std::string, double>;

namespace detail {
inline double take(ParamOverrides& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  if (it == p.end()) return fallback;
  const double v = it->second;
  p.erase(it);
  return v;
}
inline void reject_leftovers(const ParamOverrides& p, const std::string& sys) {
  if (!p.empty()) throw Error("unknown parameter '" + p.begin()->first + "' for system " + sys);
}
}  // namespace detail

/// Quadrotor constants: Euler half-step discretization of the planar
/// double integrator with quadratic drag.
struct QuadrotorConstants {
  double dt = 0.1;
  double gravity = 9.81;
};

/// Continuous-time linear part (A, B) of the planar quadrotor.
inline std::pair<Mat, Mat> quadrotor_linear_part(double gravity) {
  Mat A = Mat::Zero(4, 4);
  A(0, 2) = 1.0;
  A(1, 3) = 1.0;
  Mat B = Mat::Zero(4, 2);
  B(2, 0) = gravity;
  B(3, 1) = -gravity;
  return {A, B};
}

/// Discrete map over h: (I + A h/2)^2 x + (h I + A (h/2)^2) B u + h d(x) + h [0; w].
inline SystemModel quadrotor_model(const QuadrotorConstants& c) {
  SystemModel s;
  s.name = "quadrotor";
  s.state_dim = 4;
  s.control_dim = 2;
  s.disturbance_dim = 2;
  s.param_dim = 2;
  s.integration = Integration::ExactDiscrete;
  s.step_size = c.dt;
  const auto [A, B] = quadrotor_linear_part(c.gravity);
  s.vector_field = [A, B](const Vec& x, const Vec& u, const Vec& w, const Vec& alpha) {
    Vec dx = A * x + B * u;
    dx[2] += -alpha[0] * x[2] * std::abs(x[2]) + w[0];
    dx[3] += -alpha[1] * x[3] * std::abs(x[3]) + w[1];
    return dx;
  };
  s.discrete_map = [A, B](const Vec& x, const Vec& u, const Vec& w, const Vec& alpha, double h) {
    const Mat I = Mat::Identity(4, 4);
    const Mat half = I + A * (0.5 * h);
    Vec drag = Vec::Zero(4);
    drag[2] = -alpha[0] * x[2] * std::abs(x[2]) + w[0];
    drag[3] = -alpha[1] * x[3] * std::abs(x[3]) + w[1];
    return Vec(half * half * x + (h * I + A * (0.25 * h * h)) * B * u + h * drag);
  };
  s.nominal_param = Vec::Constant(2, 0.5);
  s.nominal_disturbance = Vec::Zero(2);
  s.collision_projection = {0, 1};
  return s;
}

/// Tracking gain for the quadrotor: discrete LQR on the drag-free
/// discretization with Q = I, R = 0.1 I, returned as u = nu + K (x - mu).
inline Mat quadrotor_feedback_gain(const QuadrotorConstants& c) {
  const auto [A, B] = quadrotor_linear_part(c.gravity);
  const Mat I = Mat::Identity(4, 4);
  const Mat half = I + A * (0.5 * c.dt);
  const Mat Ad = half * half;
  const Mat Bd = (c.dt * I + A * (0.25 * c.dt * c.dt)) * B;
  return -dlqr(Ad, Bd, Mat::Identity(4, 4), 0.1 * Mat::Identity(2, 2));
}

/// Jumping robot. State [x, xdot, y, ydot, c] where c is the time spent in
/// contact with a jump command held. Control [x_ref, v_jump]: a PD law drives
/// x toward x_ref, and v_jump >= jump_threshold commands a take-off at speed
/// v_jump. Params [m, l]: mass divides the control acceleration, floor(l) in
/// {0,1,2} is the take-off latency in base steps.
struct JumperConstants {
  double dt = 0.03;
  double gravity = 9.81;
  double kp = 9.0;
  double kd = 6.0;
  double jump_threshold = 1.0;
};

inline constexpr int kContact = 0;
inline constexpr int kFlight = 1;

inline int jumper_latency_steps(double l) { return std::clamp(static_cast<int>(std::floor(l)), 0, 2); }

inline HybridSystemModel jumper_model(const JumperConstants& c) {
  HybridSystemModel s;
  s.name = "jumper";
  s.state_dim = 5;
  s.control_dim = 2;
  s.disturbance_dim = 1;
  s.param_dim = 2;
  s.step_size = c.dt;
  s.modes = {"contact", "flight"};
  s.collision_projection = {0, 2};
  s.nominal_param = (Vec(2) << 1.0, 1.5).finished();
  s.nominal_disturbance = Vec::Zero(1);

  auto horizontal = [c](const Vec& x, const Vec& u, const Vec& w, double m, double h, Vec& out) {
    const double accel = (c.kp * (u[0] - x[0]) - c.kd * x[1]) / m + w[0];
    out[0] = x[0] + x[1] * h;
    out[1] = x[1] + accel * h;
  };
  const DiscreteMap contact = [c, horizontal](const Vec& x, const Vec& u, const Vec& w,
                                              const Vec& theta, double h) {
    Vec out(5);
    horizontal(x, u, w, theta[0], h, out);
    out[2] = x[2];
    out[3] = 0.0;
    out[4] = u[1] >= c.jump_threshold ? x[4] + h : 0.0;
    return out;
  };
  const DiscreteMap flight = [c, horizontal](const Vec& x, const Vec& u, const Vec& w,
                                             const Vec& theta, double h) {
    Vec out(5);
    horizontal(x, u, w, theta[0], h, out);
    out[2] = x[2] + x[3] * h;
    out[3] = x[3] - c.gravity * h;
    out[4] = 0.0;
    return out;
  };
  s.flows = {contact, flight};
  s.guard = [c](const Vec& x, const Vec& u, const Vec&, const Vec& theta, int mode) {
    if (mode == kContact) {
      if (u[1] < c.jump_threshold) return false;
      const int k = jumper_latency_steps(theta[1]);
      return x[4] >= (k + 1) * c.dt - 1e-9;
    }
    return x[2] <= 0.0 && x[3] < 0.0;
  };
  s.reset = [](const Vec& x, const Vec& u, const Vec&, const Vec&, int mode) {
    Vec out = x;
    if (mode == kContact) {
      out[3] = u[1];
      out[4] = 0.0;
      return std::pair<int, Vec>{kFlight, out};
    }
    out[2] = 0.0;
    out[3] = 0.0;
    out[4] = 0.0;
    return std::pair<int, Vec>{kContact, out};
  };
  return s;
}

/// x' = theta + w on the real line; the reachable set is an interval.
inline SystemModel linear1d_model(double step = 0.1) {
  SystemModel s;
  s.name = "linear1d";
  s.state_dim = 1;
  s.control_dim = 1;
  s.disturbance_dim = 1;
  s.param_dim = 1;
  s.integration = Integration::RK4;
  s.step_size = step;
  s.vector_field = [](const Vec&, const Vec&, const Vec& w, const Vec& theta) {
    return Vec::Constant(1, theta[0] + w[0]);
  };
  s.nominal_param = Vec::Constant(1, 0.5);
  s.nominal_disturbance = Vec::Zero(1);
  s.collision_projection = {0};
  s.lipschitz_K = 0.0;
  return s;
}

struct Benchmark {
  Plant plant;
  UncertaintyBounds bounds;
  std::optional<GoalRegion> goal;
  std::string initial_mode;
};

/// Fully parameterized benchmark. `overrides` may set the named constants of
/// each system (dt, gravity, ...); unknown keys are an error.
inline Benchmark make_benchmark(const std::string& name, ParamOverrides overrides = {}) {
  if (name == "linear1d") {
    const double step = detail::take(overrides, "dt", 0.1);
    detail::reject_leftovers(overrides, name);
    Benchmark b{linear1d_model(step),
                {Box(Vec::Constant(1, -1.0), Vec::Constant(1, 1.0)), Box::zeros(1),
                 Box(Vec::Constant(1, 0.35), Vec::Constant(1, 0.65)), Box::zeros(1)},
                std::nullopt,
                "default"};
    return b;
  }
  if (name == "quadrotor") {
    QuadrotorConstants c;
    c.dt = detail::take(overrides, "dt", c.dt);
    c.gravity = detail::take(overrides, "gravity", c.gravity);
    const double umax = detail::take(overrides, "control_limit", 0.5);
    detail::reject_leftovers(overrides, name);
    const Box control(Vec::Constant(2, -umax), Vec::Constant(2, umax));
    FeedbackWrapper fb{quadrotor_model(c), quadrotor_feedback_gain(c), control};
    return {fb,
            {control, Box::zeros(2), Box(Vec::Constant(2, 0.35), Vec::Constant(2, 0.65)), Box::zeros(4)},
            make_goal({0, 1}, (Vec(2) << 10.0, 0.0).finished(), 0.7),
            "default"};
  }
  if (name == "jumper") {
    JumperConstants c;
    c.dt = detail::take(overrides, "dt", c.dt);
    c.gravity = detail::take(overrides, "gravity", c.gravity);
    c.kp = detail::take(overrides, "kp", c.kp);
    c.kd = detail::take(overrides, "kd", c.kd);
    c.jump_threshold = detail::take(overrides, "jump_threshold", c.jump_threshold);
    detail::reject_leftovers(overrides, name);
    return {jumper_model(c),
            {Box((Vec(2) << -0.5, 0.0).finished(), (Vec(2) << 3.5, 4.0).finished()), Box::zeros(1),
             Box((Vec(2) << 0.8, 0.0).finished(), (Vec(2) << 1.2, 3.0).finished()), Box::zeros(5)},
            make_goal({0, 2}, (Vec(2) << 2.5, 0.0).finished(), 0.25),
            "contact"};
  }
  throw Error("unknown system '" + name + "'");
}

}  // namespace robust_rrt
