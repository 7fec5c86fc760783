#include "robust_rrt/io.hpp"
#include "robust_rrt/planner.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace robust_rrt;

namespace {

Vec V(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Box B1(double lo, double hi) { return Box(V({lo}), V({hi})); }

ParticleSet point_set(const Vec& x) {
  ParticleSet s;
  s.particles.push_back({x, Vec::Zero(1), 0, 0});
  refresh(s, std::vector<int>{0, 1});
  return s;
}

Scenario line_scenario(double goal_center, double goal_radius, std::size_t iters) {
  Scenario sc;
  sc.system = "linear1d";
  sc.plant = linear1d_model();
  sc.bounds = {B1(-1, 1), Box::zeros(1), B1(0.35, 0.65), B1(-0.1, 0.1)};
  sc.sampling_box = B1(-2, 12);
  sc.goal = make_goal({0}, V({goal_center}), goal_radius);
  sc.params.max_iters = iters;
  sc.params.tau_max = 2.0;
  sc.params.particles = 50;
  sc.params.epsilon = 0.05;
  return sc;
}

ParticleSet jumper_set(const std::vector<double>& latencies) {
  ParticleSet s;
  for (std::size_t i = 0; i < latencies.size(); ++i)
    s.particles.push_back({Vec::Zero(5), V({1.0, latencies[i]}), kContact, i});
  refresh(s, std::vector<int>{0, 2});
  return s;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(SampleNode, SingleNodeTree) {
  const DualTree tree(point_set(V({0, 0})));
  Stream rng(0, StreamDomain::Study);
  for (double zeta : {0.0, 1.0, 1e6})
    EXPECT_EQ(sample_node(tree, V({rng.uniform(-50, 50), rng.uniform(-50, 50)}), zeta, rng), 0u);
}

TEST(SampleNode, ZeroZetaIsNearest) {
  DualTree tree(point_set(V({0, 0})));
  Stream rng(1, StreamDomain::Study);
  const Box box(Vec::Constant(2, -10), Vec::Constant(2, 10));
  for (int i = 0; i < 300; ++i) tree.add_node(0, point_set(rng.uniform(box)), Edge{V({0}), 1.0, {}, 0});
  for (int k = 0; k < 1000; ++k) {
    const Vec q = rng.uniform(box);
    EXPECT_EQ(sample_node(tree, q, 0.0, rng), tree.nearest_nominal(q).first);
  }
}

TEST(SampleNode, TieBreakIsUniform) {
  DualTree tree(point_set(V({0, 0})));
  for (int i = 1; i < 10; ++i)
    tree.add_node(0, point_set(V({std::cos(i), std::sin(i)})), Edge{V({0}), 1.0, {}, 0});
  Stream rng(2, StreamDomain::Study);
  std::vector<std::size_t> counts(10, 0);
  for (int k = 0; k < 10000; ++k) ++counts[sample_node(tree, V({0.1, -0.2}), 5.0, rng)];
  EXPECT_LT(rrt_test::chi_square_uniform(counts), rrt_test::chi_square_critical(0.01, 9));
}

TEST(SampleNode, SelectionProbabilityLowerBound) {
  // Each node is picked with probability at least vol(B_zeta(x_i) & X) / vol(X) / k.
  const Box X(Vec::Constant(2, 0.0), Vec::Constant(2, 10.0));
  const std::vector<Vec> nominal{V({5, 5}), V({5.5, 5}), V({0.2, 0.2}), V({9, 1}), V({5, 5.3})};
  DualTree tree(point_set(nominal[0]));
  for (std::size_t i = 1; i < nominal.size(); ++i) tree.add_node(0, point_set(nominal[i]), Edge{V({0}), 1.0, {}, 0});
  const double zeta = 1.0;
  const std::size_t draws = 100000;
  Stream rng(3, StreamDomain::Study);
  std::vector<std::size_t> hits(nominal.size(), 0);
  for (std::size_t k = 0; k < draws; ++k) ++hits[sample_node(tree, rng.uniform(X), zeta, rng)];

  Stream mc(4, StreamDomain::Study);
  for (std::size_t i = 0; i < nominal.size(); ++i) {
    // Area of the ball clipped to X by Monte Carlo on its bounding square.
    std::size_t inside = 0;
    const std::size_t m = 200000;
    for (std::size_t s = 0; s < m; ++s) {
      const Vec p = nominal[i] + V({mc.uniform(-zeta, zeta), mc.uniform(-zeta, zeta)});
      inside += (p - nominal[i]).norm() <= zeta && X.contains(p);
    }
    const double area = 4.0 * zeta * zeta * static_cast<double>(inside) / static_cast<double>(m);
    const double bound = area / X.volume() / static_cast<double>(nominal.size());
    const double p_hat = static_cast<double>(hits[i]) / static_cast<double>(draws);
    const double se = std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(draws));
    EXPECT_GE(p_hat, bound - 3.0 * se) << "node " << i;
  }
}

TEST(SampleControl, DegenerateBox) {
  Stream rng(5, StreamDomain::Study);
  const Box u0 = Box::point(V({0.3, -0.7}));
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_control(u0, 1.0, rng).control, V({0.3, -0.7}));
}

TEST(SampleControl, UniformIndependentMarginals) {
  Stream rng(6, StreamDomain::Study);
  const Box U(V({-1, 0}), V({1, 4}));
  std::vector<double> u0, u1, tau;
  for (int i = 0; i < 10000; ++i) {
    const auto s = sample_control(U, 2.5, rng);
    u0.push_back(s.control[0]);
    u1.push_back(s.control[1]);
    tau.push_back(s.duration);
  }
  EXPECT_GT(rrt_test::ks_uniform_pvalue(u0, -1, 1), 0.01);
  EXPECT_GT(rrt_test::ks_uniform_pvalue(u1, 0, 4), 0.01);
  EXPECT_GT(rrt_test::ks_uniform_pvalue(tau, 0, 2.5), 0.01);
  EXPECT_LT(std::abs(pearson(u0, tau)), 0.02);
  EXPECT_LT(std::abs(pearson(u0, u1)), 0.02);
}

TEST(HybridSampling, BothModesEquallyLikely) {
  const auto j = make_benchmark("jumper");
  const auto modes = reachable_modes(j.plant, Vec::Zero(5), kContact, j.bounds.control, 0.21, 0.03);
  ASSERT_EQ(modes, (std::vector<int>{kContact, kFlight}));
  Stream rng(7, StreamDomain::Study);
  std::vector<std::size_t> counts(2, 0);
  for (int i = 0; i < 10000; ++i) ++counts[static_cast<std::size_t>(sample_control_hybrid(j.bounds.control, 0.21, modes, rng)->mode)];
  EXPECT_LT(rrt_test::chi_square_uniform(counts), rrt_test::chi_square_critical(0.01, 1));
}

TEST(HybridSampling, HighFlightCannotLand) {
  const auto j = make_benchmark("jumper");
  EXPECT_EQ(reachable_modes(j.plant, V({0, 0, 5.0, 3.0, 0}), kFlight, j.bounds.control, 0.21, 0.03),
            std::vector<int>{kFlight});
  EXPECT_EQ(reachable_modes(j.plant, V({0, 0, 0.05, -2.0, 0}), kFlight, j.bounds.control, 0.21, 0.03),
            (std::vector<int>{kContact, kFlight}));
}

TEST(HybridSampling, SingletonAndEmptyModeSets) {
  const auto j = make_benchmark("jumper");
  Stream rng(8, StreamDomain::Study);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_control_hybrid(j.bounds.control, 0.21, {kFlight}, rng)->mode, kFlight);
  EXPECT_FALSE(sample_control_hybrid(j.bounds.control, 0.21, {}, rng));
}

TEST(ExtendHybrid, CleanTakeOffIsAccepted) {
  const auto j = make_benchmark("jumper");
  WorkerPool pool;
  const auto ext = extend_hybrid(jumper_set({0.2, 0.7, 1.1, 1.9}), Vec::Zero(5), V({0, 2}), 0.09, kFlight, j.plant,
                                 j.bounds.disturbance, 0.03, {0, 0}, pool);
  EXPECT_EQ(ext.outcome, ExtensionOutcome::Accepted);
  ASSERT_TRUE(ext.reach);
  EXPECT_EQ(ext.reach->set.mode(), kFlight);
}

TEST(ExtendHybrid, StraddlingSetIsRejected) {
  const auto j = make_benchmark("jumper");
  WorkerPool pool;
  const auto ext = extend_hybrid(jumper_set({0.5, 2.5}), Vec::Zero(5), V({0, 2}), 0.06, kFlight, j.plant,
                                 j.bounds.disturbance, 0.03, {0, 0}, pool);
  EXPECT_EQ(ext.outcome, ExtensionOutcome::ModeStraddle);
  EXPECT_FALSE(ext.reach);
}

TEST(ExtendHybrid, NominalModeMismatchIsRejected) {
  const auto j = make_benchmark("jumper");
  WorkerPool pool;
  const auto ext = extend_hybrid(jumper_set({0.5, 1.5}), Vec::Zero(5), V({0, 2}), 0.09, kContact, j.plant,
                                 j.bounds.disturbance, 0.03, {0, 0}, pool);
  EXPECT_EQ(ext.outcome, ExtensionOutcome::NominalModeMismatch);
}

TEST(Plan, StartInsideGoalSolvesImmediately) {
  WorkerPool pool;
  const Scenario sc = line_scenario(0.0, 1.0, 10);
  const auto r = plan(sc, pool);
  EXPECT_EQ(r.status, PlanStatus::Solved);
  ASSERT_TRUE(r.plan);
  EXPECT_TRUE(r.plan->steps.empty());
  EXPECT_EQ(r.stats.iterations, 0u);
}

TEST(Plan, BlockedGoalExhaustsBudget) {
  WorkerPool pool;
  Scenario sc = line_scenario(5.0, 1.0, 200);
  sc.obstacles.push_back(make_box(V({2.5, -1}), V({3.5, 1})));
  const auto r = plan(sc, pool);
  EXPECT_EQ(r.status, PlanStatus::BudgetExhausted);
  EXPECT_FALSE(r.plan);
  EXPECT_EQ(r.stats.iterations, 200u);
  EXPECT_LE(r.stats.nodes_added, r.stats.iterations);
  EXPECT_EQ(r.tree->size(), r.stats.nodes_added + 1);
  for (const auto& n : r.tree->nodes())
    for (const auto& p : n.reach_set.particles) EXPECT_LT(p.state[0], 2.5 - sc.params.epsilon);
}

TEST(Plan, OneDimensionalDriftIsSolved) {
  WorkerPool pool;
  const Scenario sc = line_scenario(5.0, 1.5, 2000);
  const auto r = plan(sc, pool);
  ASSERT_EQ(r.status, PlanStatus::Solved);
  const auto& goal_set = r.tree->node(*r.goal_node).reach_set;
  EXPECT_TRUE(padded_goal_contained(goal_set, sc.goal, sc.params.epsilon));
  EXPECT_DOUBLE_EQ(r.plan->duration(), goal_set.time);
}

TEST(Plan, MalformedScenarioThrowsBeforePlanning) {
  WorkerPool pool;
  Scenario sc = line_scenario(5.0, 1.5, 10);
  sc.params.tau_max = -1.0;
  EXPECT_THROW(plan(sc, pool), Error);
  sc = line_scenario(5.0, 1.5, 10);
  sc.sampling_box = Box::zeros(2);
  EXPECT_THROW(plan(sc, pool), Error);
}

TEST(Plan, ReplayedPlanPassesThePaddedChecks) {
  WorkerPool pool;
  Scenario sc = load_scenario(std::string(RRRT_SCENARIO_DIR) + "/corridor.json");
  const auto r = plan(sc, pool);
  ASSERT_EQ(r.status, PlanStatus::Solved);
  const double eps = sc.params.epsilon;
  ParticleSet set = root_particles(sc, sc.params);
  for (const auto& s : r.plan->steps) {
    auto reach = compute_reach_set(set, s.control, s.duration, sc.plant, sc.bounds.disturbance, sc.params.step,
                                   {sc.params.seed, s.stream_key}, pool);
    ASSERT_TRUE(reach);
    EXPECT_TRUE(padded_collision_free(reach->traces, collision_projection(sc.plant), sc.obstacles, eps));
    for (std::size_t i = 0; i < set.size(); ++i)
      EXPECT_EQ(reach->set.particles[i].state, r.tree->node(s.node_id).reach_set.particles[i].state);
    set = std::move(reach->set);
  }
  EXPECT_TRUE(padded_goal_contained(set, sc.goal, eps));
}

TEST(Plan, SameSeedSamePlan) {
  WorkerPool one(1), four(4);
  const Scenario sc = line_scenario(8.0, 1.0, 3000);
  const auto a = plan(sc, one);
  const auto b = plan(sc, four);
  ASSERT_EQ(a.status, b.status);
  ASSERT_EQ(a.tree->size(), b.tree->size());
  for (std::size_t i = 0; i < a.tree->size(); ++i) EXPECT_EQ(a.tree->node(i).nominal, b.tree->node(i).nominal);
}
