// rrrt: plan, validate and study robust motion plans from scenario files.

#include "robust_rrt/io.hpp"
#include "robust_rrt/svg.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace robust_rrt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUnsolved = 2;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_iters;
  std::optional<std::size_t> particles;
  std::optional<double> epsilon;
  std::optional<double> zeta;
  std::optional<double> tau_max;
  std::optional<double> baseline_padding;
  bool no_baseline = false;

  void add_to(CLI::App* app, bool with_seed = true) {
    if (with_seed) app->add_option("--seed", seed, "Master seed");
    app->add_option("--max-iters", max_iters, "Iteration budget");
    app->add_option("--particles", particles, "Particles per reachable set");
    app->add_option("--epsilon", epsilon, "Obstacle inflation / goal shrink margin");
    app->add_option("--zeta", zeta, "Node-selection tie-breaking radius");
    app->add_option("--tau-max", tau_max, "Maximum control duration");
    app->add_option("--baseline-padding", baseline_padding, "Run the nominal baseline with this padding");
    app->add_flag("--no-baseline", no_baseline, "Ignore the scenario's baseline setting");
  }

  void apply(Scenario& sc) const {
    if (seed) sc.params.seed = *seed;
    if (max_iters) sc.params.max_iters = *max_iters;
    if (particles) sc.params.particles = *particles;
    if (epsilon) sc.params.epsilon = *epsilon;
    if (zeta) sc.params.zeta = *zeta;
    if (tau_max) sc.params.tau_max = *tau_max;
    if (no_baseline) sc.baseline.enabled = false;
    if (baseline_padding) sc.baseline = {true, *baseline_padding};
    sc.validate();
  }
};

struct Loaded {
  Scenario scenario;
  std::string hash;
};

Loaded load(const std::string& path, const Overrides& ov) {
  const std::string text = read_file(path);
  Loaded l{parse_scenario(text), fnv1a_hex(text)};
  ov.apply(l.scenario);
  return l;
}

fs::path output_dir(const std::string& flag) {
  fs::path dir = flag;
  if (dir.empty()) {
    const char* env = std::getenv("RRRT_OUT_DIR");
    dir = env && *env ? env : ".";
  }
  fs::create_directories(dir);
  return dir;
}

int cmd_run(const std::string& scenario_path, const Overrides& ov, const std::string& out_flag, int workers,
            bool svg) {
  const Loaded l = load(scenario_path, ov);
  const Scenario& sc = l.scenario;
  WorkerPool pool(workers);
  const PlanResult result = plan(sc, pool);
  const Provenance prov{sc.params.seed, l.hash};

  const fs::path dir = output_dir(out_flag);
  write_file((dir / "plan.json").string(), dump(plan_to_json(result, sc, prov)));
  write_file((dir / "stats.json").string(), dump(stats_to_json(result, sc, sc.params, prov)));
  if (svg) write_file((dir / "tree.svg").string(), render_svg(sc, result));

  const bool solved = result.status == PlanStatus::Solved;
  std::cout << (solved ? "solved" : "budget exhausted") << ": " << result.stats.iterations << " iterations, "
            << (result.tree ? result.tree->size() : 0) << " nodes";
  if (result.plan) std::cout << ", " << result.plan->steps.size() << " steps, duration " << result.plan->duration();
  std::cout << ", " << result.stats.wall_time_s << " s\n";
  return solved ? kExitOk : kExitUnsolved;
}

int cmd_validate(const std::string& plan_path, const std::string& scenario_path, const Overrides& ov,
                 std::size_t rollouts, std::optional<std::uint64_t> seed, bool replay, const std::string& out_flag,
                 int workers) {
  const Loaded l = load(scenario_path, ov);
  const json pj = json::parse(read_file(plan_path));
  const Plan p = plan_from_json(pj, l.scenario);
  if (pj.value("scenario_hash", "") != l.hash)
    std::cerr << "warning: plan was computed for a different scenario file\n";

  Scenario sc = l.scenario;
  sc.params.seed = p.seed;
  const std::uint64_t vseed = seed ? *seed : p.seed;
  const ValidationMode mode = replay ? ValidationMode::Replay : ValidationMode::Fresh;
  WorkerPool pool(workers);
  const ValidityRecord rec = monte_carlo_validate(p, sc, replay ? sc.params.particles : rollouts, vseed, pool, mode);

  const fs::path dir = output_dir(out_flag);
  write_file((dir / "validity.json").string(), dump(validity_to_json(rec, {vseed, l.hash}, p.seed, mode)));
  std::cout << (rec.valid ? "valid" : "invalid") << ": " << rec.rollouts << " rollouts, " << rec.collisions
            << " collisions, " << rec.goal_misses << " goal misses\n";
  return rec.valid ? kExitOk : kExitUnsolved;
}

int cmd_study(const std::string& scenario_path, const Overrides& ov, const std::vector<std::size_t>& budgets,
              std::size_t repeats, const std::string& out_flag, int workers) {
  const Loaded l = load(scenario_path, ov);
  WorkerPool pool(workers);
  const auto rows = success_rate_study(l.scenario, budgets, repeats, pool);

  json j;
  j["format"] = "robust-rrt-study/1";
  j["tool_version"] = kToolVersion;
  j["seed"] = l.scenario.params.seed;
  j["scenario_hash"] = l.hash;
  j["rows"] = json::array();
  std::cout << "budget  successes  rate\n";
  for (const auto& r : rows) {
    j["rows"].push_back({{"budget", r.budget}, {"successes", r.successes}, {"runs", r.runs}, {"rate", r.rate()}});
    std::cout << r.budget << "  " << r.successes << "/" << r.runs << "  " << r.rate() << "\n";
  }
  const fs::path dir = output_dir(out_flag);
  write_file((dir / "study.json").string(), dump(j));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust RRT planner with particle-based reachable sets"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::string scenario, plan_path, out_dir;
  int workers = 1;
  Overrides ov;

  auto* run = app.add_subcommand("run", "Plan and write plan.json, stats.json and tree.svg");
  bool no_svg = false;
  run->add_option("--scenario", scenario, "Scenario file")->required();
  run->add_option("--out-dir", out_dir, "Output directory (default: $RRRT_OUT_DIR or .)");
  run->add_option("--workers", workers, "Propagation threads")->check(CLI::PositiveNumber);
  run->add_flag("--no-svg", no_svg, "Skip the SVG rendering");
  ov.add_to(run);

  auto* val = app.add_subcommand("validate", "Monte-Carlo check of a plan; writes validity.json");
  std::size_t rollouts = 1000;
  std::optional<std::uint64_t> vseed;
  bool replay = false;
  val->add_option("plan", plan_path, "Plan file")->required();
  val->add_option("--scenario", scenario, "Scenario file")->required();
  val->add_option("--rollouts", rollouts, "Fresh rollouts M")->check(CLI::PositiveNumber);
  val->add_option("--seed", vseed, "Seed for fresh rollouts (default: the plan's seed)");
  val->add_flag("--replay", replay, "Replay the planner's own particles instead of fresh draws");
  val->add_option("--out-dir", out_dir, "Output directory (default: $RRRT_OUT_DIR or .)");
  val->add_option("--workers", workers, "Rollout threads")->check(CLI::PositiveNumber);
  ov.add_to(val, false);

  auto* study = app.add_subcommand("study", "Success rate per iteration budget; writes study.json");
  std::vector<std::size_t> budgets{500, 2000, 8000};
  std::size_t repeats = 20;
  study->add_option("--scenario", scenario, "Scenario file")->required();
  study->add_option("--budgets", budgets, "Iteration budgets")->delimiter(',');
  study->add_option("--repeats", repeats, "Seeds per budget");
  study->add_option("--out-dir", out_dir, "Output directory (default: $RRRT_OUT_DIR or .)");
  study->add_option("--workers", workers, "Propagation threads")->check(CLI::PositiveNumber);
  ov.add_to(study);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*run) return cmd_run(scenario, ov, out_dir, workers, !no_svg);
    if (*val) return cmd_validate(plan_path, scenario, ov, rollouts, vseed, replay, out_dir, workers);
    if (*study) return cmd_study(scenario, ov, budgets, repeats, out_dir, workers);
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << scenario << ": " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
