#pragma once

// Scenario, plan, stats and validity-report files. All files are JSON with
// sorted keys, so equal inputs produce byte-identical output.

#include "robust_rrt/planner.hpp"
#include "robust_rrt/validation.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace robust_rrt {

inline constexpr const char* kToolVersion = "0.3.0";
inline constexpr const char* kPlanFormat = "robust-rrt-plan/1";
inline constexpr const char* kStatsFormat = "robust-rrt-stats/1";
inline constexpr const char* kValidityFormat = "robust-rrt-validity/1";

using json = nlohmann::json;

/// Scenario problem anchored to a line of the source text (0 when unknown).
class ScenarioError : public Error {
 public:
  ScenarioError(std::size_t line, const std::string& msg)
      : Error(line ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

namespace detail {

// Line of the first occurrence of a key path ("planner", "epsilon") in the text.
inline std::size_t line_of(const std::string& text, const std::vector<std::string>& path) {
  std::size_t pos = 0;
  for (const auto& key : path) {
    const auto found = text.find("\"" + key + "\"", pos);
    if (found == std::string::npos) break;
    pos = found;
  }
  if (pos == 0) return 0;
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

class Reader {
 public:
  Reader(const json& root, const std::string& text) : root_(root), text_(text) {}

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& msg) const {
    std::string where;
    for (const auto& p : path) where += (where.empty() ? "" : ".") + p;
    throw ScenarioError(line_of(text_, path), where + ": " + msg);
  }

  const json* find(const std::vector<std::string>& path) const {
    const json* node = &root_;
    for (const auto& k : path) {
      if (!node->is_object()) return nullptr;
      auto it = node->find(k);
      if (it == node->end()) return nullptr;
      node = &*it;
    }
    return node;
  }

  const json& require(const std::vector<std::string>& path) const {
    const json* n = find(path);
    if (!n) fail(path, "missing required field");
    return *n;
  }

  double number(const std::vector<std::string>& path, const json& n) const {
    if (!n.is_number()) fail(path, "expected a number");
    return n.get<double>();
  }

  double number(const std::vector<std::string>& path, double fallback) const {
    const json* n = find(path);
    return n ? number(path, *n) : fallback;
  }

  std::uint64_t count(const std::vector<std::string>& path, std::uint64_t fallback) const {
    const json* n = find(path);
    if (!n) return fallback;
    if (!n->is_number_integer() || n->get<std::int64_t>() < 0) fail(path, "expected a nonnegative integer");
    return n->get<std::uint64_t>();
  }

  Vec vector(const std::vector<std::string>& path, const json& n) const {
    if (!n.is_array()) fail(path, "expected an array of numbers");
    Vec v(static_cast<Eigen::Index>(n.size()));
    for (std::size_t i = 0; i < n.size(); ++i) {
      if (!n[i].is_number()) fail(path, "expected an array of numbers");
      v[static_cast<Eigen::Index>(i)] = n[i].get<double>();
    }
    return v;
  }

  Vec vector(const std::vector<std::string>& path) const { return vector(path, require(path)); }

  Box box(const std::vector<std::string>& path, const json& n) const {
    auto lo_path = path, hi_path = path;
    lo_path.push_back("lo");
    hi_path.push_back("hi");
    if (!n.is_object() || !n.contains("lo") || !n.contains("hi")) fail(path, "expected {\"lo\": [...], \"hi\": [...]}");
    try {
      return Box(vector(lo_path, n["lo"]), vector(hi_path, n["hi"]));
    } catch (const ScenarioError&) {
      throw;
    } catch (const Error& e) {
      fail(path, e.what());
    }
  }

  Box box(const std::vector<std::string>& path) const { return box(path, require(path)); }

 private:
  const json& root_;
  const std::string& text_;
};

}  // namespace detail

/// Parses and validates a scenario. `text` is the file content; errors carry
/// the line of the offending key.
inline Scenario parse_scenario(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n'));
    throw ScenarioError(line, std::string("malformed JSON: ") + e.what());
  }
  if (!root.is_object()) throw ScenarioError(1, "scenario must be a JSON object");
  const detail::Reader rd(root, text);

  static const std::vector<std::string> known = {"system", "system_params", "feedback_gain", "control_box",
                                                 "disturbance_box", "param_box", "nominal_param",
                                                 "nominal_disturbance", "initial_set", "initial_mode",
                                                 "sampling_box", "goal", "obstacles", "planner", "baseline",
                                                 "description"};
  for (const auto& [k, v] : root.items())
    if (std::find(known.begin(), known.end(), k) == known.end()) rd.fail({k}, "unknown field");

  Scenario sc;
  const json& sys = rd.require({"system"});
  if (!sys.is_string()) rd.fail({"system"}, "expected a string");
  sc.system = sys.get<std::string>();

  ParamOverrides overrides;
  if (const json* p = rd.find({"system_params"})) {
    if (!p->is_object()) rd.fail({"system_params"}, "expected an object");
    for (const auto& [k, v] : p->items()) overrides[k] = rd.number({"system_params", k}, v);
  }
  Benchmark bench;
  try {
    bench = make_benchmark(sc.system, overrides);
  } catch (const Error& e) {
    rd.fail({overrides.empty() ? "system" : "system_params"}, e.what());
  }
  sc.plant = bench.plant;
  sc.bounds = bench.bounds;

  if (rd.find({"control_box"})) sc.bounds.control = rd.box({"control_box"});
  if (rd.find({"disturbance_box"})) sc.bounds.disturbance = rd.box({"disturbance_box"});
  if (rd.find({"param_box"})) sc.bounds.param = rd.box({"param_box"});

  auto set_nominal = [&](const char* key, Vec SystemModel::*sys_member, Vec HybridSystemModel::*hyb_member) {
    if (!rd.find({key})) return;
    const Vec v = rd.vector({key});
    if (auto* s = std::get_if<SystemModel>(&sc.plant)) (*s).*sys_member = v;
    else if (auto* f = std::get_if<FeedbackWrapper>(&sc.plant)) f->base.*sys_member = v;
    else std::get<HybridSystemModel>(sc.plant).*hyb_member = v;
  };
  set_nominal("nominal_param", &SystemModel::nominal_param, &HybridSystemModel::nominal_param);
  set_nominal("nominal_disturbance", &SystemModel::nominal_disturbance, &HybridSystemModel::nominal_disturbance);
  if (auto* fb = std::get_if<FeedbackWrapper>(&sc.plant)) {
    fb->control_box = sc.bounds.control;
    if (const json* g = rd.find({"feedback_gain"})) {
      if (!g->is_array() || g->size() != static_cast<std::size_t>(fb->gain.rows()))
        rd.fail({"feedback_gain"}, "expected " + std::to_string(fb->gain.rows()) + " rows");
      for (std::size_t r = 0; r < g->size(); ++r) {
        const Vec row = rd.vector({"feedback_gain"}, (*g)[r]);
        if (row.size() != fb->gain.cols())
          rd.fail({"feedback_gain"}, "expected " + std::to_string(fb->gain.cols()) + " columns");
        fb->gain.row(static_cast<Eigen::Index>(r)) = row.transpose();
      }
    }
  } else if (rd.find({"feedback_gain"})) {
    rd.fail({"feedback_gain"}, "system " + sc.system + " has no feedback wrapper");
  }

  if (const json* init = rd.find({"initial_set"})) {
    if (init->contains("box")) {
      sc.bounds.init = rd.box({"initial_set", "box"});
    } else if (init->contains("ball")) {
      const Vec c = rd.vector({"initial_set", "ball", "center"});
      const double r = rd.number({"initial_set", "ball", "radius"}, rd.require({"initial_set", "ball", "radius"}));
      if (r < 0.0) rd.fail({"initial_set", "ball", "radius"}, "radius must be nonnegative");
      sc.bounds.init = BallSet{c, r};
    } else {
      rd.fail({"initial_set"}, "expected {\"box\": ...} or {\"ball\": ...}");
    }
  }

  const auto labels = mode_labels(sc.plant);
  std::string mode_label = bench.initial_mode;
  if (const json* m = rd.find({"initial_mode"})) {
    if (!m->is_string()) rd.fail({"initial_mode"}, "expected a string");
    mode_label = m->get<std::string>();
  }
  const auto mit = std::find(labels.begin(), labels.end(), mode_label);
  if (mit == labels.end()) rd.fail({"initial_mode"}, "unknown mode '" + mode_label + "'");
  sc.initial_mode = static_cast<int>(mit - labels.begin());

  sc.sampling_box = rd.box({"sampling_box"});

  if (rd.find({"goal"})) {
    const json& g = rd.require({"goal", "projection"});
    if (!g.is_array()) rd.fail({"goal", "projection"}, "expected an array of indices");
    std::vector<int> proj;
    for (const auto& v : g) {
      if (!v.is_number_integer()) rd.fail({"goal", "projection"}, "expected integer indices");
      proj.push_back(v.get<int>());
    }
    try {
      sc.goal = make_goal(proj, rd.vector({"goal", "center"}),
                          rd.number({"goal", "radius"}, rd.require({"goal", "radius"})));
    } catch (const ScenarioError&) {
      throw;
    } catch (const Error& e) {
      rd.fail({"goal"}, e.what());
    }
  } else if (bench.goal) {
    sc.goal = *bench.goal;
  } else {
    rd.fail({"goal"}, "missing required field");
  }

  if (const json* obs = rd.find({"obstacles"})) {
    if (!obs->is_array()) rd.fail({"obstacles"}, "expected an array");
    for (const auto& o : *obs) {
      try {
        if (o.contains("ball")) {
          const Vec c = rd.vector({"obstacles", "center"}, o["ball"].at("center"));
          if (c.size() != 2) rd.fail({"obstacles", "center"}, "obstacle centers are 2-D");
          sc.obstacles.push_back(make_ball(c, rd.number({"obstacles", "radius"}, o["ball"].at("radius"))));
        } else if (o.contains("box")) {
          const Box b = rd.box({"obstacles", "box"}, o["box"]);
          if (b.dim() != 2) rd.fail({"obstacles", "box"}, "obstacle boxes are 2-D");
          sc.obstacles.push_back(make_box(b.lo, b.hi));
        } else {
          rd.fail({"obstacles"}, "expected {\"ball\": ...} or {\"box\": ...}");
        }
      } catch (const ScenarioError&) {
        throw;
      } catch (const std::exception& e) {
        rd.fail({"obstacles"}, e.what());
      }
    }
  }

  PlannerParams& p = sc.params;
  p.step = step_size(sc.plant);
  if (!rd.find({"planner"})) rd.fail({"planner"}, "missing required field");
  p.max_iters = rd.count({"planner", "max_iters"}, p.max_iters);
  p.tau_max = rd.number({"planner", "tau_max"}, rd.require({"planner", "tau_max"}));
  p.zeta = rd.number({"planner", "zeta"}, p.zeta);
  p.particles = rd.count({"planner", "particles"}, p.particles);
  p.epsilon = rd.number({"planner", "epsilon"}, p.epsilon);
  p.step = rd.number({"planner", "step"}, p.step);
  p.seed = rd.count({"planner", "seed"}, p.seed);
  if (rd.find({"planner", "metric_weights"})) p.metric_weights = rd.vector({"planner", "metric_weights"});
  if (const json* nom = rd.find({"planner", "nominal"})) {
    if (*nom == "mean") p.nominal_rollout = false;
    else if (*nom == "rollout") p.nominal_rollout = true;
    else rd.fail({"planner", "nominal"}, "expected \"mean\" or \"rollout\"");
  }

  if (rd.find({"baseline"})) {
    const json* en = rd.find({"baseline", "enabled"});
    if (en && !en->is_boolean()) rd.fail({"baseline", "enabled"}, "expected true or false");
    sc.baseline.enabled = en && en->get<bool>();
    sc.baseline.padding = rd.number({"baseline", "padding"}, 0.0);
  }

  try {
    sc.validate();
  } catch (const Error& e) {
    throw ScenarioError(0, e.what());
  }
  return sc;
}

inline Scenario load_scenario(const std::string& path) { return parse_scenario(read_file(path)); }

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

inline json to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

/// Provenance shared by every output file.
struct Provenance {
  std::uint64_t seed = 0;
  std::string scenario_hash;
};

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline json plan_to_json(const PlanResult& result, const Scenario& sc, const Provenance& prov) {
  json j;
  j["format"] = kPlanFormat;
  j["tool_version"] = kToolVersion;
  j["seed"] = prov.seed;
  j["scenario_hash"] = prov.scenario_hash;
  j["system"] = sc.system;
  j["status"] = result.status == PlanStatus::Solved ? "solved" : "budget_exhausted";
  j["steps"] = json::array();
  const auto labels = mode_labels(sc.plant);
  if (result.plan) {
    for (const auto& s : result.plan->steps) {
      json step;
      step["control"] = to_json(s.control);
      step["duration"] = s.duration;
      step["mode"] = s.mode ? json(labels[static_cast<std::size_t>(*s.mode)]) : json(nullptr);
      step["node_id"] = s.node_id;
      step["stream_key"] = s.stream_key;
      j["steps"].push_back(step);
    }
    j["duration"] = result.plan->duration();
  }
  return j;
}

inline json stats_to_json(const PlanResult& result, const Scenario& sc, const PlannerParams& params,
                          const Provenance& prov) {
  json j;
  j["format"] = kStatsFormat;
  j["tool_version"] = kToolVersion;
  j["seed"] = prov.seed;
  j["scenario_hash"] = prov.scenario_hash;
  j["system"] = sc.system;
  j["status"] = result.status == PlanStatus::Solved ? "solved" : "budget_exhausted";
  const auto& s = result.stats;
  j["iterations"] = s.iterations;
  j["nodes_added"] = s.nodes_added;
  j["tree_size"] = result.tree ? result.tree->size() : 0;
  j["rejected"] = {{"collision", s.rejected_collision},
                   {"divergence", s.rejected_divergence},
                   {"mode_nominal", s.rejected_mode_nominal},
                   {"mode_straddle", s.rejected_mode_straddle},
                   {"no_reachable_mode", s.skipped_no_modes}};
  j["planner"] = {{"max_iters", params.max_iters},
                  {"tau_max", params.tau_max},
                  {"zeta", params.zeta},
                  {"particles", sc.baseline.enabled ? std::size_t{1} : params.particles},
                  {"epsilon", params.epsilon},
                  {"step", params.step},
                  {"baseline", sc.baseline.enabled},
                  {"baseline_padding", sc.baseline.padding}};
  if (result.plan) {
    j["plan_steps"] = result.plan->steps.size();
    j["plan_duration"] = result.plan->duration();
  }
  return j;
}

inline Plan plan_from_json(const json& j, const Scenario& sc) {
  if (!j.is_object() || j.value("format", "") != kPlanFormat) throw Error("not a plan file");
  if (j.value("status", "") != "solved") throw Error("plan file does not hold a solved plan");
  if (j.value("system", "") != sc.system)
    throw Error("plan was computed for system '" + j.value("system", "") + "', scenario uses '" + sc.system + "'");
  Plan plan;
  plan.seed = j.at("seed").get<std::uint64_t>();
  const auto labels = mode_labels(sc.plant);
  for (const auto& s : j.at("steps")) {
    PlanStep step;
    const auto& c = s.at("control");
    step.control.resize(static_cast<Eigen::Index>(c.size()));
    for (std::size_t i = 0; i < c.size(); ++i) step.control[static_cast<Eigen::Index>(i)] = c[i].get<double>();
    if (step.control.size() != control_dim(sc.plant)) throw Error("plan control dimension does not match the scenario");
    step.duration = s.at("duration").get<double>();
    if (!s.at("mode").is_null()) {
      const auto it = std::find(labels.begin(), labels.end(), s["mode"].get<std::string>());
      if (it == labels.end()) throw Error("plan references unknown mode");
      step.mode = static_cast<int>(it - labels.begin());
    }
    step.node_id = s.at("node_id").get<std::size_t>();
    step.stream_key = s.at("stream_key").get<std::uint64_t>();
    plan.steps.push_back(std::move(step));
  }
  return plan;
}

inline json validity_to_json(const ValidityRecord& rec, const Provenance& prov, std::uint64_t plan_seed,
                             ValidationMode mode) {
  json j;
  j["format"] = kValidityFormat;
  j["tool_version"] = kToolVersion;
  j["seed"] = prov.seed;
  j["plan_seed"] = plan_seed;
  j["scenario_hash"] = prov.scenario_hash;
  j["mode"] = mode == ValidationMode::Replay ? "replay" : "fresh";
  j["rollouts"] = rec.rollouts;
  j["collisions"] = rec.collisions;
  j["goal_misses"] = rec.goal_misses;
  j["valid"] = rec.valid;
  const double m = rec.min_clearance();
  j["min_clearance"] = std::isfinite(m) ? json(m) : json(nullptr);
  return j;
}

}  // namespace robust_rrt
