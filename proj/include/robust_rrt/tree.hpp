#pragma once

#include "robust_rrt/core.hpp"
#include "robust_rrt/reachability.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

namespace robust_rrt {

// ---------------------------------------------------------------------------
// Nearest-neighbour index over nominal states
// ---------------------------------------------------------------------------

/// k-d tree over weighted points with an unindexed tail. The indexed part is
/// rebuilt whenever the point count doubles; below kLinearScanLimit points
/// every query is a linear scan.
class NominalIndex {
 public:
  static constexpr std::size_t kLinearScanLimit = 64;

  explicit NominalIndex(Vec weights = {}) : scale_(weights.cwiseSqrt()) {}

  std::size_t size() const { return points_.size(); }

  void insert(const Vec& x) {
    if (scale_.size() == 0) scale_ = Vec::Ones(x.size());
    if (x.size() != scale_.size()) throw Error("nominal index: dimension mismatch");
    points_.push_back(scaled(x));
    if (points_.size() >= kLinearScanLimit && points_.size() >= 2 * indexed_) rebuild();
  }

  /// Scaled representation; distances are Euclidean norms of differences of these.
  Vec scaled(const Vec& x) const { return x.cwiseProduct(scale_); }

  double distance(const Vec& a, const Vec& b) const { return (scaled(a) - scaled(b)).norm(); }

  /// Lowest-id point at minimal distance.
  std::pair<std::size_t, double> nearest(const Vec& query) const {
    if (points_.empty()) throw Error("nearest neighbour query on an empty index");
    const Vec q = scaled(query);
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    auto consider = [&](std::size_t id) {
      const double d2 = (points_[id] - q).squaredNorm();
      if (d2 < best_d2 || (d2 == best_d2 && id < best)) {
        best_d2 = d2;
        best = id;
      }
    };
    if (!nodes_.empty()) nearest_rec(root_, q, consider, best_d2);
    for (std::size_t id = indexed_; id < points_.size(); ++id) consider(id);
    return {best, std::sqrt(best_d2)};
  }

  /// All ids within the closed ball of radius r, ascending.
  std::vector<std::size_t> range(const Vec& query, double r) const {
    std::vector<std::size_t> out;
    if (r < 0.0) return out;
    const Vec q = scaled(query);
    const double r2 = r * r;
    if (!nodes_.empty()) range_rec(root_, q, r, r2, out);
    for (std::size_t id = indexed_; id < points_.size(); ++id)
      if ((points_[id] - q).squaredNorm() <= r2) out.push_back(id);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  struct KdNode {
    std::size_t id;
    int axis;
    int left = -1;
    int right = -1;
  };

  void rebuild() {
    indexed_ = points_.size();
    std::vector<std::size_t> ids(indexed_);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    nodes_.clear();
    nodes_.reserve(indexed_);
    root_ = build(ids.begin(), ids.end(), 0);
  }

  int build(std::vector<std::size_t>::iterator first, std::vector<std::size_t>::iterator last, int depth) {
    if (first == last) return -1;
    const int axis = depth % static_cast<int>(scale_.size());
    auto mid = first + (last - first) / 2;
    std::nth_element(first, mid, last, [&](std::size_t a, std::size_t b) {
      return points_[a][axis] < points_[b][axis] || (points_[a][axis] == points_[b][axis] && a < b);
    });
    const int index = static_cast<int>(nodes_.size());
    nodes_.push_back({*mid, axis});
    const int l = build(first, mid, depth + 1);
    const int r = build(mid + 1, last, depth + 1);
    nodes_[static_cast<std::size_t>(index)].left = l;
    nodes_[static_cast<std::size_t>(index)].right = r;
    return index;
  }

  template <class Consider>
  void nearest_rec(int ni, const Vec& q, Consider& consider, double& best_d2) const {
    if (ni < 0) return;
    const KdNode& n = nodes_[static_cast<std::size_t>(ni)];
    consider(n.id);
    const double diff = q[n.axis] - points_[n.id][n.axis];
    const int near = diff < 0.0 ? n.left : n.right;
    const int far = diff < 0.0 ? n.right : n.left;
    nearest_rec(near, q, consider, best_d2);
    // Equal distances must still be visited so the lowest id wins ties.
    if (diff * diff <= best_d2) nearest_rec(far, q, consider, best_d2);
  }

  void range_rec(int ni, const Vec& q, double r, double r2, std::vector<std::size_t>& out) const {
    if (ni < 0) return;
    const KdNode& n = nodes_[static_cast<std::size_t>(ni)];
    if ((points_[n.id] - q).squaredNorm() <= r2) out.push_back(n.id);
    const double diff = q[n.axis] - points_[n.id][n.axis];
    if (diff <= r) range_rec(n.left, q, r, r2, out);
    if (diff >= -r) range_rec(n.right, q, r, r2, out);
  }

  Vec scale_;
  std::vector<Vec> points_;
  std::vector<KdNode> nodes_;
  int root_ = -1;
  std::size_t indexed_ = 0;
};

// ---------------------------------------------------------------------------
// Dual tree
// ---------------------------------------------------------------------------

struct Edge {
  Vec control;
  double duration = 0.0;
  std::optional<int> mode;
  std::uint64_t stream_key = 0;  // extension key the reach set was propagated with
};

struct Node {
  std::size_t id = 0;
  std::optional<std::size_t> parent;
  ParticleSet reach_set;
  Vec nominal;
  std::optional<Edge> edge;
  double time = 0.0;
};

/// Reachable-set nodes and their nominal states, paired one-to-one. Nodes
/// are append-only, so a parent always precedes its children.
class DualTree {
 public:
  DualTree(ParticleSet root, Vec metric_weights = {}, std::optional<Vec> root_nominal = std::nullopt)
      : index_(std::move(metric_weights)) {
    Node n;
    n.id = 0;
    n.nominal = root_nominal ? *root_nominal : root.nominal_mean;
    n.time = root.time;
    n.reach_set = std::move(root);
    index_.insert(n.nominal);
    nodes_.push_back(std::move(n));
  }

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const NominalIndex& index() const { return index_; }

  /// Appends a child. The nominal state defaults to the particle mean.
  std::size_t add_node(std::size_t parent, ParticleSet reach_set, Edge edge,
                       std::optional<Vec> nominal = std::nullopt) {
    if (parent >= nodes_.size()) throw Error("add_node: parent " + std::to_string(parent) + " does not exist");
    Node n;
    n.id = nodes_.size();
    n.parent = parent;
    n.time = nodes_[parent].time + edge.duration;
    n.nominal = nominal ? std::move(*nominal) : reach_set.nominal_mean;
    n.reach_set = std::move(reach_set);
    n.edge = std::move(edge);
    index_.insert(n.nominal);
    nodes_.push_back(std::move(n));
    return nodes_.back().id;
  }

  std::pair<std::size_t, double> nearest_nominal(const Vec& x) const { return index_.nearest(x); }

  std::vector<std::size_t> range_nominal(const Vec& x, double zeta) const { return index_.range(x, zeta); }

 private:
  std::vector<Node> nodes_;
  NominalIndex index_;
};

struct PlanStep {
  Vec control;
  double duration = 0.0;
  std::optional<int> mode;
  std::size_t node_id = 0;
  std::uint64_t stream_key = 0;
};

/// Control/duration sequence from the root, with what is needed to replay it.
struct Plan {
  std::uint64_t seed = 0;
  std::vector<PlanStep> steps;

  double duration() const {
    double t = 0.0;
    for (const auto& s : steps) t += s.duration;
    return t;
  }
};

inline Plan build_path(const DualTree& tree, std::size_t leaf, std::uint64_t seed = 0) {
  if (leaf >= tree.size()) throw Error("build_path: node does not exist");
  Plan plan;
  plan.seed = seed;
  for (std::size_t id = leaf; tree.node(id).parent; id = *tree.node(id).parent) {
    const Edge& e = *tree.node(id).edge;
    plan.steps.push_back({e.control, e.duration, e.mode, id, e.stream_key});
  }
  std::reverse(plan.steps.begin(), plan.steps.end());
  return plan;
}

}  // namespace robust_rrt
