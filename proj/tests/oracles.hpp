#pragma once

// Reference implementations used only by tests. They deliberately avoid the
// climbing shortcut and recompute everything from the full cost vector.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cats/online_trainer.hpp"
#include "cats/random.hpp"
#include "cats/tree_policy.hpp"

namespace cats::oracle {

struct NodeCosts {
  NodeId node;
  int level = 0;
  double cost_left = 0.0;
  double cost_right = 0.0;
  bool fixed = false;  // read-only routing node
};

struct UpdateResult {
  std::vector<NodeCosts> updated;  // nodes whose two child costs differ, bottom-up, by id within a level
  TreePolicy tree;                 // the tree after applying exactly those updates
};

// Materializes the full cost vector.
inline std::vector<double> full_costs(const PiecewiseCost& c, std::uint32_t k) {
  std::vector<double> v(k, 0.0);
  for (std::uint32_t i = 0; i < k; ++i) {
    if (i >= c.a_min_index && i <= c.a_max_index) v[i] = c.c_star;
  }
  return v;
}

// Visits every internal node level by level from the bottom, computes both
// child subtree costs from scratch on the partially trained copy, and trains
// the node whenever they differ. Read-only nodes are reported with
// `fixed = true` but never trained.
inline UpdateResult brute_force_update(const TreePolicy& start, Context x, const PiecewiseCost& c) {
  UpdateResult r{{}, start};
  const TreeShape& shape = r.tree.shape();
  const std::vector<double> cost = full_costs(c, shape.num_leaves());
  for (int d = shape.depth() - 1; d >= 0; --d) {
    const std::uint32_t first = (std::uint32_t{1} << d) - 1;
    for (std::uint32_t id = first; id < 2 * first + 1; ++id) {
      const NodeId v{id};
      const double cl = cost[r.tree.subtree_action(TreeShape::left(v), x).index];
      const double cr = cost[r.tree.subtree_action(TreeShape::right(v), x).index];
      if (cl == cr) continue;
      const bool fixed = shape.fixed_branch(v).has_value();
      r.updated.push_back({v, d, cl, cr, fixed});
      if (!fixed) r.tree.learner(v).learn({x, cl, cr});
    }
  }
  return r;
}

// Every ancestor of leaf index i, including the leaf itself.
inline std::vector<NodeId> path_to_root(const TreeShape& shape, std::uint32_t leaf_index) {
  std::vector<NodeId> path{shape.leaf(leaf_index)};
  while (path.back().id != 0) path.push_back(TreeShape::parent(path.back()));
  return path;
}

// Two-sided one-sample Kolmogorov-Smirnov statistic against a CDF.
template <class Cdf>
double ks_statistic(std::vector<double> samples, Cdf&& cdf) {
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  double stat = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    stat = std::max({stat, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return stat;
}

// Overwrites every learner with weights uniform on [-1, 1].
inline void randomize(TreePolicy& tree, Rng& rng) {
  const std::size_t n = tree.learner_config().feature_dim + 1;
  std::vector<double> left(n), right(n);
  for (std::uint32_t id = 0; id < tree.shape().num_internal(); ++id) {
    for (double& w : left) w = 2.0 * uniform01(rng) - 1.0;
    for (double& w : right) w = 2.0 * uniform01(rng) - 1.0;
    tree.learner(NodeId{id}).restore(left, right, 0);
  }
}

inline std::vector<double> random_context(std::size_t dim, Rng& rng) {
  std::vector<double> x(dim);
  for (double& v : x) v = 2.0 * uniform01(rng) - 1.0;
  return x;
}

}  // namespace cats::oracle
