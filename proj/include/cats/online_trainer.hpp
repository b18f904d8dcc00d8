#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cats/tree_policy.hpp"

namespace cats {

// Implicit IPS cost vector over the K grid actions: c_star on the index
// band [a_min_index, a_max_index], zero elsewhere.
struct PiecewiseCost {
  std::uint32_t a_min_index = 0;
  std::uint32_t a_max_index = 0;
  double c_star = 0.0;

  bool operator==(const PiecewiseCost&) const = default;
};

// IPS cost of one logged round for a tree with bandwidth h and K leaves.
//   h > 0: c* = loss / (2 h p) on [ceil(K (a - h)), floor(K (a + h))] ∩ [0, K - 1]
//   h = 0: c* = loss / p at round(K a), clamped to [0, K - 1]
PiecewiseCost make_ips_cost(const TreeShape& shape, double a_taken, double density, double loss);
inline PiecewiseCost make_ips_cost(const TreePolicy& tree, double a_taken, double density,
                                   double loss) {
  return make_ips_cost(tree.shape(), a_taken, density, loss);
}

double cost_at(const PiecewiseCost& c, std::uint32_t index, std::uint32_t num_actions);

// Restricts the band to the reachable leaves of `shape`. Returns true when
// anything changed.
bool clamp_to_reachable(const TreeShape& shape, PiecewiseCost& c);

// Cost c~(T^w(x)) of the subtree rooted at w, given the ancestors alpha and
// beta of the band's end leaves on w's level and their stored costs.
double return_cost(const PiecewiseCost& c, NodeId w, NodeId alpha, NodeId beta, double alpha_cost,
                   double beta_cost);

struct TraceUpdate {
  int level = 0;  // level of the updated node
  NodeId node;
  double cost_left = 0.0;
  double cost_right = 0.0;

  bool operator==(const TraceUpdate&) const = default;
};

struct StoredCost {
  NodeId node;
  double cost = 0.0;
};

// What one online update touched.
struct UpdateTrace {
  std::vector<TraceUpdate> updates;       // learner updates, bottom-up, left before right
  std::vector<StoredCost> stored_costs;   // c~(T^u(x)) for every node on the two climbed paths
  bool clamped = false;                   // the band was clamped to the reachable leaves

  std::size_t learner_updates() const { return updates.size(); }
  // One "level node cost_left cost_right" line per update.
  std::string to_text() const;
};

// Folds one cost-sensitive example into the tree in O(D): climbs from the two
// band-end leaves to the root, updating each ancestor whose two subtrees
// disagree in cost. Read-only routing nodes are never updated.
// `trace` is cleared and refilled; passing the same object each round keeps
// the update allocation-free.
void online_train_tree(TreePolicy& tree, Context x, PiecewiseCost c, UpdateTrace& trace);

inline UpdateTrace online_train_tree(TreePolicy& tree, Context x, PiecewiseCost c) {
  UpdateTrace trace;
  online_train_tree(tree, x, c, trace);
  return trace;
}

}  // namespace cats
