#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cats/cats_engine.hpp"
#include "cats/online_trainer.hpp"
#include "cats/tree_policy.hpp"

namespace cats {

struct CostSensitiveExample {
  std::vector<double> x;
  PiecewiseCost cost;
};

// ---------------------------------------------------------------------------
// Exact ERM over an enumerated classifier class (theory-facing path).

using Classifier = std::function<Branch(Context)>;

class FiniteBaseClass {
 public:
  explicit FiniteBaseClass(std::vector<Classifier> members);
  std::size_t size() const { return members_.size(); }
  Branch apply(std::size_t i, Context x) const { return members_[i](x); }

 private:
  std::vector<Classifier> members_;
};

struct BinaryCostSample {
  Context x;
  double cost_left = 0.0;
  double cost_right = 0.0;
};

// Index of the member with the least total cost; ties go to the lowest
// index, and an empty sample selects member 0.
std::size_t exact_erm(const FiniteBaseClass& f, std::span<const BinaryCostSample> sample);

// Tree whose internal nodes each hold one member of a finite class.
class FiniteClassTree {
 public:
  FiniteClassTree(int depth, double h, const FiniteBaseClass& f);

  const TreeShape& shape() const { return shape_; }
  Branch decide(NodeId v, Context x) const {
    if (auto fixed = shape_.fixed_branch(v)) return *fixed;
    return class_->apply(choice_[v.id], x);
  }
  DiscretizedAction subtree_action(NodeId v, Context x) const;
  DiscretizedAction get_action(Context x) const { return subtree_action(TreeShape::root(), x); }

  std::size_t choice(NodeId v) const { return choice_.at(v.id); }
  void set_choice(NodeId v, std::size_t member);

 private:
  TreeShape shape_;
  const FiniteBaseClass* class_;
  std::vector<std::size_t> choice_;
};

// Zero-based half-open index block [first, second) of the examples reserved
// for tree level `level`: n' = floor(n / D) and level d gets the (D - d)-th
// block, so the deepest level trains on the earliest data.
std::pair<std::size_t, std::size_t> level_block(std::size_t n, int depth, int level);

// Bottom-up level-partitioned training with exact per-node ERM. Examples
// whose two child costs agree are dropped from a node's sample. Throws when
// there are fewer examples than levels.
FiniteClassTree train_tree_partitioned(int depth, double h, std::span<const CostSensitiveExample> examples,
                                       const FiniteBaseClass& f);

// ---------------------------------------------------------------------------
// Production path: every example streamed through the online update.

TreePolicy train_tree_full(int depth, double h, std::span<const CostSensitiveExample> examples,
                           const BaseLearnerConfig& learner, std::size_t passes = 1);

// Replays a log: each record becomes the IPS cost for this tree's bandwidth.
TreePolicy train_tree_full(int depth, double h, std::span<const InteractionRecord> log,
                           const BaseLearnerConfig& learner, std::size_t passes = 1);

// IPS estimate of the smoothed loss of (tree, tree bandwidth) on a log.
double ips_value(std::span<const InteractionRecord> log, const TreePolicy& tree);

// ---------------------------------------------------------------------------
// Model selection over (bandwidth, discretization) pairs.

struct GridSpec {
  double bandwidth = 0.0;
  std::uint32_t num_actions = 0;
  bool operator==(const GridSpec&) const = default;
};

// {(h, K) : h in {2^-13..2^-1}, K in {2^2..2^13}, h K in {2^0..2^11}}.
std::vector<GridSpec> default_grid();

struct SrmConfig {
  double p_min = 0.05;
  double delta = 0.05;
  // Replaces 64 ln(4 T |J| / delta) when set.
  std::optional<double> penalty_scale;
};

struct GridPoint {
  GridSpec requested;
  double bandwidth = 0.0;
  std::uint32_t num_actions = 0;
  double g_hat = 0.0;      // progressive IPS loss of the trees T_1..T_T
  double sigma = 0.0;      // penalty_scale / (T p_min h)
  double penalty = 0.0;    // sqrt(g_hat sigma) + sigma
  bool evaluated = false;  // false when the point could not be built
  bool selected = false;
  std::string note;
};

struct CatsOffOptions {
  std::size_t threads = 1;
  bool keep_all_trees = false;
};

struct CatsOffResult {
  std::vector<GridPoint> report;  // one entry per requested grid point
  std::size_t selected = 0;       // index into report
  double penalty_scale = 0.0;
  std::size_t grid_size = 0;      // |J| after dropping unbuildable points
  TreePolicy model;               // final tree of the selected point
  std::vector<std::optional<TreePolicy>> trees;  // per report entry, when kept

  double h_hat() const { return report[selected].bandwidth; }
  std::uint32_t k_hat() const { return report[selected].num_actions; }
};

struct LogDensityError : std::invalid_argument {
  LogDensityError(std::size_t index, double density, double p_min);
  std::size_t index;  // zero-based position in the log
};

double srm_penalty(double g_hat, double sigma);

// Grid points are independent; results do not depend on options.threads.
CatsOffResult cats_off(std::span<const InteractionRecord> log, std::span<const GridSpec> grid,
                       const SrmConfig& srm, const BaseLearnerConfig& learner,
                       const CatsOffOptions& options = {});

// {"grid": [{h, K, g_hat, penalty, selected, ...}], "h_hat", "K_hat", "model"}
std::string report_to_json(const CatsOffResult& result, const std::string& model_path);

// Whitespace-separated "h K" pairs, one per line; '#' starts a comment.
std::vector<GridSpec> parse_grid(std::istream& in);

}  // namespace cats
