#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "cats/base_learner.hpp"

namespace cats {

// Heap-ordered node id: root 0, children 2 id + 1 and 2 id + 2.
struct NodeId {
  std::uint32_t id = 0;
  auto operator<=>(const NodeId&) const = default;
};

// Action index/K on the grid {0, 1/K, ..., (K-1)/K}. The index is canonical.
struct DiscretizedAction {
  std::uint32_t index = 0;
  std::uint32_t num_actions = 1;

  double value() const { return static_cast<double>(index) / num_actions; }
  bool operator==(const DiscretizedAction&) const = default;
};

struct LeafRange {
  std::uint32_t first = 0;  // inclusive leaf indices
  std::uint32_t last = 0;
  bool operator==(const LeafRange&) const = default;
};

// Id arithmetic of the complete binary tree of depth D over K = 2^D leaves,
// including the two read-only routing nodes that make the outermost
// 2^m leaves on each side unreachable when the bandwidth h > 0 (m = log2(K h)).
class TreeShape {
 public:
  // Throws std::invalid_argument unless depth >= 1 and, for h > 0, K h is a
  // power of two leaving at least one reachable leaf.
  TreeShape(int depth, double h);

  int depth() const { return depth_; }
  std::uint32_t num_leaves() const { return num_leaves_; }
  std::uint32_t num_internal() const { return num_leaves_ - 1; }
  double bandwidth() const { return h_; }
  std::optional<int> boundary_exponent() const { return m_sharp_; }

  static constexpr NodeId root() { return {0}; }
  static constexpr NodeId left(NodeId v) { return {2 * v.id + 1}; }
  static constexpr NodeId right(NodeId v) { return {2 * v.id + 2}; }
  static constexpr NodeId child(NodeId v, Branch b) {
    return b == Branch::left ? left(v) : right(v);
  }
  static constexpr NodeId parent(NodeId v) { return {(v.id - 1) / 2}; }
  static constexpr bool is_left_child(NodeId v) { return v.id % 2 == 1; }
  static constexpr NodeId sibling(NodeId v) { return {is_left_child(v) ? v.id + 1 : v.id - 1}; }
  static int level(NodeId v);

  bool contains(NodeId v) const { return v.id < 2 * num_leaves_ - 1; }
  bool is_leaf(NodeId v) const { return v.id >= num_leaves_ - 1 && contains(v); }
  NodeId leaf(std::uint32_t index) const { return {num_leaves_ - 1 + index}; }
  DiscretizedAction label(NodeId leaf) const;
  LeafRange leaf_range(NodeId v) const;

  std::optional<NodeId> only_right_id() const;
  std::optional<NodeId> only_left_id() const;
  // Constant branch of a read-only routing node, nullopt for ordinary nodes.
  std::optional<Branch> fixed_branch(NodeId v) const {
    if (only_right_ && v == *only_right_) return Branch::right;
    if (only_left_ && v == *only_left_) return Branch::left;
    return std::nullopt;
  }
  LeafRange reachable_leaves() const;

  // Walks from `start` to a leaf; `decide(NodeId)` is called once per
  // internal node visited.
  template <class Decide>
  NodeId descend(NodeId start, Decide&& decide) const {
    NodeId v = start;
    while (!is_leaf(v)) v = child(v, decide(v));
    return v;
  }

  bool operator==(const TreeShape&) const = default;

 private:
  int depth_;
  std::uint32_t num_leaves_;
  double h_;
  std::optional<int> m_sharp_;
  std::optional<NodeId> only_right_;
  std::optional<NodeId> only_left_;
};

// Largest admissible bandwidth <= h for K leaves (K h a power of two), or
// nullopt when even K h = 1 exceeds h.
std::optional<double> admissible_bandwidth(std::uint32_t num_leaves, double h);

struct ModelFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ModelTruncatedError : ModelFormatError {
  using ModelFormatError::ModelFormatError;
};
struct ModelVersionError : ModelFormatError {
  using ModelFormatError::ModelFormatError;
};
struct ModelChecksumError : ModelFormatError {
  using ModelFormatError::ModelFormatError;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

// Tree policy with one online base learner per internal node. Routing is
// read-only; learner updates need exclusive access to the whole tree.
class TreePolicy {
 public:
  TreePolicy(int depth, double h, const BaseLearnerConfig& learner_config);

  const TreeShape& shape() const { return shape_; }
  int depth() const { return shape_.depth(); }
  std::uint32_t num_actions() const { return shape_.num_leaves(); }
  double bandwidth() const { return shape_.bandwidth(); }
  const BaseLearnerConfig& learner_config() const { return config_; }

  Branch decide(NodeId v, Context x) const {
    if (auto fixed = shape_.fixed_branch(v)) return *fixed;
    return learners_[v.id].predict(x);
  }

  DiscretizedAction get_action(Context x) const { return subtree_action(TreeShape::root(), x); }
  DiscretizedAction subtree_action(NodeId v, Context x) const;

  BaseLearner& learner(NodeId v) { return learners_.at(v.id); }
  const BaseLearner& learner(NodeId v) const { return learners_.at(v.id); }

  std::vector<std::uint8_t> serialize() const;
  static TreePolicy deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static TreePolicy load(const std::filesystem::path& path);

  bool operator==(const TreePolicy&) const = default;

 private:
  TreeShape shape_;
  BaseLearnerConfig config_;
  std::vector<BaseLearner> learners_;  // indexed by internal node id
};

}  // namespace cats
