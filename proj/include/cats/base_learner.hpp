#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cats {

using Context = std::span<const double>;

enum class Branch : std::uint8_t { left = 0, right = 1 };

enum class UpdateRule : std::uint8_t {
  fixed_rate = 0,
  inverse_sqrt = 1,  // step = learning_rate / sqrt(1 + updates so far)
};

struct BaseLearnerConfig {
  std::size_t feature_dim = 1;
  UpdateRule update_rule = UpdateRule::inverse_sqrt;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const BaseLearnerConfig&) const = default;
};

struct BinaryCostExample {
  Context x;
  double cost_left = 0.0;
  double cost_right = 0.0;
};

// Online binary cost-sensitive learner at one tree node.
//
// Two affine least-squares regressors predict the cost of taking the left
// and the right branch; the node routes to the branch with the lower
// prediction, preferring left on ties. Weights are stored as
// [left (dim + 1) | right (dim + 1)], the last entry of each half being the
// intercept.
class BaseLearner {
 public:
  BaseLearner() = default;
  explicit BaseLearner(const BaseLearnerConfig& config);

  // Zero weights, zero update count.
  static BaseLearner reset(const BaseLearnerConfig& config) { return BaseLearner(config); }

  Branch predict(Context x) const;
  double predicted_cost(Branch b, Context x) const;

  void learn(const BinaryCostExample& e);

  std::size_t feature_dim() const { return dim_; }
  std::span<const double> weights_left() const { return {weights_.data(), dim_ + 1}; }
  std::span<const double> weights_right() const {
    return {weights_.data() + dim_ + 1, dim_ + 1};
  }
  std::uint64_t update_count() const { return update_count_; }
  const BaseLearnerConfig& config() const { return config_; }

  // Used by model deserialization.
  void restore(std::span<const double> left, std::span<const double> right,
               std::uint64_t update_count);

  bool operator==(const BaseLearner&) const = default;

 private:
  void check_dim(Context x) const;
  double step_size() const;

  BaseLearnerConfig config_{};
  std::size_t dim_ = 0;
  std::vector<double> weights_;
  std::uint64_t update_count_ = 0;
};

}  // namespace cats
