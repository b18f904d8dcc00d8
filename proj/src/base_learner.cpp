#include "cats/base_learner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cats {

void BaseLearnerConfig::validate() const {
  if (feature_dim == 0) throw std::invalid_argument("feature_dim must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning_rate must be a positive finite number");
  }
  if (update_rule != UpdateRule::fixed_rate && update_rule != UpdateRule::inverse_sqrt) {
    throw std::invalid_argument("unknown update rule");
  }
}

BaseLearner::BaseLearner(const BaseLearnerConfig& config)
    : config_(config), dim_(config.feature_dim), weights_(2 * (config.feature_dim + 1), 0.0) {
  config.validate();
}

void BaseLearner::check_dim(Context x) const {
  if (x.size() != dim_) {
    throw std::invalid_argument("context has " + std::to_string(x.size()) +
                                " features, learner expects " + std::to_string(dim_));
  }
}

double BaseLearner::predicted_cost(Branch b, Context x) const {
  check_dim(x);
  const double* w = weights_.data() + (b == Branch::left ? 0 : dim_ + 1);
  double s = w[dim_];
  for (std::size_t i = 0; i < dim_; ++i) s += w[i] * x[i];
  return s;
}

Branch BaseLearner::predict(Context x) const {
  check_dim(x);
  const double* wl = weights_.data();
  const double* wr = wl + dim_ + 1;
  double left = wl[dim_];
  double right = wr[dim_];
  for (std::size_t i = 0; i < dim_; ++i) {
    left += wl[i] * x[i];
    right += wr[i] * x[i];
  }
  return left <= right ? Branch::left : Branch::right;
}

double BaseLearner::step_size() const {
  if (config_.update_rule == UpdateRule::fixed_rate) return config_.learning_rate;
  return config_.learning_rate / std::sqrt(1.0 + static_cast<double>(update_count_));
}

void BaseLearner::learn(const BinaryCostExample& e) {
  check_dim(e.x);
  if (!std::isfinite(e.cost_left) || !std::isfinite(e.cost_right)) {
    throw std::invalid_argument("binary costs must be finite");
  }
  const double eta = step_size();
  double* wl = weights_.data();
  double* wr = wl + dim_ + 1;
  double pl = wl[dim_];
  double pr = wr[dim_];
  for (std::size_t i = 0; i < dim_; ++i) {
    pl += wl[i] * e.x[i];
    pr += wr[i] * e.x[i];
  }
  // d/dw (w.x - c)^2 = 2 (w.x - c) x
  const double gl = 2.0 * (pl - e.cost_left);
  const double gr = 2.0 * (pr - e.cost_right);
  for (std::size_t i = 0; i < dim_; ++i) {
    wl[i] -= eta * gl * e.x[i];
    wr[i] -= eta * gr * e.x[i];
  }
  wl[dim_] -= eta * gl;
  wr[dim_] -= eta * gr;
  ++update_count_;
}

void BaseLearner::restore(std::span<const double> left, std::span<const double> right,
                          std::uint64_t update_count) {
  if (left.size() != dim_ + 1 || right.size() != dim_ + 1) {
    throw std::invalid_argument("weight block size does not match the feature dimension");
  }
  std::copy(left.begin(), left.end(), weights_.begin());
  std::copy(right.begin(), right.end(), weights_.begin() + static_cast<std::ptrdiff_t>(dim_ + 1));
  update_count_ = update_count;
}

}  // namespace cats
