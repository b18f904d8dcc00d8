#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cats/cats_engine.hpp"
#include "cats/tree_policy.hpp"

namespace cats {

struct RegressionExample {
  std::vector<double> x;
  double y = 0.0;  // in [0, 1]
};

// Absolute loss of action a against target y; both in [0, 1].
inline double absolute_loss(double a, double y) { return a > y ? a - y : y - a; }

struct TargetScaling {
  enum class Kind { minmax, fixed } kind = Kind::minmax;
  double min = 0.0;  // used by fixed; filled in by minmax
  double max = 1.0;

  static TargetScaling minmax() { return {}; }
  static TargetScaling fixed(double lo, double hi) { return {Kind::fixed, lo, hi}; }

  // Maps raw targets into [0, 1]; a zero-width range maps to 0.5.
  double apply(double raw) const;
  double invert(double scaled) const;
};

struct Dataset {
  std::vector<RegressionExample> examples;
  TargetScaling scaling;  // min/max actually used
  std::size_t skipped_rows = 0;
};

// Numeric CSV; a first row that does not parse is taken as a header.
// `target` is a header name or a zero-based column index; the last column
// when absent. Rows with a missing/NaN target or a non-numeric feature are
// skipped and counted.
Dataset ingest_csv(const std::filesystem::path& path, const std::optional<std::string>& target,
                   TargetScaling scaling = TargetScaling::minmax());

// Standard normal features, y = w.x + N(0, noise_sd^2) with w ~ N(0, I) drawn
// from the seed, then min-max scaled over the batch.
Dataset synth_ds(std::size_t n, std::size_t dim, double noise_sd, std::uint64_t seed);

struct Split {
  std::vector<RegressionExample> train;
  std::vector<RegressionExample> test;
};

// Seeded shuffle, then the first `train_fraction` of the rows train.
Split train_test_split(std::span<const RegressionExample> examples, double train_fraction, std::uint64_t seed);

struct RunMetrics {
  double progressive_loss = 0.0;
  double ns_per_example = 0.0;
  std::uint64_t rounds = 0;
  std::uint64_t learner_updates = 0;
  std::uint64_t max_updates_per_round = 0;
};

// Streams the examples through the engine as bandit rounds with loss |a - y|.
RunMetrics run_online(std::span<const RegressionExample> stream, Engine& engine);

// Discrete epsilon-greedy over the K grid actions with one least-squares
// cost regressor per action, trained on plain IPS costs: O(K) per round.
class DLinear {
 public:
  DLinear(std::uint32_t num_actions, double epsilon, const BaseLearnerConfig& learner, std::uint64_t seed);

  std::uint32_t greedy_index(Context x) const;
  // Returns (action, probability mass).
  std::pair<double, double> act(Context x);
  void observe(double loss);

  std::uint32_t num_actions() const { return k_; }
  std::uint64_t updates_last_round() const { return last_updates_; }

 private:
  double predict(std::uint32_t arm, Context x) const;

  std::uint32_t k_;
  double epsilon_;
  BaseLearnerConfig config_;
  std::size_t stride_;
  std::vector<double> weights_;  // K blocks of (dim + 1)
  std::uint64_t updates_ = 0;
  std::uint64_t last_updates_ = 0;
  Rng rng_;
  std::vector<double> pending_x_;
  std::uint32_t pending_index_ = 0;
  double pending_p_ = 0.0;
  bool pending_ = false;
};

RunMetrics run_baseline_dlinear(std::span<const RegressionExample> stream, std::uint32_t num_actions,
                                double epsilon, const BaseLearnerConfig& learner, std::uint64_t seed);

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 1.0;
};

// Exact binomial (Clopper-Pearson) interval for a proportion.
ConfidenceInterval clopper_pearson(std::uint64_t successes, std::uint64_t trials, double confidence = 0.95);

struct TestEvaluation {
  double mean_loss = 0.0;
  ConfidenceInterval ci;  // Clopper-Pearson on ceil(sum of losses) of n
  std::size_t n = 0;
};

// Deploys the smoothed greedy policy: a ~ Smooth_h(T(x)), loss |a - y|.
TestEvaluation evaluate_test(const TreePolicy& tree, std::span<const RegressionExample> test, std::uint64_t seed);

// Interval treating a [0, 1]-valued loss sum as ceil(sum) successes of n.
TestEvaluation summarize_losses(std::span<const double> losses);

struct BenchRow {
  std::string algorithm;  // "cats", "dtree" or "dlinear"
  std::uint32_t num_actions = 0;
  double bandwidth = 0.0;
  double ns_per_example = 0.0;  // median over repetitions
};

struct BenchConfig {
  std::vector<int> depths{4, 5, 6, 7, 8, 9, 10, 11, 12, 13};
  std::vector<std::string> algorithms{"cats", "dtree", "dlinear"};
  double cats_bandwidth = 0.25;               // bandwidth for the K sweep
  std::vector<double> bandwidth_sweep;        // extra cats runs at the largest depth
  std::size_t reps = 5;
  std::size_t stream_length = 20000;
  std::size_t dlinear_budget = 4'000'000;     // caps K * examples per dlinear rep
  std::size_t feature_dim = 10;
  double epsilon = 0.05;
  std::uint64_t seed = 1;
};

std::vector<BenchRow> bench_timing(const BenchConfig& config);

}  // namespace cats
