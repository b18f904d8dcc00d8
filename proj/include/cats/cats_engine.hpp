#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "cats/online_trainer.hpp"
#include "cats/random.hpp"
#include "cats/smoothing_kernel.hpp"
#include "cats/tree_policy.hpp"

namespace cats {

// One logged round. For h > 0 `density` is the mixture density of the
// logging policy at `action`; for h = 0 it is the probability mass of the
// grid action.
struct InteractionRecord {
  std::uint64_t round = 0;
  double action = 0.0;
  double density = 1.0;
  double loss = 0.0;
  std::vector<double> x;

  bool operator==(const InteractionRecord&) const = default;
};

struct EngineConfig {
  double epsilon = 0.05;
  double bandwidth = 0.25;
  int depth = 2;
  BaseLearnerConfig learner{};
  std::uint64_t seed = 0;
  bool keep_log = true;
};

struct ActionChoice {
  double action = 0.0;
  double density = 0.0;
  bool explored = false;
};

// Smoothed epsilon-greedy contextual bandit learner over a tree policy.
//
// act() and observe() strictly alternate. With probability epsilon the
// action is uniform on [0, 1]; otherwise it is drawn from the smoothing of
// the tree's action. With h = 0 the action space is the grid itself and
// uniform draws are quantized to it.
class Engine {
 public:
  explicit Engine(const EngineConfig& config);

  const ActionChoice& act(Context x);
  const UpdateTrace& observe(double loss);

  // Mean observed loss over all completed rounds. Throws before round 1.
  double progressive_loss() const;
  std::uint64_t rounds() const { return rounds_; }

  const std::vector<InteractionRecord>& export_log() const { return log_; }
  const TreePolicy& tree() const { return tree_; }
  const EngineConfig& config() const { return config_; }

  // Logging-policy density (or mass, h = 0) of `action` when the tree
  // recommends `greedy`.
  double mixture_density(DiscretizedAction greedy, double action) const;

 private:
  EngineConfig config_;
  TreePolicy tree_;
  SmoothingKernel kernel_;
  Rng rng_;
  std::vector<double> pending_x_;
  std::optional<ActionChoice> pending_;
  ActionChoice last_;
  UpdateTrace trace_;
  std::vector<InteractionRecord> log_;
  std::uint64_t rounds_ = 0;
  double loss_sum_ = 0.0;
};

// Tab-separated log lines:
//   round \t action \t density \t loss \t i:v i:v ...
// Reals use 17 significant digits so a write/read round trip is exact.
void write_log(std::ostream& out, std::span<const InteractionRecord> records);
void write_record(std::ostream& out, const InteractionRecord& r);
// Missing feature indices read as 0; every record is padded to the largest
// index seen (or `feature_dim` when given).
std::vector<InteractionRecord> read_log(std::istream& in, std::size_t feature_dim = 0);

}  // namespace cats
