#include "cats/offpolicy.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <istream>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cats/smoothing_kernel.hpp"

namespace cats {

FiniteBaseClass::FiniteBaseClass(std::vector<Classifier> members) : members_(std::move(members)) {
  if (members_.empty()) throw std::invalid_argument("a finite base class needs at least one member");
}

std::size_t exact_erm(const FiniteBaseClass& f, std::span<const BinaryCostSample> sample) {
  std::size_t best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < f.size(); ++i) {
    double total = 0.0;
    for (const auto& s : sample) total += f.apply(i, s.x) == Branch::left ? s.cost_left : s.cost_right;
    if (total < best_cost) {
      best_cost = total;
      best = i;
    }
  }
  return best;
}

FiniteClassTree::FiniteClassTree(int depth, double h, const FiniteBaseClass& f)
    : shape_(depth, h), class_(&f), choice_(shape_.num_internal(), 0) {}

DiscretizedAction FiniteClassTree::subtree_action(NodeId v, Context x) const {
  return shape_.label(shape_.descend(v, [&](NodeId u) { return decide(u, x); }));
}

void FiniteClassTree::set_choice(NodeId v, std::size_t member) {
  if (member >= class_->size()) throw std::out_of_range("no such class member");
  choice_.at(v.id) = member;
}

std::pair<std::size_t, std::size_t> level_block(std::size_t n, int depth, int level) {
  if (depth < 1 || level < 0 || level >= depth) throw std::invalid_argument("level outside the tree");
  const std::size_t block = n / static_cast<std::size_t>(depth);
  const auto offset = static_cast<std::size_t>(depth - level - 1);
  return {offset * block, (offset + 1) * block};
}

FiniteClassTree train_tree_partitioned(int depth, double h, std::span<const CostSensitiveExample> examples,
                                       const FiniteBaseClass& f) {
  FiniteClassTree tree(depth, h, f);
  if (examples.size() < static_cast<std::size_t>(depth)) {
    throw std::invalid_argument("partitioned training needs at least one example per level");
  }
  const TreeShape& shape = tree.shape();
  const std::uint32_t k = shape.num_leaves();
  std::vector<BinaryCostSample> sample;
  for (int d = depth - 1; d >= 0; --d) {
    const auto [first, last] = level_block(examples.size(), depth, d);
    const std::uint32_t level_begin = (std::uint32_t{1} << d) - 1;
    for (std::uint32_t id = level_begin; id < 2 * level_begin + 1; ++id) {
      const NodeId v{id};
      if (shape.fixed_branch(v)) continue;
      sample.clear();
      for (std::size_t s = first; s < last; ++s) {
        const auto& e = examples[s];
        const double cl = cost_at(e.cost, tree.subtree_action(TreeShape::left(v), e.x).index, k);
        const double cr = cost_at(e.cost, tree.subtree_action(TreeShape::right(v), e.x).index, k);
        if (cl != cr) sample.push_back({e.x, cl, cr});
      }
      tree.set_choice(v, exact_erm(f, sample));
    }
  }
  return tree;
}

TreePolicy train_tree_full(int depth, double h, std::span<const CostSensitiveExample> examples,
                           const BaseLearnerConfig& learner, std::size_t passes) {
  TreePolicy tree(depth, h, learner);
  UpdateTrace trace;
  for (std::size_t p = 0; p < passes; ++p) {
    for (const auto& e : examples) online_train_tree(tree, e.x, e.cost, trace);
  }
  return tree;
}

TreePolicy train_tree_full(int depth, double h, std::span<const InteractionRecord> log,
                           const BaseLearnerConfig& learner, std::size_t passes) {
  TreePolicy tree(depth, h, learner);
  UpdateTrace trace;
  for (std::size_t p = 0; p < passes; ++p) {
    for (const auto& r : log) {
      online_train_tree(tree, r.x, make_ips_cost(tree, r.action, r.density, r.loss), trace);
    }
  }
  return tree;
}

double ips_value(std::span<const InteractionRecord> log, const TreePolicy& tree) {
  if (log.empty()) throw std::invalid_argument("IPS value of an empty log");
  const double h = tree.bandwidth();
  double sum = 0.0;
  if (h == 0.0) {
    for (const auto& r : log) {
      if (tree.get_action(r.x).value() == r.action) sum += r.loss / r.density;
    }
  } else {
    const SmoothingKernel kernel(h);
    for (const auto& r : log) {
      sum += kernel.density(tree.get_action(r.x).value(), r.action) / r.density * r.loss;
    }
  }
  return sum / static_cast<double>(log.size());
}

std::vector<GridSpec> default_grid() {
  std::vector<GridSpec> grid;
  for (int j = 13; j >= 1; --j) {      // h = 2^-j
    for (int d = 2; d <= 13; ++d) {    // K = 2^d
      const int hk = d - j;            // log2(h K)
      if (hk >= 0 && hk <= 11) grid.push_back({std::ldexp(1.0, -j), std::uint32_t{1} << d});
    }
  }
  return grid;
}

double srm_penalty(double g_hat, double sigma) { return std::sqrt(g_hat * sigma) + sigma; }

LogDensityError::LogDensityError(std::size_t i, double density, double p_min)
    : std::invalid_argument("log record " + std::to_string(i) + " has density " + std::to_string(density) +
                            " below p_min " + std::to_string(p_min)),
      index(i) {}

namespace {

struct PlannedPoint {
  std::size_t report_index;
  int depth;
  double h;
};

int log2_exact(std::uint32_t k) {
  if (k < 2 || (k & (k - 1)) != 0) return -1;
  return std::countr_zero(k);
}

}  // namespace

CatsOffResult cats_off(std::span<const InteractionRecord> log, std::span<const GridSpec> grid,
                       const SrmConfig& srm, const BaseLearnerConfig& learner, const CatsOffOptions& options) {
  if (grid.empty()) throw std::invalid_argument("empty model-selection grid");
  if (log.empty()) throw std::invalid_argument("empty interaction log");
  if (!(srm.p_min > 0.0)) throw std::invalid_argument("p_min must be positive");
  if (!(srm.delta > 0.0 && srm.delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (!(log[i].density >= srm.p_min)) throw LogDensityError(i, log[i].density, srm.p_min);
    if (log[i].x.size() != learner.feature_dim) {
      throw std::invalid_argument("log record " + std::to_string(i) + " has " + std::to_string(log[i].x.size()) +
                                  " features, learner expects " + std::to_string(learner.feature_dim));
    }
  }

  std::vector<GridPoint> report(grid.size());
  std::vector<PlannedPoint> plan;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    GridPoint& g = report[i];
    g.requested = grid[i];
    g.num_actions = grid[i].num_actions;
    const int depth = log2_exact(grid[i].num_actions);
    if (depth < 1) {
      g.note = "K is not a power of two >= 2";
      continue;
    }
    if (!(grid[i].bandwidth > 0.0)) {
      g.note = "bandwidth must be positive";
      continue;
    }
    const auto h = admissible_bandwidth(grid[i].num_actions, grid[i].bandwidth);
    if (!h) {
      g.note = "K h < 1";
      continue;
    }
    g.bandwidth = *h;
    if (*h != grid[i].bandwidth) g.note = "bandwidth rounded down to " + std::to_string(*h);
    try {
      TreeShape probe(depth, *h);
    } catch (const std::invalid_argument& e) {
      g.note = e.what();
      continue;
    }
    const bool duplicate = std::any_of(plan.begin(), plan.end(), [&](const PlannedPoint& p) {
      return p.depth == depth && p.h == *h;
    });
    if (duplicate) {
      g.note = "duplicate of an earlier grid point";
      continue;
    }
    plan.push_back({i, depth, *h});
  }
  if (plan.empty()) throw std::invalid_argument("no buildable point in the model-selection grid");

  const double t = static_cast<double>(log.size());
  const double scale = srm.penalty_scale.value_or(
      64.0 * std::log(4.0 * t * static_cast<double>(plan.size()) / srm.delta));

  std::vector<std::optional<TreePolicy>> trees(grid.size());
  const auto run_point = [&](const PlannedPoint& p) {
    TreePolicy tree(p.depth, p.h, learner);
    UpdateTrace trace;
    const std::uint32_t k = tree.num_actions();
    double g_sum = 0.0;
    for (const auto& r : log) {
      const PiecewiseCost cost = make_ips_cost(tree, r.action, r.density, r.loss);
      g_sum += cost_at(cost, tree.get_action(r.x).index, k);  // score T_t before training on round t
      online_train_tree(tree, r.x, cost, trace);
    }
    GridPoint& g = report[p.report_index];
    g.evaluated = true;
    g.g_hat = g_sum / t;
    g.sigma = scale / (t * srm.p_min * p.h);
    g.penalty = srm_penalty(g.g_hat, g.sigma);
    trees[p.report_index] = std::move(tree);
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(options.threads, plan.size()));
  if (workers == 1) {
    for (const auto& p : plan) run_point(p);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < plan.size(); i = next++) run_point(plan[i]);
      });
    }
  }

  std::size_t best = plan.front().report_index;
  for (const auto& p : plan) {
    const GridPoint& g = report[p.report_index];
    const GridPoint& b = report[best];
    if (g.g_hat + g.penalty < b.g_hat + b.penalty) best = p.report_index;
  }
  report[best].selected = true;

  TreePolicy model = *trees[best];
  if (!options.keep_all_trees) {
    trees.clear();
  }
  return CatsOffResult{std::move(report), best, scale, plan.size(), std::move(model), std::move(trees)};
}

std::string report_to_json(const CatsOffResult& result, const std::string& model_path) {
  nlohmann::json grid = nlohmann::json::array();
  for (const GridPoint& g : result.report) {
    nlohmann::json entry{{"h", g.bandwidth},
                         {"K", g.num_actions},
                         {"requested_h", g.requested.bandwidth},
                         {"evaluated", g.evaluated},
                         {"selected", g.selected}};
    if (g.evaluated) {
      entry["g_hat"] = g.g_hat;
      entry["penalty"] = g.penalty;
      entry["sigma"] = g.sigma;
    }
    if (!g.note.empty()) entry["note"] = g.note;
    grid.push_back(std::move(entry));
  }
  nlohmann::json doc{{"grid", std::move(grid)},
                     {"h_hat", result.h_hat()},
                     {"K_hat", result.k_hat()},
                     {"penalty_scale", result.penalty_scale},
                     {"grid_size", result.grid_size},
                     {"model", model_path}};
  return doc.dump(2);
}

std::vector<GridSpec> parse_grid(std::istream& in) {
  std::vector<GridSpec> grid;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    double h = 0.0;
    std::uint64_t k = 0;
    if (!(fields >> h)) continue;
    if (!(fields >> k) || k > std::numeric_limits<std::uint32_t>::max()) {
      throw std::runtime_error("malformed grid line " + std::to_string(line_no));
    }
    grid.push_back({h, static_cast<std::uint32_t>(k)});
  }
  return grid;
}

}  // namespace cats
