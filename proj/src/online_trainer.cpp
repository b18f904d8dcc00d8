#include "cats/online_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cats {

PiecewiseCost make_ips_cost(const TreeShape& shape, double a_taken, double density, double loss) {
  if (!(density > 0.0) || !std::isfinite(density)) {
    throw std::invalid_argument("logged density must be positive and finite");
  }
  if (!(loss >= 0.0 && loss <= 1.0)) throw std::invalid_argument("loss must lie in [0, 1]");
  if (!(a_taken >= 0.0 && a_taken <= 1.0)) throw std::invalid_argument("action must lie in [0, 1]");

  const auto k = static_cast<double>(shape.num_leaves());
  const auto last = static_cast<std::int64_t>(shape.num_leaves()) - 1;
  const double h = shape.bandwidth();
  PiecewiseCost c;
  if (h == 0.0) {
    const auto i = std::clamp(static_cast<std::int64_t>(std::llround(k * a_taken)), std::int64_t{0}, last);
    c.a_min_index = c.a_max_index = static_cast<std::uint32_t>(i);
    c.c_star = loss / density;
    return c;
  }
  // K a and K h are exact (K is a power of two), so are the band edges.
  const double ka = k * a_taken;
  const double kh = k * h;
  const auto lo = static_cast<std::int64_t>(std::ceil(ka - kh));
  const auto hi = static_cast<std::int64_t>(std::floor(ka + kh));
  c.a_min_index = static_cast<std::uint32_t>(std::max<std::int64_t>(0, lo));
  c.a_max_index = static_cast<std::uint32_t>(std::min(last, hi));
  c.c_star = loss / (2.0 * h * density);
  return c;
}

double cost_at(const PiecewiseCost& c, std::uint32_t index, std::uint32_t num_actions) {
  if (index >= num_actions) {
    throw std::out_of_range("action index " + std::to_string(index) + " outside [0, " +
                            std::to_string(num_actions) + ")");
  }
  return (index >= c.a_min_index && index <= c.a_max_index) ? c.c_star : 0.0;
}

bool clamp_to_reachable(const TreeShape& shape, PiecewiseCost& c) {
  const LeafRange r = shape.reachable_leaves();
  const PiecewiseCost before = c;
  c.a_min_index = std::clamp(c.a_min_index, r.first, r.last);
  c.a_max_index = std::clamp(c.a_max_index, r.first, r.last);
  return !(c == before);
}

double return_cost(const PiecewiseCost& c, NodeId w, NodeId alpha, NodeId beta, double alpha_cost,
                   double beta_cost) {
  const int d = TreeShape::level(w);
  if (TreeShape::level(alpha) != d || TreeShape::level(beta) != d || alpha > beta) {
    throw std::invalid_argument("return_cost needs w, alpha <= beta on one level");
  }
  if (w < alpha || w > beta) return 0.0;
  if (alpha < w && w < beta) return c.c_star;
  return w == alpha ? alpha_cost : beta_cost;
}

std::string UpdateTrace::to_text() const {
  std::ostringstream out;
  out.precision(17);
  for (const TraceUpdate& u : updates) {
    out << u.level << ' ' << u.node.id << ' ' << u.cost_left << ' ' << u.cost_right << '\n';
  }
  return out.str();
}

void online_train_tree(TreePolicy& tree, Context x, PiecewiseCost c, UpdateTrace& trace) {
  const TreeShape& shape = tree.shape();
  if (c.a_min_index > c.a_max_index || c.a_max_index >= shape.num_leaves()) {
    throw std::invalid_argument("cost band does not fit the tree");
  }
  trace.updates.clear();
  trace.stored_costs.clear();
  trace.clamped = false;
  if (shape.boundary_exponent()) trace.clamped = clamp_to_reachable(shape, c);

  NodeId alpha = shape.leaf(c.a_min_index);
  NodeId beta = shape.leaf(c.a_max_index);
  double alpha_cost = c.c_star;
  double beta_cost = c.c_star;
  trace.stored_costs.push_back({alpha, alpha_cost});
  if (beta != alpha) trace.stored_costs.push_back({beta, beta_cost});

  // Updates parent(v) from v's cost and its sibling's; returns parent(v)'s cost.
  const auto climb = [&](NodeId v, int parent_level) {
    const NodeId u = TreeShape::parent(v);
    const double v_cost = (v == alpha) ? alpha_cost : beta_cost;
    const double w_cost = return_cost(c, TreeShape::sibling(v), alpha, beta, alpha_cost, beta_cost);
    const bool v_left = TreeShape::is_left_child(v);
    const double cost_left = v_left ? v_cost : w_cost;
    const double cost_right = v_left ? w_cost : v_cost;

    Branch route;
    if (auto fixed = shape.fixed_branch(u)) {
      route = *fixed;
    } else {
      BaseLearner& learner = tree.learner(u);
      if (cost_left != cost_right) {
        learner.learn({x, cost_left, cost_right});
        trace.updates.push_back({parent_level, u, cost_left, cost_right});
      }
      route = learner.predict(x);
    }
    const double u_cost = route == Branch::left ? cost_left : cost_right;
    trace.stored_costs.push_back({u, u_cost});
    return u_cost;
  };

  for (int d = shape.depth(); d >= 1; --d) {
    const NodeId alpha_parent = TreeShape::parent(alpha);
    const NodeId beta_parent = TreeShape::parent(beta);
    double next_alpha_cost = 0.0;
    double next_beta_cost = 0.0;
    if (alpha_parent != beta_parent) {
      next_alpha_cost = climb(alpha, d - 1);
      next_beta_cost = climb(beta, d - 1);
    } else {
      next_alpha_cost = next_beta_cost = climb(alpha, d - 1);
    }
    alpha = alpha_parent;
    beta = beta_parent;
    alpha_cost = next_alpha_cost;
    beta_cost = next_beta_cost;
  }
}

}  // namespace cats
