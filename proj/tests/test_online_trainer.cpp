#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "cats/online_trainer.hpp"
#include "cats/smoothing_kernel.hpp"
#include "oracles.hpp"

using namespace cats;

namespace {

BaseLearnerConfig config(std::size_t dim = 1) {
  BaseLearnerConfig c;
  c.feature_dim = dim;
  return c;
}

}  // namespace

TEST_SUITE("online_trainer") {
  TEST_CASE("IPS cost construction") {
    const TreeShape s(3, 0.25);
    const PiecewiseCost c = make_ips_cost(s, 0.4, 1.0, 0.5);
    CHECK(c.c_star == 1.0);
    CHECK(c.a_min_index == 2);
    CHECK(c.a_max_index == 5);
    CHECK(make_ips_cost(s, 0.4, 1.25, 0.5).c_star == doctest::Approx(0.8).epsilon(1e-15));

    const TreeShape d(3, 0.0);
    const PiecewiseCost p = make_ips_cost(d, 0.375, 0.5, 0.2);
    CHECK(p.a_min_index == 3);
    CHECK(p.a_max_index == 3);
    CHECK(p.c_star == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(make_ips_cost(d, 1.0, 1.0, 0.2).a_min_index == 7);

    // Windows near the edges are cut at the grid.
    const PiecewiseCost edge = make_ips_cost(s, 0.02, 1.0, 0.5);
    CHECK(edge.a_min_index == 0);
    CHECK(edge.a_max_index == 2);
  }

  TEST_CASE("IPS cost rejects bad inputs") {
    const TreeShape s(3, 0.25);
    CHECK_THROWS_AS(make_ips_cost(s, 0.4, 0.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(make_ips_cost(s, 0.4, -1.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(make_ips_cost(s, 0.4, 1.0, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(make_ips_cost(s, 1.4, 1.0, 0.5), std::invalid_argument);
  }

  TEST_CASE("cost lookup") {
    const PiecewiseCost c{2, 5, 1.0};
    CHECK(cost_at(c, 3, 8) == 1.0);
    CHECK(cost_at(c, 6, 8) == 0.0);
    CHECK(cost_at(c, 2, 8) == 1.0);
    CHECK_THROWS_AS(cost_at(c, 8, 8), std::out_of_range);
  }

  TEST_CASE("cost vector matches the smoothed IPS formula on reachable actions") {
    Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
      const int depth = 3 + static_cast<int>(uniform01(rng) * 4);  // K in 8..64
      const int m = static_cast<int>(uniform01(rng) * (depth - 1));
      const double h = std::ldexp(1.0, m - depth);
      const TreeShape s(depth, h);
      const SmoothingKernel kernel(h);
      const double a = uniform01(rng);
      const double p = 0.05 + uniform01(rng);
      const double loss = uniform01(rng);
      const PiecewiseCost c = make_ips_cost(s, a, p, loss);
      const LeafRange band = s.reachable_leaves();
      for (std::uint32_t i = band.first; i <= band.last; ++i) {
        const double expected = loss / p * kernel.density(static_cast<double>(i) / s.num_leaves(), a);
        CHECK(cost_at(c, i, s.num_leaves()) == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("return cost cases") {
    const PiecewiseCost c{2, 5, 3.0};
    const NodeId alpha{8}, beta{11};
    CHECK(return_cost(c, NodeId{7}, alpha, beta, 1.0, 2.0) == 0.0);
    CHECK(return_cost(c, NodeId{12}, alpha, beta, 1.0, 2.0) == 0.0);
    CHECK(return_cost(c, NodeId{9}, alpha, beta, 1.0, 2.0) == 3.0);
    CHECK(return_cost(c, alpha, alpha, beta, 1.0, 2.0) == 1.0);
    CHECK(return_cost(c, beta, alpha, beta, 1.0, 2.0) == 2.0);
    CHECK_THROWS_AS(return_cost(c, NodeId{3}, alpha, beta, 1.0, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(return_cost(c, NodeId{9}, beta, alpha, 1.0, 2.0), std::invalid_argument);
  }

  TEST_CASE("golden trace") {
    TreePolicy t(3, 0.125, config());
    const std::vector<double> x{0.5};
    const PiecewiseCost c = make_ips_cost(t, 0.5, 1.0, 0.5);
    REQUIRE(c == PiecewiseCost{3, 5, 2.0});
    const UpdateTrace trace = online_train_tree(t, x, c);
    CHECK(trace.to_text() == "2 4 0 2\n1 2 2 0\n");
    CHECK_FALSE(trace.clamped);
    CHECK(t.learner(NodeId{4}).update_count() == 1);
    CHECK(t.learner(NodeId{2}).update_count() == 1);
    CHECK(t.learner(NodeId{0}).update_count() == 0);
  }

  TEST_CASE("updates are confined to the band-end paths and skip routing nodes") {
    TreePolicy t(3, 0.25, config());
    Rng rng(6);
    oracle::randomize(t, rng);
    const std::vector<double> x{0.2};
    const PiecewiseCost c{2, 5, 1.7};
    const UpdateTrace trace = online_train_tree(t, x, c);
    std::set<std::uint32_t> allowed;
    for (auto v : oracle::path_to_root(t.shape(), 2)) allowed.insert(v.id);
    for (auto v : oracle::path_to_root(t.shape(), 5)) allowed.insert(v.id);
    for (const auto& u : trace.updates) {
      CHECK(allowed.count(u.node.id) == 1);
      CHECK_FALSE(t.shape().fixed_branch(u.node));
    }
    CHECK(trace.learner_updates() <= 6);
  }

  TEST_CASE("point-mass cost updates a single path") {
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
      TreePolicy t(5, 0.0, config(2));
      oracle::randomize(t, rng);
      const auto x = oracle::random_context(2, rng);
      const auto idx = static_cast<std::uint32_t>(uniform01(rng) * 32);
      const UpdateTrace trace = online_train_tree(t, x, PiecewiseCost{idx, idx, 1.0});
      CHECK(trace.learner_updates() <= 5);
      const auto path = oracle::path_to_root(t.shape(), idx);
      for (const auto& u : trace.updates) {
        CHECK(std::find(path.begin(), path.end(), u.node) != path.end());
      }
    }
  }

  TEST_CASE("zero loss updates nothing") {
    TreePolicy t(4, 0.125, config());
    Rng rng(8);
    oracle::randomize(t, rng);
    const TreePolicy before = t;
    const std::vector<double> x{0.3};
    const UpdateTrace trace = online_train_tree(t, x, make_ips_cost(t, 0.5, 1.0, 0.0));
    CHECK(trace.updates.empty());
    CHECK(t == before);
  }

  TEST_CASE("bands outside the reachable leaves are clamped and flagged") {
    TreePolicy t(4, 0.125, config());  // m = 1, reachable leaves 2..13
    const std::vector<double> x{0.3};
    const PiecewiseCost c = make_ips_cost(t, 0.0, 1.0, 0.5);
    REQUIRE(c.a_min_index == 0);
    const UpdateTrace trace = online_train_tree(t, x, c);
    CHECK(trace.clamped);
    CHECK(trace.stored_costs.front().node == t.shape().leaf(2));
    CHECK_THROWS_AS(online_train_tree(t, x, PiecewiseCost{3, 2, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(online_train_tree(t, x, PiecewiseCost{3, 16, 1.0}), std::invalid_argument);
  }

  TEST_CASE("agrees with the brute-force oracle on random instances") {
    Rng rng(99);
    for (int trial = 0; trial < 300; ++trial) {
      const int depth = 2 + static_cast<int>(uniform01(rng) * 4);
      const bool smooth = depth >= 2 && uniform01(rng) < 0.7;
      const double h = smooth ? std::ldexp(1.0, static_cast<int>(uniform01(rng) * (depth - 1)) - depth) : 0.0;
      TreePolicy t(depth, h, config(2));
      oracle::randomize(t, rng);
      const auto x = oracle::random_context(2, rng);
      PiecewiseCost c = make_ips_cost(t, uniform01(rng), 0.05 + uniform01(rng), uniform01(rng));
      if (t.shape().boundary_exponent()) clamp_to_reachable(t.shape(), c);

      const auto expected = oracle::brute_force_update(t, x, c);
      const UpdateTrace trace = online_train_tree(t, x, c);
      std::vector<TraceUpdate> want;
      for (const auto& n : expected.updated) {
        if (!n.fixed) want.push_back({n.level, n.node, n.cost_left, n.cost_right});
      }
      CHECK(trace.updates == want);
      CHECK(t == expected.tree);
      for (const auto& s : trace.stored_costs) {
        CHECK(s.cost == cost_at(c, t.subtree_action(s.node, x).index, t.num_actions()));
      }
    }
  }
}
