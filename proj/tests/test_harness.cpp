#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include "cats/harness.hpp"

using namespace cats;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& body) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << body;
  return path;
}

EngineConfig engine_config(double eps, double h, int depth, std::size_t dim) {
  EngineConfig c;
  c.epsilon = eps;
  c.bandwidth = h;
  c.depth = depth;
  c.learner.feature_dim = dim;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("CSV ingestion with min-max scaling") {
    const auto path = write_temp("cats_h1.csv", "a,b,y\n1,2,2\n3,4,4\n5,6,6\n");
    const Dataset d = ingest_csv(path, std::nullopt);
    REQUIRE(d.examples.size() == 3);
    CHECK(d.examples[0].y == 0.0);
    CHECK(d.examples[1].y == 0.5);
    CHECK(d.examples[2].y == 1.0);
    CHECK(d.examples[1].x == std::vector<double>{3.0, 4.0});
    CHECK(d.scaling.min == 2.0);
    CHECK(d.scaling.max == 6.0);
    CHECK(d.scaling.invert(0.5) == 4.0);

    const Dataset by_name = ingest_csv(path, std::string("a"));
    CHECK(by_name.examples[2].x == std::vector<double>{6.0, 6.0});
    CHECK(by_name.examples[2].y == 1.0);
    CHECK_THROWS_AS(ingest_csv(path, std::string("missing")), std::invalid_argument);
    std::filesystem::remove(path);
  }

  TEST_CASE("CSV edge cases") {
    const auto constant = write_temp("cats_h2.csv", "1,7\n2,7\n3,7\n");
    for (const auto& e : ingest_csv(constant, std::nullopt).examples) CHECK(e.y == 0.5);
    std::filesystem::remove(constant);

    const auto fixed = write_temp("cats_h3.csv", "0.1,2.5\n0.2,nan\n0.3,\nabc,1\n0.4,20\n");
    const Dataset d = ingest_csv(fixed, std::string("1"), TargetScaling::fixed(0, 10));
    REQUIRE(d.examples.size() == 2);
    CHECK(d.examples[0].y == 0.25);
    CHECK(d.examples[1].y == 1.0);  // clipped into [0, 1]
    CHECK(d.skipped_rows == 3);
    std::filesystem::remove(fixed);

    CHECK_THROWS(ingest_csv("/nonexistent/cats.csv", std::nullopt));
  }

  TEST_CASE("synthetic data") {
    const Dataset a = synth_ds(500, 3, 0.1, 9);
    const Dataset b = synth_ds(500, 3, 0.1, 9);
    REQUIRE(a.examples.size() == 500);
    for (std::size_t i = 0; i < 500; ++i) {
      CHECK(a.examples[i].x == b.examples[i].x);
      CHECK(a.examples[i].y == b.examples[i].y);
      CHECK((a.examples[i].y >= 0.0 && a.examples[i].y <= 1.0));
    }

    // Noise-free, one feature: y is an affine function of x.
    const Dataset c = synth_ds(200, 1, 0.0, 4);
    const auto& e0 = c.examples[0];
    const auto& e1 = c.examples[1];
    const double slope = (e1.y - e0.y) / (e1.x[0] - e0.x[0]);
    for (const auto& e : c.examples) CHECK(e.y == doctest::Approx(e0.y + slope * (e.x[0] - e0.x[0])).epsilon(1e-9));
    CHECK_THROWS(synth_ds(0, 1, 0.0, 1));
  }

  TEST_CASE("train/test split") {
    const Dataset d = synth_ds(1001, 2, 0.1, 2);
    const Split a = train_test_split(d.examples, 0.8, 17);
    const Split b = train_test_split(d.examples, 0.8, 17);
    CHECK(a.train.size() == 801);
    CHECK(a.test.size() == 200);
    for (std::size_t i = 0; i < a.train.size(); ++i) CHECK(a.train[i].x == b.train[i].x);
    const Split c = train_test_split(d.examples, 0.8, 18);
    bool differs = false;
    for (std::size_t i = 0; i < c.train.size(); ++i) differs |= c.train[i].x != a.train[i].x;
    CHECK(differs);
  }

  TEST_CASE("progressive loss of a run is the mean simulated loss") {
    const Dataset d = synth_ds(3000, 4, 0.1, 5);
    Engine engine(engine_config(0.05, 0.125, 5, 4));
    const RunMetrics m = run_online(d.examples, engine);
    const auto& log = engine.export_log();
    double sum = 0.0;
    for (std::size_t i = 0; i < log.size(); ++i) {
      const double loss = std::abs(log[i].action - d.examples[i].y);
      CHECK(log[i].loss == loss);
      CHECK((loss >= 0.0 && loss <= 1.0));
      sum += loss;
    }
    CHECK(m.rounds == 3000);
    CHECK(std::abs(m.progressive_loss - sum / 3000) <= 1e-12);
    CHECK(m.max_updates_per_round <= 10);
  }

  TEST_CASE("pure exploration loses E|U - y| on average") {
    const Dataset d = synth_ds(40000, 2, 0.3, 6);
    Engine engine(engine_config(1.0, 0.25, 3, 2));
    const RunMetrics m = run_online(d.examples, engine);
    double expected = 0.0;
    for (const auto& e : d.examples) expected += (e.y * e.y + (1 - e.y) * (1 - e.y)) / 2;
    expected /= static_cast<double>(d.examples.size());
    // |U - y| has standard deviation below 0.3 for every y.
    const double se = 0.3 / std::sqrt(static_cast<double>(d.examples.size()));
    CHECK(std::abs(m.progressive_loss - expected) <= 3 * se);
  }

  TEST_CASE("dtree is the engine without smoothing") {
    const Dataset d = synth_ds(2000, 2, 0.1, 7);
    Engine engine(engine_config(0.05, 0.0, 4, 2));
    const RunMetrics m = run_online(d.examples, engine);
    CHECK(m.max_updates_per_round <= 4);
    for (const auto& r : engine.export_log()) CHECK(r.action * 16 == std::floor(r.action * 16));
  }

  TEST_CASE("dlinear picks the better arm per cluster") {
    std::vector<RegressionExample> stream;
    for (int i = 0; i < 20000; ++i) {
      const double x = i % 2;
      stream.push_back({{x}, x == 0 ? 0.1 : 0.9});
    }
    BaseLearnerConfig lc;
    lc.feature_dim = 1;
    lc.learning_rate = 0.05;
    const RunMetrics m = run_baseline_dlinear(stream, 2, 0.05, lc, 1);
    // Arms {0, 0.5}: the best discrete losses are 0.1 and 0.4.
    CHECK(std::abs(m.progressive_loss - 0.25) <= 0.05);
    CHECK(m.max_updates_per_round == 2);
    CHECK(m.learner_updates == 2 * 20000);

    DLinear model(2, 0.05, lc, 1);
    const std::vector<double> a{0.0}, b{1.0};
    for (const auto& e : stream) {
      const auto [action, mass] = model.act(e.x);
      CHECK(mass >= 0.05 / 2);
      model.observe(std::abs(action - e.y));
    }
    CHECK(model.greedy_index(a) == 0);
    CHECK(model.greedy_index(b) == 1);
    CHECK_THROWS_AS(model.observe(0.1), std::logic_error);
  }

  TEST_CASE("Clopper-Pearson interval") {
    const ConfidenceInterval zero = clopper_pearson(0, 100);
    CHECK(zero.lo == 0.0);
    CHECK(zero.hi == doctest::Approx(1.0 - std::pow(0.025, 0.01)).epsilon(1e-12));
    CHECK(zero.hi == doctest::Approx(0.0362).epsilon(1e-3));
    const ConfidenceInterval all = clopper_pearson(100, 100);
    CHECK(all.hi == 1.0);
    CHECK(all.lo == doctest::Approx(1.0 - zero.hi).epsilon(1e-12));
    const ConfidenceInterval mid = clopper_pearson(30, 100);
    CHECK((mid.lo < 0.3 && 0.3 < mid.hi));
    CHECK_THROWS(clopper_pearson(0, 0));
    CHECK_THROWS(clopper_pearson(5, 4));

    const std::vector<double> zeros(100, 0.0);
    const TestEvaluation ev = summarize_losses(zeros);
    CHECK(ev.mean_loss == 0.0);
    CHECK(ev.ci.hi == zero.hi);
    const std::vector<double> ones(100, 1.0);
    CHECK(summarize_losses(ones).ci.lo == all.lo);
  }

  TEST_CASE("test-split evaluation") {
    const Dataset d = synth_ds(5000, 3, 0.1, 8);
    const Split s = train_test_split(d.examples, 0.8, 1);
    Engine engine(engine_config(0.05, 0.0625, 5, 3));
    run_online(s.train, engine);
    const TestEvaluation ev = evaluate_test(engine.tree(), s.test, 2);
    CHECK(ev.n == s.test.size());
    CHECK((ev.ci.lo <= ev.mean_loss && ev.mean_loss <= ev.ci.hi));
    CHECK(evaluate_test(engine.tree(), s.test, 2).mean_loss == ev.mean_loss);
    CHECK_THROWS(evaluate_test(engine.tree(), {}, 2));
  }

  TEST_CASE("benchmark table shape") {
    BenchConfig c;
    c.depths = {2, 3};
    c.reps = 1;
    c.stream_length = 300;
    c.feature_dim = 2;
    c.bandwidth_sweep = {0.125};
    const auto rows = bench_timing(c);
    CHECK(rows.size() == 7);
    for (const auto& r : rows) CHECK(r.ns_per_example > 0.0);
    c.algorithms = {"nope"};
    CHECK_THROWS(bench_timing(c));
  }
}
