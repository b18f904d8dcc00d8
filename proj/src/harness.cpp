#include "cats/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <boost/math/special_functions/beta.hpp>

namespace cats {

double TargetScaling::apply(double raw) const {
  const double width = max - min;
  if (!(width > 0.0)) return 0.5;
  return std::clamp((raw - min) / width, 0.0, 1.0);
}

double TargetScaling::invert(double scaled) const {
  const double width = max - min;
  if (!(width > 0.0)) return min;
  return min + scaled * width;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return std::nullopt;
  return v;
}

void fit_scaling(Dataset& d, const std::vector<double>& raw) {
  if (d.scaling.kind == TargetScaling::Kind::minmax && !raw.empty()) {
    const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
    d.scaling.min = *lo;
    d.scaling.max = *hi;
  }
  for (std::size_t i = 0; i < raw.size(); ++i) d.examples[i].y = d.scaling.apply(raw[i]);
}

}  // namespace

Dataset ingest_csv(const std::filesystem::path& path, const std::optional<std::string>& target,
                   TargetScaling scaling) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());

  Dataset d;
  d.scaling = scaling;
  std::vector<double> raw;
  std::string line;
  std::optional<std::size_t> target_col;
  std::size_t width = 0;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (first) {
      first = false;
      width = cells.size();
      const bool header = std::any_of(cells.begin(), cells.end(), [](const std::string& c) {
        return !c.empty() && !parse_number(c);
      });
      if (target) {
        const auto named = std::find(cells.begin(), cells.end(), *target);
        if (header && named != cells.end()) {
          target_col = static_cast<std::size_t>(named - cells.begin());
        } else if (auto idx = parse_number(*target); idx && *idx >= 0 && *idx < static_cast<double>(width) &&
                                                      *idx == std::floor(*idx)) {
          target_col = static_cast<std::size_t>(*idx);
        } else {
          throw std::invalid_argument("target column '" + *target + "' not found in " + path.string());
        }
      } else {
        target_col = width - 1;
      }
      if (header) continue;
    }
    if (cells.size() != width) {
      ++d.skipped_rows;
      continue;
    }
    const auto y = parse_number(cells[*target_col]);
    if (!y || std::isnan(*y)) {
      ++d.skipped_rows;
      continue;
    }
    RegressionExample e;
    bool ok = true;
    for (std::size_t c = 0; c < width && ok; ++c) {
      if (c == *target_col) continue;
      const auto v = parse_number(cells[c]);
      if (!v || !std::isfinite(*v)) ok = false;
      else e.x.push_back(*v);
    }
    if (!ok) {
      ++d.skipped_rows;
      continue;
    }
    raw.push_back(*y);
    d.examples.push_back(std::move(e));
  }
  if (width == 0) throw std::invalid_argument(path.string() + " is empty");
  fit_scaling(d, raw);
  return d;
}

Dataset synth_ds(std::size_t n, std::size_t dim, double noise_sd, std::uint64_t seed) {
  if (n == 0 || dim == 0) throw std::invalid_argument("synth_ds needs n, dim >= 1");
  if (!(noise_sd >= 0.0)) throw std::invalid_argument("noise_sd must be non-negative");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> w(dim);
  for (double& v : w) v = normal(rng);

  Dataset d;
  d.examples.resize(n);
  std::vector<double> raw(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& x = d.examples[i].x;
    x.resize(dim);
    for (double& v : x) v = normal(rng);
    raw[i] = std::inner_product(w.begin(), w.end(), x.begin(), 0.0) + (noise_sd > 0.0 ? noise_sd * normal(rng) : 0.0);
  }
  fit_scaling(d, raw);
  return d;
}

Split train_test_split(std::span<const RegressionExample> examples, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw std::invalid_argument("train_fraction outside [0, 1]");
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  // Fisher-Yates with our own uniform draws so the split is library independent.
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(order[i - 1], order[std::min(j, i - 1)]);
  }
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(examples.size())));
  Split s;
  s.train.reserve(n_train);
  s.test.reserve(examples.size() - n_train);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? s.train : s.test).push_back(examples[order[i]]);
  }
  return s;
}

RunMetrics run_online(std::span<const RegressionExample> stream, Engine& engine) {
  RunMetrics m;
  const auto start = std::chrono::steady_clock::now();
  for (const auto& e : stream) {
    const ActionChoice& choice = engine.act(e.x);
    const UpdateTrace& trace = engine.observe(absolute_loss(choice.action, e.y));
    m.learner_updates += trace.learner_updates();
    m.max_updates_per_round = std::max<std::uint64_t>(m.max_updates_per_round, trace.learner_updates());
  }
  const auto elapsed = std::chrono::steady_clock::now() - start;
  m.rounds = stream.size();
  if (engine.rounds() > 0) m.progressive_loss = engine.progressive_loss();
  if (!stream.empty()) {
    m.ns_per_example = std::chrono::duration<double, std::nano>(elapsed).count() / static_cast<double>(stream.size());
  }
  return m;
}

DLinear::DLinear(std::uint32_t num_actions, double epsilon, const BaseLearnerConfig& learner, std::uint64_t seed)
    : k_(num_actions),
      epsilon_(epsilon),
      config_(learner),
      stride_(learner.feature_dim + 1),
      weights_(static_cast<std::size_t>(num_actions) * (learner.feature_dim + 1), 0.0),
      rng_(seed) {
  config_.validate();
  if (num_actions < 1) throw std::invalid_argument("dlinear needs at least one action");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in (0, 1]");
}

double DLinear::predict(std::uint32_t arm, Context x) const {
  const double* w = weights_.data() + arm * stride_;
  double s = w[stride_ - 1];
  for (std::size_t i = 0; i + 1 < stride_; ++i) s += w[i] * x[i];
  return s;
}

std::uint32_t DLinear::greedy_index(Context x) const {
  if (x.size() + 1 != stride_) throw std::invalid_argument("context dimension mismatch");
  std::uint32_t best = 0;
  double best_cost = predict(0, x);
  for (std::uint32_t a = 1; a < k_; ++a) {
    const double c = predict(a, x);
    if (c < best_cost) {
      best_cost = c;
      best = a;
    }
  }
  return best;
}

std::pair<double, double> DLinear::act(Context x) {
  if (pending_) throw std::logic_error("act called twice without observe");
  const std::uint32_t greedy = greedy_index(x);
  const double u_branch = uniform01(rng_);
  const double u_action = uniform01(rng_);
  const std::uint32_t index =
      u_branch < epsilon_ ? std::min(static_cast<std::uint32_t>(u_action * k_), k_ - 1) : greedy;
  pending_index_ = index;
  pending_p_ = (index == greedy ? 1.0 - epsilon_ : 0.0) + epsilon_ / k_;
  pending_x_.assign(x.begin(), x.end());
  pending_ = true;
  return {static_cast<double>(index) / k_, pending_p_};
}

void DLinear::observe(double loss) {
  if (!pending_) throw std::logic_error("observe called without a pending act");
  pending_ = false;
  const double eta = config_.update_rule == UpdateRule::fixed_rate
                         ? config_.learning_rate
                         : config_.learning_rate / std::sqrt(1.0 + static_cast<double>(updates_));
  const double* x = pending_x_.data();
  const std::size_t dim = stride_ - 1;
  for (std::uint32_t a = 0; a < k_; ++a) {
    const double target = a == pending_index_ ? loss / pending_p_ : 0.0;
    double* w = weights_.data() + a * stride_;
    double pred = w[dim];
    for (std::size_t i = 0; i < dim; ++i) pred += w[i] * x[i];
    const double g = 2.0 * (pred - target);
    for (std::size_t i = 0; i < dim; ++i) w[i] -= eta * g * x[i];
    w[dim] -= eta * g;
  }
  ++updates_;
  last_updates_ = k_;
}

RunMetrics run_baseline_dlinear(std::span<const RegressionExample> stream, std::uint32_t num_actions,
                                double epsilon, const BaseLearnerConfig& learner, std::uint64_t seed) {
  DLinear model(num_actions, epsilon, learner, seed);
  RunMetrics m;
  double loss_sum = 0.0;
  const auto start = std::chrono::steady_clock::now();
  for (const auto& e : stream) {
    const auto [a, p] = model.act(e.x);
    const double loss = absolute_loss(a, e.y);
    loss_sum += loss;
    model.observe(loss);
    m.learner_updates += model.updates_last_round();
    m.max_updates_per_round = std::max(m.max_updates_per_round, model.updates_last_round());
  }
  const auto elapsed = std::chrono::steady_clock::now() - start;
  m.rounds = stream.size();
  if (!stream.empty()) {
    m.progressive_loss = loss_sum / static_cast<double>(stream.size());
    m.ns_per_example = std::chrono::duration<double, std::nano>(elapsed).count() / static_cast<double>(stream.size());
  }
  return m;
}

ConfidenceInterval clopper_pearson(std::uint64_t successes, std::uint64_t trials, double confidence) {
  if (trials == 0) throw std::invalid_argument("Clopper-Pearson interval needs at least one trial");
  if (successes > trials) throw std::invalid_argument("more successes than trials");
  if (!(confidence > 0.0 && confidence < 1.0)) throw std::invalid_argument("confidence must lie in (0, 1)");
  const double alpha = 1.0 - confidence;
  const auto k = static_cast<double>(successes);
  const auto n = static_cast<double>(trials);
  ConfidenceInterval ci;
  ci.lo = successes == 0 ? 0.0 : boost::math::ibeta_inv(k, n - k + 1.0, alpha / 2.0);
  ci.hi = successes == trials ? 1.0 : boost::math::ibeta_inv(k + 1.0, n - k, 1.0 - alpha / 2.0);
  return ci;
}

TestEvaluation summarize_losses(std::span<const double> losses) {
  if (losses.empty()) throw std::invalid_argument("cannot evaluate an empty test split");
  const double sum = std::accumulate(losses.begin(), losses.end(), 0.0);
  TestEvaluation ev;
  ev.n = losses.size();
  ev.mean_loss = sum / static_cast<double>(ev.n);
  const auto successes = std::min<std::uint64_t>(static_cast<std::uint64_t>(std::ceil(sum)), ev.n);
  ev.ci = clopper_pearson(successes, ev.n);
  return ev;
}

TestEvaluation evaluate_test(const TreePolicy& tree, std::span<const RegressionExample> test, std::uint64_t seed) {
  if (test.empty()) throw std::invalid_argument("cannot evaluate an empty test split");
  const SmoothingKernel kernel(tree.bandwidth());
  Rng rng(seed);
  std::vector<double> losses;
  losses.reserve(test.size());
  for (const auto& e : test) {
    const double a = kernel.sample(tree.get_action(e.x).value(), rng);
    losses.push_back(absolute_loss(a, e.y));
  }
  return summarize_losses(losses);
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<BenchRow> bench_timing(const BenchConfig& config) {
  if (config.reps == 0) throw std::invalid_argument("bench needs at least one repetition");
  const Dataset data = synth_ds(config.stream_length, config.feature_dim, 0.1, config.seed);
  const std::span<const RegressionExample> stream(data.examples);

  BaseLearnerConfig learner;
  learner.feature_dim = config.feature_dim;

  const auto time_engine = [&](int depth, double h) {
    std::vector<double> samples;
    for (std::size_t r = 0; r < config.reps; ++r) {
      EngineConfig ec;
      ec.epsilon = config.epsilon;
      ec.bandwidth = h;
      ec.depth = depth;
      ec.learner = learner;
      ec.seed = config.seed + r;
      ec.keep_log = false;
      Engine engine(ec);
      samples.push_back(run_online(stream, engine).ns_per_example);
    }
    return median(std::move(samples));
  };

  std::vector<BenchRow> rows;
  for (int depth : config.depths) {
    const std::uint32_t k = std::uint32_t{1} << depth;
    for (const std::string& algo : config.algorithms) {
      if (algo == "cats") {
        rows.push_back({algo, k, config.cats_bandwidth, time_engine(depth, config.cats_bandwidth)});
      } else if (algo == "dtree") {
        rows.push_back({algo, k, 0.0, time_engine(depth, 0.0)});
      } else if (algo == "dlinear") {
        const std::size_t n = std::clamp<std::size_t>(config.dlinear_budget / k, 200, stream.size());
        std::vector<double> samples;
        for (std::size_t r = 0; r < config.reps; ++r) {
          samples.push_back(
              run_baseline_dlinear(stream.first(n), k, config.epsilon, learner, config.seed + r).ns_per_example);
        }
        rows.push_back({algo, k, 0.0, median(std::move(samples))});
      } else {
        throw std::invalid_argument("unknown benchmark algorithm '" + algo + "'");
      }
    }
  }
  if (!config.bandwidth_sweep.empty() && !config.depths.empty()) {
    const int depth = *std::max_element(config.depths.begin(), config.depths.end());
    for (double h : config.bandwidth_sweep) {
      rows.push_back({"cats", std::uint32_t{1} << depth, h, time_engine(depth, h)});
    }
  }
  return rows;
}

}  // namespace cats
