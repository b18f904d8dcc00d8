// Command-line front end: online training, off-policy model selection,
// held-out evaluation and the timing benchmark. Every subcommand prints JSON.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cats/cats_engine.hpp"
#include "cats/harness.hpp"
#include "cats/offpolicy.hpp"

using nlohmann::json;

namespace {

struct DataOptions {
  std::string csv;
  std::string target;
  bool synth = false;
  std::size_t synth_n = 100000;
  std::size_t synth_dim = 10;
  double noise = 0.1;
  std::uint64_t data_seed = 1;
  std::uint64_t split_seed = 1;
  double train_fraction = 0.8;

  void add_to(CLI::App& app) {
    auto* data = app.add_option("--data", csv, "CSV file with numeric columns");
    auto* syn = app.add_flag("--synth", synth, "Use the synthetic linear-Gaussian dataset");
    data->excludes(syn);
    app.add_option("--target", target, "Target column name or zero-based index (default: last)");
    app.add_option("--synth-n", synth_n, "Synthetic rows")->capture_default_str();
    app.add_option("--synth-dim", synth_dim, "Synthetic feature dimension")->capture_default_str();
    app.add_option("--noise", noise, "Synthetic noise standard deviation")->capture_default_str();
    app.add_option("--data-seed", data_seed, "Synthetic data seed")->capture_default_str();
    app.add_option("--split-seed", split_seed, "Seed of the train/test shuffle")->capture_default_str();
    app.add_option("--train-fraction", train_fraction, "Fraction of rows used for training")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
  }

  cats::Split load() const {
    if (!synth && csv.empty()) throw std::invalid_argument("one of --data or --synth is required");
    const cats::Dataset d = synth ? cats::synth_ds(synth_n, synth_dim, noise, data_seed)
                                  : cats::ingest_csv(csv, target.empty() ? std::nullopt
                                                                         : std::optional<std::string>(target));
    if (d.skipped_rows > 0) std::cerr << "skipped " << d.skipped_rows << " malformed rows\n";
    if (d.examples.empty()) throw std::invalid_argument("dataset has no usable rows");
    return cats::train_test_split(d.examples, train_fraction, split_seed);
  }
};

struct LearnerOptions {
  double learning_rate = 0.1;
  std::string rule = "inverse-sqrt";

  void add_to(CLI::App& app) {
    app.add_option("--learning-rate", learning_rate, "Base learner step size")->capture_default_str();
    app.add_option("--update-rule", rule, "fixed or inverse-sqrt")
        ->check(CLI::IsMember({"fixed", "inverse-sqrt"}))
        ->capture_default_str();
  }

  cats::BaseLearnerConfig config(std::size_t dim) const {
    cats::BaseLearnerConfig c;
    c.feature_dim = dim;
    c.learning_rate = learning_rate;
    c.update_rule = rule == "fixed" ? cats::UpdateRule::fixed_rate : cats::UpdateRule::inverse_sqrt;
    return c;
  }
};

json evaluation_json(const cats::TestEvaluation& ev) {
  return {{"mean_loss", ev.mean_loss}, {"ci_low", ev.ci.lo}, {"ci_high", ev.ci.hi}, {"n", ev.n}};
}

void emit(const json& doc, const std::string& path) {
  if (path.empty()) {
    std::cout << doc.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(2) << '\n';
}

std::vector<int> parse_depths(const std::string& text) {
  std::vector<int> depths;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (const auto dash = item.find('-'); dash != std::string::npos) {
      const int lo = std::stoi(item.substr(0, dash));
      const int hi = std::stoi(item.substr(dash + 1));
      for (int d = lo; d <= hi; ++d) depths.push_back(d);
    } else if (!item.empty()) {
      depths.push_back(std::stoi(item));
    }
  }
  return depths;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous-action contextual bandits with tree policies"};
  app.require_subcommand(1);

  // train-online
  auto* online = app.add_subcommand("train-online", "Run smoothed epsilon-greedy on a regression stream");
  DataOptions online_data;
  LearnerOptions online_learner;
  double epsilon = 0.05;
  double bandwidth = 0.25;
  int depth = 4;
  std::uint64_t seed = 1;
  std::string model_out, log_out, online_out;
  online_data.add_to(*online);
  online_learner.add_to(*online);
  online->add_option("--epsilon", epsilon, "Exploration probability")->capture_default_str();
  online->add_option("--bandwidth", bandwidth, "Smoothing half-width h (0 = no smoothing)")->capture_default_str();
  online->add_option("--depth", depth, "Tree depth D, K = 2^D actions")->capture_default_str();
  online->add_option("--seed", seed, "Engine seed")->capture_default_str();
  online->add_option("--model-out", model_out, "Write the final tree here");
  online->add_option("--log-out", log_out, "Write the interaction log here");
  online->add_option("--out", online_out, "Write the JSON summary here instead of stdout");

  // train-offline
  auto* offline = app.add_subcommand("train-offline", "Select (h, K) on a logged interaction file");
  LearnerOptions offline_learner;
  std::string log_in, grid = "default", offline_model_out, report_out;
  double p_min = 0.05, delta = 0.05;
  std::optional<double> penalty_scale;
  std::size_t threads = 1;
  offline_learner.add_to(*offline);
  offline->add_option("--log", log_in, "Interaction log")->required()->check(CLI::ExistingFile);
  offline->add_option("--grid", grid, "'default' or a file of 'h K' lines")->capture_default_str();
  offline->add_option("--pmin", p_min, "Lower bound on logged densities")->capture_default_str();
  offline->add_option("--delta", delta, "Confidence parameter of the default penalty")->capture_default_str();
  offline->add_option("--penalty-scale", penalty_scale, "Replace 64 ln(4 T |J| / delta) with this constant");
  offline->add_option("--threads", threads, "Grid points evaluated in parallel")->capture_default_str();
  offline->add_option("--model-out", offline_model_out, "Write the selected tree here");
  offline->add_option("--report-out", report_out, "Write the JSON report here instead of stdout");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Held-out loss of a saved tree with a 95% interval");
  DataOptions eval_data;
  std::string model_in, eval_out;
  std::uint64_t eval_seed = 1;
  bool eval_all = false;
  eval_data.add_to(*evaluate);
  evaluate->add_option("--model", model_in, "Saved tree")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--seed", eval_seed, "Seed for the smoothed action draws")->capture_default_str();
  evaluate->add_flag("--all", eval_all, "Evaluate on every row instead of the test split");
  evaluate->add_option("--out", eval_out, "Write the JSON result here instead of stdout");

  // bench
  auto* bench = app.add_subcommand("bench", "Per-example training time across K and h");
  cats::BenchConfig bench_config;
  std::string depths = "4-13", algos = "cats,dtree,dlinear", bench_out;
  bool sweep_h = false;
  bench->add_option("--depths", depths, "Depth list, e.g. 4-13 or 4,8,12")->capture_default_str();
  bench->add_option("--algos", algos, "Comma list of cats, dtree, dlinear")->capture_default_str();
  bench->add_option("--reps", bench_config.reps, "Repetitions (median reported)")->capture_default_str();
  bench->add_option("--stream-length", bench_config.stream_length, "Examples per run")->capture_default_str();
  bench->add_option("--bandwidth", bench_config.cats_bandwidth, "cats bandwidth for the K sweep")
      ->capture_default_str();
  bench->add_flag("--sweep-bandwidth", sweep_h, "Also time cats across h at the largest depth");
  bench->add_option("--seed", bench_config.seed, "Data and engine seed")->capture_default_str();
  bench->add_option("--out", bench_out, "Write the JSON table here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*online) {
      const cats::Split split = online_data.load();
      cats::EngineConfig ec;
      ec.epsilon = epsilon;
      ec.bandwidth = bandwidth;
      ec.depth = depth;
      ec.seed = seed;
      ec.learner = online_learner.config(split.train.front().x.size());
      ec.keep_log = !log_out.empty();
      cats::Engine engine(ec);
      const cats::RunMetrics m = cats::run_online(split.train, engine);
      json doc{{"progressive_loss", m.progressive_loss},
               {"rounds", m.rounds},
               {"ns_per_example", m.ns_per_example},
               {"learner_updates", m.learner_updates},
               {"max_updates_per_round", m.max_updates_per_round},
               {"K", engine.tree().num_actions()},
               {"h", bandwidth},
               {"epsilon", epsilon}};
      if (!split.test.empty()) doc["test"] = evaluation_json(cats::evaluate_test(engine.tree(), split.test, seed));
      if (!model_out.empty()) {
        engine.tree().save(model_out);
        doc["model"] = model_out;
      }
      if (!log_out.empty()) {
        std::ofstream out(log_out);
        if (!out) throw std::runtime_error("cannot write " + log_out);
        cats::write_log(out, engine.export_log());
        doc["log"] = log_out;
      }
      emit(doc, online_out);
    } else if (*offline) {
      std::ifstream in(log_in);
      const auto log = cats::read_log(in);
      if (log.empty()) throw std::invalid_argument("log " + log_in + " has no records");
      std::vector<cats::GridSpec> points;
      if (grid == "default") {
        points = cats::default_grid();
      } else {
        std::ifstream grid_in(grid);
        if (!grid_in) throw std::runtime_error("cannot open grid file " + grid);
        points = cats::parse_grid(grid_in);
      }
      cats::SrmConfig srm;
      srm.p_min = p_min;
      srm.delta = delta;
      srm.penalty_scale = penalty_scale;
      const auto result = cats::cats_off(log, points, srm, offline_learner.config(log.front().x.size()),
                                         {threads, false});
      if (!offline_model_out.empty()) result.model.save(offline_model_out);
      const std::string report = cats::report_to_json(result, offline_model_out);
      emit(json::parse(report), report_out);
    } else if (*evaluate) {
      const cats::TreePolicy tree = cats::TreePolicy::load(model_in);
      cats::Split split = eval_data.load();
      if (eval_all) split.test.insert(split.test.end(), split.train.begin(), split.train.end());
      json doc = evaluation_json(cats::evaluate_test(tree, split.test, eval_seed));
      doc["K"] = tree.num_actions();
      doc["h"] = tree.bandwidth();
      emit(doc, eval_out);
    } else if (*bench) {
      bench_config.depths = parse_depths(depths);
      bench_config.algorithms = split_list(algos);
      if (sweep_h && !bench_config.depths.empty()) {
        const int top = *std::max_element(bench_config.depths.begin(), bench_config.depths.end());
        for (int j = top; j >= 2; --j) bench_config.bandwidth_sweep.push_back(std::ldexp(1.0, -j));
      }
      json rows = json::array();
      for (const auto& r : cats::bench_timing(bench_config)) {
        rows.push_back({{"algorithm", r.algorithm},
                        {"K", r.num_actions},
                        {"h", r.bandwidth},
                        {"ns_per_example", r.ns_per_example}});
      }
      emit(json{{"rows", rows}, {"reps", bench_config.reps}, {"stream_length", bench_config.stream_length}},
           bench_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return EXIT_FAILURE;
  }
  return EXIT_SUCCESS;
}
