#include "cats/cats_engine.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace cats {

namespace {

void validate(const EngineConfig& c) {
  if (!(c.epsilon > 0.0 && c.epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in (0, 1]");
}

}  // namespace

Engine::Engine(const EngineConfig& config)
    : config_(config),
      tree_(config.depth, config.bandwidth, config.learner),
      kernel_(config.bandwidth),
      rng_(config.seed) {
  validate(config_);
}

double Engine::mixture_density(DiscretizedAction greedy, double action) const {
  const double eps = config_.epsilon;
  if (kernel_.is_point_mass()) {
    const double k = static_cast<double>(tree_.num_actions());
    const bool hit = action == greedy.value();
    return (hit ? 1.0 - eps : 0.0) + eps / k;
  }
  return (1.0 - eps) * kernel_.density(greedy.value(), action) + eps;
}

const ActionChoice& Engine::act(Context x) {
  if (pending_) throw std::logic_error("act called twice without observe");
  const DiscretizedAction greedy = tree_.get_action(x);

  // Fixed draw order: branch, then action.
  const double u_branch = uniform01(rng_);
  const double u_action = uniform01(rng_);

  ActionChoice choice;
  choice.explored = u_branch < config_.epsilon;
  if (kernel_.is_point_mass()) {
    const std::uint32_t k = tree_.num_actions();
    const std::uint32_t index =
        choice.explored ? std::min(static_cast<std::uint32_t>(u_action * k), k - 1) : greedy.index;
    choice.action = DiscretizedAction{index, k}.value();
  } else {
    choice.action = choice.explored ? u_action : kernel_.sample_from_uniform(greedy.value(), u_action);
  }
  choice.density = mixture_density(greedy, choice.action);

  pending_x_.assign(x.begin(), x.end());
  pending_ = choice;
  last_ = choice;
  return last_;
}

const UpdateTrace& Engine::observe(double loss) {
  if (!pending_) throw std::logic_error("observe called without a pending act");
  if (!(loss >= 0.0 && loss <= 1.0)) throw std::invalid_argument("loss must lie in [0, 1]");

  const ActionChoice choice = *pending_;
  pending_.reset();
  ++rounds_;
  loss_sum_ += loss;
  if (config_.keep_log) log_.push_back({rounds_, choice.action, choice.density, loss, pending_x_});

  const PiecewiseCost cost = make_ips_cost(tree_, choice.action, choice.density, loss);
  online_train_tree(tree_, pending_x_, cost, trace_);
  return trace_;
}

double Engine::progressive_loss() const {
  if (rounds_ == 0) throw std::logic_error("progressive loss needs at least one round");
  return loss_sum_ / static_cast<double>(rounds_);
}

void write_record(std::ostream& out, const InteractionRecord& r) {
  // Enough digits for an exact round trip.
  const auto old = out.precision(17);
  out << r.round << '\t' << r.action << '\t' << r.density << '\t' << r.loss << '\t';
  for (std::size_t i = 0; i < r.x.size(); ++i) {
    if (i) out << ' ';
    out << i << ':' << r.x[i];
  }
  out << '\n';
  out.precision(old);
}

void write_log(std::ostream& out, std::span<const InteractionRecord> records) {
  for (const auto& r : records) write_record(out, r);
}

std::vector<InteractionRecord> read_log(std::istream& in, std::size_t feature_dim) {
  std::vector<InteractionRecord> records;
  std::size_t widest = feature_dim;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    InteractionRecord r;
    if (!(fields >> r.round >> r.action >> r.density >> r.loss)) {
      throw std::runtime_error("malformed log line " + std::to_string(line_no));
    }
    std::string pair;
    while (fields >> pair) {
      const auto colon = pair.find(':');
      if (colon == std::string::npos) {
        throw std::runtime_error("malformed feature '" + pair + "' on log line " + std::to_string(line_no));
      }
      const std::size_t index = std::stoul(pair.substr(0, colon));
      const double value = std::stod(pair.substr(colon + 1));
      if (feature_dim && index >= feature_dim) {
        throw std::runtime_error("feature index " + std::to_string(index) + " exceeds dimension on line " +
                                 std::to_string(line_no));
      }
      if (r.x.size() <= index) r.x.resize(index + 1, 0.0);
      r.x[index] = value;
    }
    widest = std::max(widest, r.x.size());
    records.push_back(std::move(r));
  }
  for (auto& r : records) r.x.resize(widest, 0.0);
  return records;
}

}  // namespace cats
