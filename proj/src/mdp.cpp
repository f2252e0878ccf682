#include "kfeed/mdp.hpp"

#include <cmath>
#include <string>

#include "kfeed/errors.hpp"

namespace kfeed {

namespace {

constexpr double kSumTolerance = 1e-9;

void check_distribution(std::span<const double> p, const std::string& what) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ArgumentError(what + ": negative or non-finite entry");
    total += v;
  }
  if (std::abs(total - 1.0) > kSumTolerance) {
    throw ArgumentError(what + ": entries sum to " + std::to_string(total));
  }
}

}  // namespace

std::size_t TrajectoryHash::operator()(const Trajectory& t) const noexcept {
  std::size_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](int v) {
    h ^= static_cast<std::size_t>(static_cast<unsigned>(v)) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  };
  for (State s : t.states) mix(s);
  mix(-1);
  for (Action a : t.actions) mix(a);
  return h;
}

TabularMdp::TabularMdp(int num_states, int num_actions, int horizon, std::vector<double> transition,
                       std::vector<double> initial_dist)
    : num_states_(num_states),
      num_actions_(num_actions),
      horizon_(horizon),
      transition_(std::move(transition)),
      initial_(std::move(initial_dist)) {
  if (num_states <= 0 || num_actions <= 0 || horizon <= 0) {
    throw ArgumentError("TabularMdp: state count, action count and horizon must be positive");
  }
  const std::size_t rows = static_cast<std::size_t>(num_states) * num_actions;
  if (transition_.size() != rows * num_states) {
    throw ArgumentError("TabularMdp: transition table has wrong size");
  }
  if (initial_.size() != static_cast<std::size_t>(num_states)) {
    throw ArgumentError("TabularMdp: initial distribution has wrong size");
  }
  check_distribution(initial_, "initial distribution");

  successor_begin_.reserve(rows + 1);
  for (State s = 0; s < num_states; ++s) {
    for (Action a = 0; a < num_actions; ++a) {
      auto row = transition_row(s, a);
      check_distribution(row, "transition row (" + std::to_string(s) + ", " + std::to_string(a) + ")");
      successor_begin_.push_back(successor_pool_.size());
      for (State next = 0; next < num_states; ++next) {
        if (row[next] > 0.0) successor_pool_.push_back({next, row[next]});
      }
    }
  }
  successor_begin_.push_back(successor_pool_.size());
  for (State s = 0; s < num_states; ++s) {
    if (initial_[s] > 0.0) initial_support_.push_back({s, initial_[s]});
  }
}

std::span<const TabularMdp::Successor> TabularMdp::successors(State s, Action a) const {
  const std::size_t row = static_cast<std::size_t>(s) * num_actions_ + a;
  return {successor_pool_.data() + successor_begin_[row], successor_begin_[row + 1] - successor_begin_[row]};
}

namespace {

State draw_successor(std::span<const TabularMdp::Successor> support, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (const auto& succ : support) {
    acc += succ.probability;
    if (u < acc) return succ.state;
  }
  return support.back().state;
}

Action draw_action(const StateActionMatrix& policy, State s, Rng& rng) {
  const double u = uniform01(rng);
  const auto cols = policy.cols();
  const double* row = policy.data() + s * cols;
  double acc = 0.0;
  Action last = 0;
  for (Eigen::Index a = 0; a < cols; ++a) {
    if (row[a] <= 0.0) continue;
    acc += row[a];
    last = static_cast<Action>(a);
    if (u < acc) return last;
  }
  return last;
}

}  // namespace

State sample_transition(const TabularMdp& mdp, State s, Action a, Rng& rng) {
  if (!mdp.valid_state(s) || !mdp.valid_action(a)) {
    throw ArgumentError("sample_transition: invalid state or action index");
  }
  return draw_successor(mdp.successors(s, a), rng);
}

void validate_policy(const TabularMdp& mdp, const StateActionMatrix& policy) {
  if (policy.rows() != mdp.num_states() || policy.cols() != mdp.num_actions()) {
    throw ArgumentError("policy table has wrong shape");
  }
  for (Eigen::Index s = 0; s < policy.rows(); ++s) {
    check_distribution({policy.data() + s * policy.cols(), static_cast<std::size_t>(policy.cols())},
                       "policy row " + std::to_string(s));
  }
}

void sample_trajectory_into(const TabularMdp& mdp, const StateActionMatrix& policy, Rng& rng,
                            Trajectory& out) {
  const int horizon = mdp.horizon();
  out.states.resize(static_cast<std::size_t>(horizon) + 1);
  out.actions.resize(static_cast<std::size_t>(horizon));
  State s = draw_successor(mdp.initial_support(), rng);
  out.states[0] = s;
  for (int t = 0; t < horizon; ++t) {
    const Action a = draw_action(policy, s, rng);
    out.actions[t] = a;
    s = draw_successor(mdp.successors(s, a), rng);
    out.states[t + 1] = s;
  }
}

Trajectory sample_trajectory(const TabularMdp& mdp, const StateActionMatrix& policy, Rng& rng) {
  validate_policy(mdp, policy);
  Trajectory out;
  sample_trajectory_into(mdp, policy, rng, out);
  return out;
}

bool is_valid_trajectory(const TabularMdp& mdp, const Trajectory& trajectory) {
  if (trajectory.actions.size() != static_cast<std::size_t>(mdp.horizon())) return false;
  if (trajectory.states.size() != trajectory.actions.size() + 1) return false;
  for (State s : trajectory.states) {
    if (!mdp.valid_state(s)) return false;
  }
  for (Action a : trajectory.actions) {
    if (!mdp.valid_action(a)) return false;
  }
  return true;
}

void for_each_trajectory(const TabularMdp& mdp, const StateActionMatrix& policy,
                         const std::function<void(const Trajectory&, double)>& visit,
                         double max_entries) {
  validate_policy(mdp, policy);
  const double entries = std::pow(static_cast<double>(mdp.num_states()), mdp.horizon() + 1) *
                         std::pow(static_cast<double>(mdp.num_actions()), mdp.horizon());
  if (entries > max_entries) {
    throw CapacityError("enumerate_trajectories: " + std::to_string(entries) +
                        " candidate trajectories exceed the limit");
  }
  const int horizon = mdp.horizon();
  Trajectory current;
  current.states.resize(static_cast<std::size_t>(horizon) + 1);
  current.actions.resize(static_cast<std::size_t>(horizon));

  std::function<void(int, double)> extend = [&](int t, double prob) {
    if (t == horizon) {
      visit(current, prob);
      return;
    }
    const State s = current.states[t];
    for (Action a = 0; a < mdp.num_actions(); ++a) {
      const double pa = policy(s, a);
      if (pa <= 0.0) continue;
      current.actions[t] = a;
      for (const auto& succ : mdp.successors(s, a)) {
        current.states[t + 1] = succ.state;
        extend(t + 1, prob * pa * succ.probability);
      }
    }
  };
  for (const auto& start : mdp.initial_support()) {
    current.states[0] = start.state;
    extend(0, start.probability);
  }
}

std::vector<WeightedTrajectory> enumerate_trajectories(const TabularMdp& mdp,
                                                       const StateActionMatrix& policy,
                                                       double max_entries) {
  std::vector<WeightedTrajectory> out;
  for_each_trajectory(
      mdp, policy, [&out](const Trajectory& t, double p) { out.push_back({t, p}); }, max_entries);
  return out;
}

}  // namespace kfeed
