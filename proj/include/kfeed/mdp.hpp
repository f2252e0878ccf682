#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "kfeed/random.hpp"

namespace kfeed {

using State = int;
using Action = int;

/// Row-major |S| x |A| table. Used both for policy logits and per-state action distributions.
using StateActionMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Trajectory {
  std::vector<State> states;    // s_0 .. s_H
  std::vector<Action> actions;  // a_0 .. a_{H-1}

  int horizon() const { return static_cast<int>(actions.size()); }
  State final_state() const { return states.back(); }

  bool operator==(const Trajectory&) const = default;
};

struct TrajectoryHash {
  std::size_t operator()(const Trajectory& t) const noexcept;
};

/// Finite-horizon MDP with a known, dense transition table.
class TabularMdp {
 public:
  /// `transition` is laid out as [s][a][s'] (size S*A*S).
  TabularMdp(int num_states, int num_actions, int horizon, std::vector<double> transition,
             std::vector<double> initial_dist);

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  int horizon() const { return horizon_; }

  double probability(State s, Action a, State next) const {
    return transition_[row_offset(s, a) + static_cast<std::size_t>(next)];
  }
  std::span<const double> transition_row(State s, Action a) const {
    return {transition_.data() + row_offset(s, a), static_cast<std::size_t>(num_states_)};
  }
  std::span<const double> initial_distribution() const { return initial_; }

  /// Nonzero successors of (s, a) with their probabilities, in increasing state order.
  struct Successor {
    State state;
    double probability;
  };
  std::span<const Successor> successors(State s, Action a) const;
  std::span<const Successor> initial_support() const { return initial_support_; }

  bool valid_state(State s) const { return s >= 0 && s < num_states_; }
  bool valid_action(Action a) const { return a >= 0 && a < num_actions_; }

 private:
  std::size_t row_offset(State s, Action a) const {
    return (static_cast<std::size_t>(s) * num_actions_ + a) * num_states_;
  }

  int num_states_;
  int num_actions_;
  int horizon_;
  std::vector<double> transition_;
  std::vector<double> initial_;
  std::vector<Successor> successor_pool_;
  std::vector<std::size_t> successor_begin_;  // size S*A+1
  std::vector<Successor> initial_support_;
};

State sample_transition(const TabularMdp& mdp, State s, Action a, Rng& rng);

/// Draws s_0 ~ rho, a_t ~ policy(.|s_t), s_{t+1} ~ P(.|s_t, a_t). `policy` rows are distributions.
Trajectory sample_trajectory(const TabularMdp& mdp, const StateActionMatrix& policy, Rng& rng);

/// Same as above but reuses the storage of `out`.
void sample_trajectory_into(const TabularMdp& mdp, const StateActionMatrix& policy, Rng& rng,
                            Trajectory& out);

void validate_policy(const TabularMdp& mdp, const StateActionMatrix& policy);
bool is_valid_trajectory(const TabularMdp& mdp, const Trajectory& trajectory);

struct WeightedTrajectory {
  Trajectory trajectory;
  double probability;
};

inline constexpr double kDefaultEnumerationLimit = 1e6;

/// Every realizable trajectory with its exact probability. Throws CapacityError when
/// |S|^(H+1) * |A|^H exceeds `max_entries`.
std::vector<WeightedTrajectory> enumerate_trajectories(
    const TabularMdp& mdp, const StateActionMatrix& policy,
    double max_entries = kDefaultEnumerationLimit);

/// Visits each realizable trajectory without materializing the list.
void for_each_trajectory(const TabularMdp& mdp, const StateActionMatrix& policy,
                         const std::function<void(const Trajectory&, double)>& visit,
                         double max_entries = kDefaultEnumerationLimit);

}  // namespace kfeed
