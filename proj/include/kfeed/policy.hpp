#pragma once

#include <Eigen/Core>
#include <functional>

#include "kfeed/mdp.hpp"
#include "kfeed/random.hpp"

namespace kfeed {

/// Tabular softmax policy: pi(a|s) = exp(theta[s][a]) / sum_a' exp(theta[s][a']).
class PolicyTable {
 public:
  /// All-zero logits (uniform policy).
  PolicyTable(int num_states, int num_actions);
  explicit PolicyTable(StateActionMatrix theta);

  const StateActionMatrix& theta() const { return theta_; }
  int num_states() const { return static_cast<int>(theta_.rows()); }
  int num_actions() const { return static_cast<int>(theta_.cols()); }

  Eigen::VectorXd action_probabilities(State s) const;
  StateActionMatrix probabilities() const;

 private:
  StateActionMatrix theta_;
};

Eigen::VectorXd action_probabilities(const StateActionMatrix& theta, State s);
/// Row-wise softmax of the whole table.
StateActionMatrix policy_probabilities(const StateActionMatrix& theta);

/// sum_t log pi(a_t | s_t)
double log_trajectory_policy(const StateActionMatrix& theta, const Trajectory& trajectory);

/// sum over steps of d log pi(a_t|s_t) / d theta[s][a] = 1{s_t = s} (1{a_t = a} - pi(a|s_t)).
StateActionMatrix log_policy_gradient(const StateActionMatrix& theta, const Trajectory& trajectory);

using RewardFn = std::function<double(const Trajectory&)>;
using GradientFn = std::function<StateActionMatrix(const StateActionMatrix&)>;

struct PlannerConfig {
  double step_size = 0.1;
  int rollouts_per_gradient = 50;
  double epsilon = 1e-3;
  int max_ascent_iters = 300;

  void validate() const;
};

/// Monte-Carlo REINFORCE estimate: mean over rollouts of R(tau) * sum_t grad log pi(a_t|s_t).
StateActionMatrix reinforce_gradient(const TabularMdp& mdp, const StateActionMatrix& theta,
                                     const RewardFn& reward_fn, const PlannerConfig& config, Rng& rng);

struct PlanResult {
  PolicyTable policy;
  int iterations = 0;
  bool converged = false;
};

/// theta <- theta + step * gradient(theta) until ||delta theta|| < epsilon or the iteration cap.
PlanResult gradient_ascent(const GradientFn& gradient, const PlannerConfig& config,
                           const StateActionMatrix& warm_start);

/// Gradient ascent with REINFORCE gradients.
PlanResult optimize_policy(const TabularMdp& mdp, const RewardFn& reward_fn, const PlannerConfig& config,
                           const StateActionMatrix& warm_start, Rng& rng);

struct ValueEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

ValueEstimate policy_value_statistics(const TabularMdp& mdp, const StateActionMatrix& theta,
                                      const RewardFn& reward_fn, int num_rollouts, Rng& rng);

/// Monte-Carlo mean of reward_fn over sampled trajectories.
double policy_value_estimate(const TabularMdp& mdp, const StateActionMatrix& theta,
                             const RewardFn& reward_fn, int num_rollouts, Rng& rng);

}  // namespace kfeed
