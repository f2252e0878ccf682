#include "kfeed/policy.hpp"

#include <cmath>

#include "kfeed/errors.hpp"

namespace kfeed {

PolicyTable::PolicyTable(int num_states, int num_actions)
    : theta_(StateActionMatrix::Zero(num_states, num_actions)) {
  if (num_states <= 0 || num_actions <= 0) throw ArgumentError("PolicyTable: empty table");
}

PolicyTable::PolicyTable(StateActionMatrix theta) : theta_(std::move(theta)) {
  if (theta_.size() == 0) throw ArgumentError("PolicyTable: empty table");
  if (!theta_.allFinite()) throw NumericError("PolicyTable: non-finite logits");
}

Eigen::VectorXd PolicyTable::action_probabilities(State s) const {
  return kfeed::action_probabilities(theta_, s);
}

StateActionMatrix PolicyTable::probabilities() const { return policy_probabilities(theta_); }

Eigen::VectorXd action_probabilities(const StateActionMatrix& theta, State s) {
  if (s < 0 || s >= theta.rows()) throw ArgumentError("action_probabilities: invalid state");
  const auto row = theta.row(s);
  Eigen::VectorXd e = (row.array() - row.maxCoeff()).exp().transpose();
  return e / e.sum();
}

StateActionMatrix policy_probabilities(const StateActionMatrix& theta) {
  StateActionMatrix probs(theta.rows(), theta.cols());
  for (Eigen::Index s = 0; s < theta.rows(); ++s) {
    const auto row = theta.row(s);
    probs.row(s) = (row.array() - row.maxCoeff()).exp();
    probs.row(s) /= probs.row(s).sum();
  }
  return probs;
}

double log_trajectory_policy(const StateActionMatrix& theta, const Trajectory& trajectory) {
  double total = 0.0;
  for (std::size_t t = 0; t < trajectory.actions.size(); ++t) {
    const auto row = theta.row(trajectory.states[t]);
    const double top = row.maxCoeff();
    const double lse = top + std::log((row.array() - top).exp().sum());
    total += row[trajectory.actions[t]] - lse;
  }
  return total;
}

namespace {

void accumulate_score(const StateActionMatrix& probs, const Trajectory& trajectory, double weight,
                      StateActionMatrix& out) {
  for (std::size_t t = 0; t < trajectory.actions.size(); ++t) {
    const State s = trajectory.states[t];
    out.row(s) -= weight * probs.row(s);
    out(s, trajectory.actions[t]) += weight;
  }
}

}  // namespace

StateActionMatrix log_policy_gradient(const StateActionMatrix& theta, const Trajectory& trajectory) {
  StateActionMatrix out = StateActionMatrix::Zero(theta.rows(), theta.cols());
  for (State s : trajectory.states) {
    if (s < 0 || s >= theta.rows()) throw ArgumentError("log_policy_gradient: invalid state");
  }
  for (Action a : trajectory.actions) {
    if (a < 0 || a >= theta.cols()) throw ArgumentError("log_policy_gradient: invalid action");
  }
  accumulate_score(policy_probabilities(theta), trajectory, 1.0, out);
  return out;
}

void PlannerConfig::validate() const {
  if (!(step_size > 0.0)) throw ArgumentError("PlannerConfig: step size must be positive");
  if (!(epsilon > 0.0)) throw ArgumentError("PlannerConfig: epsilon must be positive");
  if (rollouts_per_gradient < 1) throw ArgumentError("PlannerConfig: need at least one rollout");
  if (max_ascent_iters < 1) throw ArgumentError("PlannerConfig: need at least one ascent iteration");
}

StateActionMatrix reinforce_gradient(const TabularMdp& mdp, const StateActionMatrix& theta,
                                     const RewardFn& reward_fn, const PlannerConfig& config, Rng& rng) {
  config.validate();
  if (theta.rows() != mdp.num_states() || theta.cols() != mdp.num_actions()) {
    throw ArgumentError("reinforce_gradient: theta has wrong shape");
  }
  const StateActionMatrix probs = policy_probabilities(theta);
  StateActionMatrix grad = StateActionMatrix::Zero(theta.rows(), theta.cols());
  Trajectory trajectory;
  for (int r = 0; r < config.rollouts_per_gradient; ++r) {
    sample_trajectory_into(mdp, probs, rng, trajectory);
    const double reward = reward_fn(trajectory);
    if (reward != 0.0) accumulate_score(probs, trajectory, reward, grad);
  }
  grad /= static_cast<double>(config.rollouts_per_gradient);
  return grad;
}

PlanResult gradient_ascent(const GradientFn& gradient, const PlannerConfig& config,
                           const StateActionMatrix& warm_start) {
  config.validate();
  StateActionMatrix theta = warm_start;
  PlanResult result{PolicyTable(theta), 0, false};
  for (int iter = 0; iter < config.max_ascent_iters; ++iter) {
    const StateActionMatrix step = config.step_size * gradient(theta);
    theta += step;
    result.iterations = iter + 1;
    if (!theta.allFinite()) throw NumericError("gradient ascent produced non-finite logits");
    if (step.norm() < config.epsilon) {
      result.converged = true;
      break;
    }
  }
  result.policy = PolicyTable(std::move(theta));
  return result;
}

PlanResult optimize_policy(const TabularMdp& mdp, const RewardFn& reward_fn, const PlannerConfig& config,
                           const StateActionMatrix& warm_start, Rng& rng) {
  return gradient_ascent(
      [&](const StateActionMatrix& theta) { return reinforce_gradient(mdp, theta, reward_fn, config, rng); },
      config, warm_start);
}

ValueEstimate policy_value_statistics(const TabularMdp& mdp, const StateActionMatrix& theta,
                                      const RewardFn& reward_fn, int num_rollouts, Rng& rng) {
  if (num_rollouts < 1) throw ArgumentError("policy_value_estimate: need at least one rollout");
  const StateActionMatrix probs = policy_probabilities(theta);
  validate_policy(mdp, probs);
  Trajectory trajectory;
  // Welford running mean: exact for constant rewards.
  double mean = 0.0;
  double m2 = 0.0;
  for (int r = 0; r < num_rollouts; ++r) {
    sample_trajectory_into(mdp, probs, rng, trajectory);
    const double x = reward_fn(trajectory);
    const double delta = x - mean;
    mean += delta / (r + 1);
    m2 += delta * (x - mean);
  }
  const double variance = num_rollouts > 1 ? m2 / (num_rollouts - 1) : 0.0;
  return {mean, std::sqrt(variance / num_rollouts)};
}

double policy_value_estimate(const TabularMdp& mdp, const StateActionMatrix& theta,
                             const RewardFn& reward_fn, int num_rollouts, Rng& rng) {
  return policy_value_statistics(mdp, theta, reward_fn, num_rollouts, rng).mean;
}

}  // namespace kfeed
