#include "kfeed/oracle.hpp"

#include "kfeed/errors.hpp"

namespace kfeed::oracle {

double exact_value(const TabularMdp& mdp, const StateActionMatrix& theta, const RewardFn& reward_fn) {
  double value = 0.0;
  for_each_trajectory(mdp, policy_probabilities(theta),
                      [&](const Trajectory& t, double p) { value += p * reward_fn(t); });
  return value;
}

StateActionMatrix exact_policy_gradient(const TabularMdp& mdp, const StateActionMatrix& theta,
                                        const RewardFn& reward_fn) {
  StateActionMatrix grad = StateActionMatrix::Zero(theta.rows(), theta.cols());
  for_each_trajectory(mdp, policy_probabilities(theta), [&](const Trajectory& t, double p) {
    const double weight = p * reward_fn(t);
    if (weight != 0.0) grad += weight * log_policy_gradient(theta, t);
  });
  return grad;
}

Eigen::VectorXd finite_difference(const std::function<double(const Eigen::VectorXd&)>& fn,
                                  const Eigen::VectorXd& x, double step) {
  if (!(step > 0.0)) throw ArgumentError("finite_difference: step must be positive");
  Eigen::VectorXd out(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double up = fn(probe);
    probe[i] = x[i] - step;
    const double down = fn(probe);
    probe[i] = x[i];
    out[i] = (up - down) / (2.0 * step);
  }
  return out;
}

AscentTrace exact_gradient_ascent(const TabularMdp& mdp, const RewardFn& reward_fn,
                                  const PlannerConfig& config, const StateActionMatrix& warm_start) {
  config.validate();
  AscentTrace trace{warm_start, {}};
  double value = exact_value(mdp, trace.theta, reward_fn);
  trace.values.push_back(value);
  for (int iter = 0; iter < config.max_ascent_iters; ++iter) {
    const StateActionMatrix grad = exact_policy_gradient(mdp, trace.theta, reward_fn);
    double step = config.step_size;
    StateActionMatrix candidate;
    double candidate_value = value;
    bool accepted = false;
    for (int h = 0; h < 50; ++h, step *= 0.5) {
      candidate = trace.theta + step * grad;
      candidate_value = exact_value(mdp, candidate, reward_fn);
      if (candidate_value >= value) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    const double moved = (candidate - trace.theta).norm();
    trace.theta = std::move(candidate);
    value = candidate_value;
    trace.values.push_back(value);
    if (moved < config.epsilon) break;
  }
  return trace;
}

}  // namespace kfeed::oracle
