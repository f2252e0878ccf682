#pragma once

#include <Eigen/Core>
#include <functional>

#include "kfeed/mdp.hpp"
#include "kfeed/policy.hpp"

namespace kfeed::oracle {

/// sum_tau Pr(tau) * reward(tau) by exhaustive enumeration.
double exact_value(const TabularMdp& mdp, const StateActionMatrix& theta, const RewardFn& reward_fn);

/// sum_tau reward(tau) * Pr(tau) * grad log Pr(tau); transition terms drop out of grad log Pr.
StateActionMatrix exact_policy_gradient(const TabularMdp& mdp, const StateActionMatrix& theta,
                                        const RewardFn& reward_fn);

inline constexpr double kDefaultFiniteDifferenceStep = 1e-6;

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
Eigen::VectorXd finite_difference(const std::function<double(const Eigen::VectorXd&)>& fn,
                                  const Eigen::VectorXd& x, double step = kDefaultFiniteDifferenceStep);

struct AscentTrace {
  StateActionMatrix theta;
  std::vector<double> values;  // exact value before the first step and after every accepted step
};

/// Exact-gradient ascent; a step that lowers the exact value is halved until it does not.
AscentTrace exact_gradient_ascent(const TabularMdp& mdp, const RewardFn& reward_fn,
                                  const PlannerConfig& config, const StateActionMatrix& warm_start);

}  // namespace kfeed::oracle
