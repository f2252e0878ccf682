#pragma once

#include <Eigen/Core>

#include "kfeed/feedback.hpp"
#include "kfeed/mle.hpp"

namespace kfeed {

enum class BonusMode { Practical, Theoretical };

const char* to_string(BonusMode mode);
BonusMode bonus_mode_from_string(const std::string& name);

struct OptimisticRewardSpec {
  Eigen::VectorXd weights;  // concatenated estimate w_hat_n
  int k = 2;
  int n = 1;  // number of samples behind the estimate
  BonusMode mode = BonusMode::Practical;
  double c_conf = 10.0;
  // Theoretical mode only.
  ConfidenceConstants constants{};
  double bound = 1.0;
  double lambda_min = 0.0;

  /// Trajectory-level bonus for this spec; throws StateError in theoretical mode with lambda_min <= 0.
  double bonus() const;
};

/// R(w_hat, tau) = sum_i i * P_hat(y = i).
double estimated_reward(const Eigen::VectorXd& w_hat, const Features& phi, int k);

/// min(estimated_reward + bonus, K - 1).
double optimistic_reward(const OptimisticRewardSpec& spec, const Features& phi);

/// Clamp used by optimistic_reward; exposed so callers with a precomputed bonus share it.
inline double clamp_optimistic(double estimate, double bonus, int k) {
  const double top = static_cast<double>(k - 1);
  const double v = estimate + bonus;
  return v < top ? v : top;
}

}  // namespace kfeed
