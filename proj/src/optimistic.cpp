#include "kfeed/optimistic.hpp"

#include "kfeed/errors.hpp"

namespace kfeed {

const char* to_string(BonusMode mode) {
  return mode == BonusMode::Practical ? "practical" : "theoretical";
}

BonusMode bonus_mode_from_string(const std::string& name) {
  if (name == "practical") return BonusMode::Practical;
  if (name == "theoretical") return BonusMode::Theoretical;
  throw ArgumentError("unknown bonus mode '" + name + "'");
}

double OptimisticRewardSpec::bonus() const {
  if (n < 1) throw ArgumentError("OptimisticRewardSpec: n must be at least 1");
  if (mode == BonusMode::Practical) return practical_confidence_width(c_conf, n);
  return theoretical_confidence_width(constants, k, bound, lambda_min, n);
}

double estimated_reward(const Eigen::VectorXd& w_hat, const Features& phi, int k) {
  return expected_level(feedback_probabilities(w_hat, phi, k));
}

double optimistic_reward(const OptimisticRewardSpec& spec, const Features& phi) {
  return clamp_optimistic(estimated_reward(spec.weights, phi, spec.k), spec.bonus(), spec.k);
}

}  // namespace kfeed
