#pragma once

#include <Eigen/Core>
#include <vector>

#include <json.hpp>

#include "kfeed/random.hpp"

namespace kfeed {

/// Trajectory feature vector phi(tau). Expected to satisfy ||phi|| <= 1.
using Features = Eigen::VectorXd;

/// K class-weight vectors w_0..w_{K-1} in R^d, concatenated into w in R^{Kd} on demand.
class WeightBlocks {
 public:
  /// Zero weights. Rejects k < 2.
  WeightBlocks(int k, int d, double bound);
  /// Splits a concatenated R^{Kd} vector into blocks.
  static WeightBlocks from_concatenated(const Eigen::VectorXd& w, int k, double bound);

  int k() const { return k_; }
  int d() const { return d_; }
  double bound() const { return bound_; }

  auto block(int i) { return concatenated_.segment(static_cast<Eigen::Index>(i) * d_, d_); }
  auto block(int i) const { return concatenated_.segment(static_cast<Eigen::Index>(i) * d_, d_); }
  const Eigen::VectorXd& concatenated() const { return concatenated_; }

  /// max_i ||w_i||_2
  double max_block_norm() const;
  /// ||w_i|| <= B/K for every block (ground-truth bound).
  bool satisfies_block_bound(double slack = 1e-12) const;

 private:
  int k_;
  int d_;
  double bound_;
  Eigen::VectorXd concatenated_;
};

/// Block embeddings phi_i in R^{Kd}: zero except coordinates i*d .. i*d+d-1, which hold phi.
struct StackedFeatures {
  std::vector<Eigen::VectorXd> levels;
};

StackedFeatures stack_features(const Features& phi, int k);

/// Per-level logits w_i . phi computed blockwise from the concatenated vector.
Eigen::VectorXd level_logits(const Eigen::VectorXd& w, const Features& phi, int k);

/// Numerically stable softmax (max-logit subtraction).
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// P(y = i | phi) = exp(w_i . phi) / sum_j exp(w_j . phi).
Eigen::VectorXd feedback_probabilities(const WeightBlocks& w, const Features& phi);
Eigen::VectorXd feedback_probabilities(const Eigen::VectorXd& w, const Features& phi, int k);

/// sum_i i * p_i
double expected_level(const Eigen::VectorXd& probabilities);

/// R(tau) = sum_i i * P(y = i), in [0, K-1].
double true_expected_reward(const WeightBlocks& w, const Features& phi);

int sample_feedback(const WeightBlocks& w, const Features& phi, Rng& rng);
int sample_level(const Eigen::VectorXd& probabilities, Rng& rng);

/// (1 - eps) * p + eps * uniform.
Eigen::VectorXd mix_with_uniform_noise(const Eigen::VectorXd& p, double noise_level);

/// {"k", "d", "B", "blocks": [[...], ...]}
nlohmann::json to_json(const WeightBlocks& w);
WeightBlocks weights_from_json(const nlohmann::json& doc);
void save_weights(const WeightBlocks& w, const std::string& path);
WeightBlocks load_weights(const std::string& path);

}  // namespace kfeed
