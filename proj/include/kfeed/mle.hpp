#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "kfeed/feedback.hpp"

namespace kfeed {

struct FeedbackSample {
  Features phi;
  int level;
};

/// Observed (features, level) pairs. Samples with bit-identical features are also kept as
/// aggregated groups with per-level counts; every likelihood routine works on the groups.
class FeedbackDataset {
 public:
  struct Group {
    Features phi;
    Eigen::VectorXd counts;  // length K
    double total = 0.0;
  };

  FeedbackDataset(int k, int d);

  void add(const Features& phi, int level);

  int k() const { return k_; }
  int d() const { return d_; }
  int size() const { return static_cast<int>(samples_.size()); }
  bool empty() const { return samples_.empty(); }
  const std::vector<FeedbackSample>& samples() const { return samples_; }
  const std::vector<Group>& groups() const { return groups_; }

 private:
  int k_;
  int d_;
  std::vector<FeedbackSample> samples_;
  std::vector<Group> groups_;
  std::unordered_map<std::string, std::size_t> group_index_;
};

/// l(w) = -(1/n) sum_t log softmax_{y_t}(w . phi_j(tau_t)).
double negative_log_likelihood(const Eigen::VectorXd& w, const FeedbackDataset& data);

/// -(1/n) sum_i sum_j softmax_j (phi_{y_i} - phi_j), in stacked coordinates.
Eigen::VectorXd nll_gradient(const Eigen::VectorXd& w, const FeedbackDataset& data);

/// Hessian assembled row by row from
///   d/dw[a] grad = -(1/n) sum_i sum_j sum_l p_j p_l (phi_j[a] - phi_l[a]) (phi_{y_i} - phi_j).
Eigen::MatrixXd nll_hessian(const Eigen::VectorXd& w, const FeedbackDataset& data);

/// Radial projection onto {||w|| <= radius}.
Eigen::VectorXd project_to_ball(const Eigen::VectorXd& w, double radius);

struct SolverConfig {
  double step_size = 1.0;
  int max_iters = 2000;
  double grad_tolerance = 1e-6;
};

struct FitResult {
  Eigen::VectorXd weights;
  double loss = 0.0;
  double projected_gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Filled only when requested: loss and ||w|| of every accepted iterate, starting point included.
  std::vector<double> loss_trace;
  std::vector<double> norm_trace;
};

/// Projected gradient descent on l over the ball of radius `bound`. A step that would raise the
/// loss is halved until it does not, so accepted losses never increase.
FitResult fit_mle(const FeedbackDataset& data, double bound, const SolverConfig& config,
                  const std::optional<Eigen::VectorXd>& warm_start = std::nullopt,
                  bool record_trace = false);

/// Sigma_Dn = 1/(n K^2) sum_i sum_j sum_l (phi_j - phi_l)(phi_j - phi_l)^T.
Eigen::MatrixXd design_matrix_sigma(const FeedbackDataset& data);

/// Smallest eigenvalue of sigma + ridge * I. Throws ArgumentError if sigma is not symmetric.
double min_eigenvalue(const Eigen::MatrixXd& sigma, double ridge = 0.0);

inline constexpr double kDefaultRidge = 1e-6;

/// eta = exp(-4B)/2, C = log(K exp(2B)).
struct ConfidenceConstants {
  double eta;
  double c_const;
  double delta;

  static ConfidenceConstants make(double bound, int k, double delta);
};

/// ||w_hat - w*|| bound: 2/(eta lambda_min) * sqrt(C^2/(2n) log(4/delta)).
double weight_confidence_width(const ConfidenceConstants& constants, double lambda_min, int n);

/// Reward bound: 4K exp(4B)/(eta lambda_min) * sqrt(C^2/(2n) log(4/delta)).
double theoretical_confidence_width(const ConfidenceConstants& constants, int k, double bound,
                                    double lambda_min, int n);

/// c_conf / sqrt(n).
double practical_confidence_width(double c_conf, int n);

}  // namespace kfeed
