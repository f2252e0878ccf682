#include "kfeed/mle.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "kfeed/errors.hpp"

namespace kfeed {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMatrix> as_blocks(const Eigen::VectorXd& w, int k, int d) {
  return {w.data(), k, d};
}

void check_inputs(const Eigen::VectorXd& w, const FeedbackDataset& data) {
  if (data.empty()) throw StateError("likelihood of an empty dataset is undefined");
  if (w.size() != static_cast<Eigen::Index>(data.k()) * data.d()) {
    throw ArgumentError("weight vector length does not equal k * d");
  }
}

double log_sum_exp(const Eigen::VectorXd& logits) {
  const double top = logits.maxCoeff();
  return top + std::log((logits.array() - top).exp().sum());
}

}  // namespace

FeedbackDataset::FeedbackDataset(int k, int d) : k_(k), d_(d) {
  if (k < 2) throw ArgumentError("FeedbackDataset: at least two feedback levels are required");
  if (d < 1) throw ArgumentError("FeedbackDataset: feature dimension must be positive");
}

void FeedbackDataset::add(const Features& phi, int level) {
  if (phi.size() != d_) throw ArgumentError("FeedbackDataset: feature dimension mismatch");
  if (level < 0 || level >= k_) throw ArgumentError("FeedbackDataset: level out of range");
  samples_.push_back({phi, level});

  std::string key(reinterpret_cast<const char*>(phi.data()), sizeof(double) * static_cast<std::size_t>(d_));
  auto [it, inserted] = group_index_.try_emplace(std::move(key), groups_.size());
  if (inserted) groups_.push_back({phi, Eigen::VectorXd::Zero(k_), 0.0});
  Group& g = groups_[it->second];
  g.counts[level] += 1.0;
  g.total += 1.0;
}

double negative_log_likelihood(const Eigen::VectorXd& w, const FeedbackDataset& data) {
  check_inputs(w, data);
  const auto blocks = as_blocks(w, data.k(), data.d());
  Eigen::VectorXd logits(data.k());
  double sum = 0.0;
  for (const auto& g : data.groups()) {
    logits.noalias() = blocks * g.phi;
    sum += g.total * log_sum_exp(logits) - g.counts.dot(logits);
  }
  return sum / data.size();
}

Eigen::VectorXd nll_gradient(const Eigen::VectorXd& w, const FeedbackDataset& data) {
  check_inputs(w, data);
  const int k = data.k();
  const int d = data.d();
  const auto blocks = as_blocks(w, k, d);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(w.size());
  Eigen::Map<RowMatrix> grad_blocks(grad.data(), k, d);
  Eigen::VectorXd logits(k);
  for (const auto& g : data.groups()) {
    logits.noalias() = blocks * g.phi;
    const Eigen::VectorXd p = softmax(logits);
    grad_blocks.noalias() += (g.total * p - g.counts) * g.phi.transpose();
  }
  return grad / data.size();
}

Eigen::MatrixXd nll_hessian(const Eigen::VectorXd& w, const FeedbackDataset& data) {
  check_inputs(w, data);
  const int k = data.k();
  const Eigen::Index dim = w.size();
  Eigen::MatrixXd hessian = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& g : data.groups()) {
    const StackedFeatures stacked = stack_features(g.phi, k);
    Eigen::VectorXd logits(k);
    for (int j = 0; j < k; ++j) logits[j] = w.dot(stacked.levels[static_cast<std::size_t>(j)]);
    const Eigen::VectorXd p = softmax(logits);
    for (int y = 0; y < k; ++y) {
      const double count = g.counts[y];
      if (count == 0.0) continue;
      const auto& phi_y = stacked.levels[static_cast<std::size_t>(y)];
      for (int j = 0; j < k; ++j) {
        const auto& phi_j = stacked.levels[static_cast<std::size_t>(j)];
        const Eigen::VectorXd m = phi_y - phi_j;
        Eigen::VectorXd row_weights = Eigen::VectorXd::Zero(dim);
        for (int l = 0; l < k; ++l) {
          row_weights += p[j] * p[l] * (phi_j - stacked.levels[static_cast<std::size_t>(l)]);
        }
        hessian.noalias() -= count * row_weights * m.transpose();
      }
    }
  }
  return hessian / data.size();
}

Eigen::VectorXd project_to_ball(const Eigen::VectorXd& w, double radius) {
  if (!(radius > 0.0)) throw ArgumentError("project_to_ball: radius must be positive");
  const double norm = w.norm();
  if (norm <= radius) return w;
  return w * (radius / norm);
}

FitResult fit_mle(const FeedbackDataset& data, double bound, const SolverConfig& config,
                  const std::optional<Eigen::VectorXd>& warm_start, bool record_trace) {
  if (data.empty()) throw StateError("fit_mle: dataset is empty");
  if (!(bound > 0.0)) throw ArgumentError("fit_mle: bound must be positive");
  if (!(config.step_size > 0.0) || config.max_iters < 0 || !(config.grad_tolerance >= 0.0)) {
    throw ArgumentError("fit_mle: invalid solver configuration");
  }
  const Eigen::Index dim = static_cast<Eigen::Index>(data.k()) * data.d();

  FitResult result;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);
  if (warm_start) {
    if (warm_start->size() != dim) throw ArgumentError("fit_mle: warm start has wrong length");
    w = project_to_ball(*warm_start, bound);
  }
  double loss = negative_log_likelihood(w, data);
  if (!std::isfinite(loss)) throw NumericError("fit_mle: non-finite loss at the starting point");
  Eigen::VectorXd grad = nll_gradient(w, data);
  if (record_trace) {
    result.loss_trace.push_back(loss);
    result.norm_trace.push_back(w.norm());
  }

  constexpr int kMaxHalvings = 60;
  int iter = 0;
  for (; iter < config.max_iters; ++iter) {
    result.projected_gradient_norm = (w - project_to_ball(w - grad, bound)).norm();
    if (result.projected_gradient_norm <= config.grad_tolerance) {
      result.converged = true;
      break;
    }
    double step = config.step_size;
    Eigen::VectorXd candidate;
    double candidate_loss = 0.0;
    bool accepted = false;
    for (int h = 0; h <= kMaxHalvings; ++h, step *= 0.5) {
      candidate = project_to_ball(w - step * grad, bound);
      candidate_loss = negative_log_likelihood(candidate, data);
      if (!std::isfinite(candidate_loss)) throw NumericError("fit_mle: non-finite loss");
      if (candidate_loss <= loss) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no descent possible at machine precision
    w = std::move(candidate);
    loss = candidate_loss;
    grad = nll_gradient(w, data);
    if (record_trace) {
      result.loss_trace.push_back(loss);
      result.norm_trace.push_back(w.norm());
    }
  }
  if (iter == config.max_iters) {
    result.projected_gradient_norm = (w - project_to_ball(w - grad, bound)).norm();
    result.converged = result.projected_gradient_norm <= config.grad_tolerance;
  }
  result.iterations = iter;
  result.weights = std::move(w);
  result.loss = loss;
  return result;
}

Eigen::MatrixXd design_matrix_sigma(const FeedbackDataset& data) {
  if (data.empty()) throw StateError("design_matrix_sigma: dataset is empty");
  const int k = data.k();
  const int d = data.d();
  // sum_{j,l} (e_j - e_l)(e_j - e_l)^T = 2K I - 2 11^T, so the triple sum factors as a
  // Kronecker product with the feature second-moment matrix.
  Eigen::MatrixXd second_moment = Eigen::MatrixXd::Zero(d, d);
  for (const auto& g : data.groups()) second_moment.noalias() += g.total * g.phi * g.phi.transpose();
  const double scale = 1.0 / (static_cast<double>(data.size()) * k * k);

  Eigen::MatrixXd sigma(k * d, k * d);
  for (int j = 0; j < k; ++j) {
    for (int l = 0; l < k; ++l) {
      const double level_weight = (j == l ? 2.0 * k : 0.0) - 2.0;
      sigma.block(j * d, l * d, d, d) = (scale * level_weight) * second_moment;
    }
  }
  return sigma;
}

double min_eigenvalue(const Eigen::MatrixXd& sigma, double ridge) {
  if (sigma.rows() != sigma.cols() || sigma.rows() == 0) {
    throw ArgumentError("min_eigenvalue: matrix must be square and non-empty");
  }
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
    throw ArgumentError("min_eigenvalue: matrix is not symmetric");
  }
  if (ridge < 0.0) throw ArgumentError("min_eigenvalue: ridge must be non-negative");
  Eigen::MatrixXd shifted = sigma;
  shifted.diagonal().array() += ridge;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(shifted, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericError("min_eigenvalue: eigensolver failed");
  return solver.eigenvalues().minCoeff();
}

ConfidenceConstants ConfidenceConstants::make(double bound, int k, double delta) {
  if (!(bound > 0.0)) throw ArgumentError("ConfidenceConstants: bound must be positive");
  if (k < 2) throw ArgumentError("ConfidenceConstants: k must be at least 2");
  if (!(delta > 0.0 && delta <= 1.0)) throw ArgumentError("ConfidenceConstants: delta must lie in (0, 1]");
  return {std::exp(-4.0 * bound) / 2.0, std::log(static_cast<double>(k)) + 2.0 * bound, delta};
}

namespace {

double hoeffding_term(const ConfidenceConstants& c, int n) {
  return std::sqrt(c.c_const * c.c_const / (2.0 * n) * std::log(4.0 / c.delta));
}

void check_width_inputs(double lambda_min, int n) {
  if (n < 1) throw ArgumentError("confidence width: n must be at least 1");
  if (!(lambda_min > 0.0)) {
    throw StateError("confidence width: lambda_min must be positive; add a ridge first");
  }
}

}  // namespace

double weight_confidence_width(const ConfidenceConstants& constants, double lambda_min, int n) {
  check_width_inputs(lambda_min, n);
  return 2.0 / (constants.eta * lambda_min) * hoeffding_term(constants, n);
}

double theoretical_confidence_width(const ConfidenceConstants& constants, int k, double bound,
                                    double lambda_min, int n) {
  check_width_inputs(lambda_min, n);
  return 4.0 * k * std::exp(4.0 * bound) / (constants.eta * lambda_min) * hoeffding_term(constants, n);
}

double practical_confidence_width(double c_conf, int n) {
  if (!(c_conf > 0.0)) throw ArgumentError("practical_confidence_width: c_conf must be positive");
  if (n < 1) throw ArgumentError("practical_confidence_width: n must be at least 1");
  return c_conf / std::sqrt(static_cast<double>(n));
}

}  // namespace kfeed
