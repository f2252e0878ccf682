#include "kfeed/checks.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "kfeed/mle.hpp"
#include "kfeed/optimistic.hpp"
#include "kfeed/oracle.hpp"
#include "kfeed/policy.hpp"

namespace kfeed {

namespace {

double normal(Rng& rng) {
  // Box-Muller on the library's uniform source keeps the checks identical across standard libraries.
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(uniform01(rng) * (hi - lo + 1));
}

StateActionMatrix random_theta(Rng& rng, int states, int actions) {
  StateActionMatrix t(states, actions);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = normal(rng);
  return t;
}

TabularMdp random_mdp(Rng& rng, int states, int actions, int horizon) {
  std::vector<double> transition(static_cast<std::size_t>(states) * actions * states, 0.0);
  for (std::size_t row = 0; row < static_cast<std::size_t>(states) * actions; ++row) {
    double total = 0.0;
    for (int n = 0; n < states; ++n) {
      double& p = transition[row * states + n];
      p = uniform01(rng) < 0.6 ? uniform01(rng) : 0.0;
      total += p;
    }
    if (total == 0.0) {
      transition[row * states] = 1.0;
      total = 1.0;
    }
    for (int n = 0; n < states; ++n) transition[row * states + n] /= total;
  }
  std::vector<double> initial(static_cast<std::size_t>(states));
  double total = 0.0;
  for (auto& p : initial) total += (p = uniform01(rng) + 0.1);
  for (auto& p : initial) p /= total;
  return TabularMdp(states, actions, horizon, std::move(transition), std::move(initial));
}

/// Trajectory-level reward in [0, 1] that depends on the whole path.
double path_reward(const Trajectory& t) {
  double r = 0.0;
  for (std::size_t i = 0; i < t.states.size(); ++i) r += std::sin(1.0 + t.states[i] * (i + 1.3));
  for (std::size_t i = 0; i < t.actions.size(); ++i) r += 0.5 * std::cos(t.actions[i] * (i + 0.7));
  return 0.5 + 0.5 * std::sin(r);
}

Eigen::VectorXd flat(const StateActionMatrix& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

double relative(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-8);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

std::vector<CheckResult> run_self_checks(std::ostream& out, unsigned long long seed) {
  std::vector<CheckResult> results;
  auto report = [&](std::string name, bool passed, std::string detail) {
    out << (passed ? "PASS " : "FAIL ") << name << " (" << detail << ")\n";
    results.push_back({std::move(name), passed, std::move(detail)});
  };
  Rng rng(seed);

  {
    double worst_mass = 0.0, worst_sigma = 0.0, worst_grad = 0.0;
    for (int inst = 0; inst < 20; ++inst) {
      const int states = uniform_int(rng, 1, 6), actions = uniform_int(rng, 1, 3), horizon = uniform_int(rng, 1, 4);
      const TabularMdp mdp = random_mdp(rng, states, actions, horizon);
      const StateActionMatrix theta = random_theta(rng, states, actions);
      double mass = 0.0;
      for_each_trajectory(mdp, policy_probabilities(theta), [&](const Trajectory&, double p) { mass += p; });
      worst_mass = std::max(worst_mass, std::abs(mass - 1.0));
      const double exact = oracle::exact_value(mdp, theta, path_reward);
      const ValueEstimate mc = policy_value_statistics(mdp, theta, path_reward, 20000, rng);
      if (mc.standard_error > 0.0) worst_sigma = std::max(worst_sigma, std::abs(mc.mean - exact) / mc.standard_error);
      if (states * actions <= 12 && horizon <= 3) {
        const Eigen::VectorXd numeric = oracle::finite_difference(
            [&](const Eigen::VectorXd& x) {
              return oracle::exact_value(mdp, Eigen::Map<const StateActionMatrix>(x.data(), states, actions), path_reward);
            },
            flat(theta));
        const Eigen::VectorXd analytic = flat(oracle::exact_policy_gradient(mdp, theta, path_reward));
        worst_grad = std::max(worst_grad, (analytic - numeric).norm() / std::max(numeric.norm(), 1e-3));
      }
    }
    report("enumeration mass", worst_mass <= 1e-9, "max |sum - 1| = " + fmt(worst_mass));
    report("exact value vs Monte-Carlo", worst_sigma <= 4.0, "max deviation " + fmt(worst_sigma) + " sigma");
    report("exact policy gradient vs finite differences", worst_grad <= 1e-7, "max rel. error " + fmt(worst_grad));
  }

  {
    double worst = 0.0, worst_hessian = 0.0, min_eig = 0.0;
    for (int inst = 0; inst < 100; ++inst) {
      const int k = uniform_int(rng, 2, 5), d = uniform_int(rng, 1, 5), n = uniform_int(rng, 1, 50);
      FeedbackDataset data(k, d);
      for (int i = 0; i < n; ++i) {
        Features phi(d);
        for (auto& x : phi) x = normal(rng);
        phi /= std::max(1.0, phi.norm());
        data.add(phi, uniform_int(rng, 0, k - 1));
      }
      Eigen::VectorXd w(k * d);
      for (auto& x : w) x = normal(rng);
      const Eigen::VectorXd numeric = oracle::finite_difference(
          [&](const Eigen::VectorXd& x) { return negative_log_likelihood(x, data); }, w);
      worst = std::max(worst, relative(nll_gradient(w, data), numeric));
      if (inst % 10 == 0) {
        const Eigen::MatrixXd h = nll_hessian(w, data);
        Eigen::MatrixXd fd(h.rows(), h.cols());
        for (Eigen::Index c = 0; c < h.cols(); ++c) {
          Eigen::VectorXd up = w, down = w;
          up[c] += 1e-6;
          down[c] -= 1e-6;
          fd.col(c) = (nll_gradient(up, data) - nll_gradient(down, data)) / 2e-6;
        }
        worst_hessian = std::max(worst_hessian, (h - fd).norm() / std::max(fd.norm(), 1e-8));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (h + h.transpose()));
        min_eig = std::min(min_eig, eig.eigenvalues().minCoeff());
      }
    }
    report("likelihood gradient vs finite differences", worst <= 1e-6, "max rel. error " + fmt(worst));
    report("likelihood Hessian vs differenced gradient", worst_hessian <= 1e-5, "max rel. error " + fmt(worst_hessian));
    report("likelihood Hessian positive semidefinite", min_eig >= -1e-9, "min eigenvalue " + fmt(min_eig));
  }

  {
    double worst = 0.0, worst_row_sum = 0.0;
    for (int inst = 0; inst < 100; ++inst) {
      const int states = uniform_int(rng, 1, 6), actions = uniform_int(rng, 1, 3);
      const TabularMdp mdp = random_mdp(rng, states, actions, uniform_int(rng, 1, 6));
      const StateActionMatrix theta = random_theta(rng, states, actions);
      const Trajectory t = sample_trajectory(mdp, policy_probabilities(theta), rng);
      const StateActionMatrix g = log_policy_gradient(theta, t);
      worst_row_sum = std::max(worst_row_sum, g.rowwise().sum().cwiseAbs().maxCoeff());
      const Eigen::VectorXd numeric = oracle::finite_difference(
          [&](const Eigen::VectorXd& x) {
            return log_trajectory_policy(Eigen::Map<const StateActionMatrix>(x.data(), states, actions), t);
          },
          flat(theta));
      worst = std::max(worst, relative(flat(g), numeric));
    }
    report("policy score vs finite differences", worst <= 1e-6, "max rel. error " + fmt(worst));
    report("policy score rows sum to zero", worst_row_sum <= 1e-12, "max |row sum| " + fmt(worst_row_sum));
  }

  {
    int violations = 0;
    for (int i = 0; i < 100000; ++i) {
      const int k = uniform_int(rng, 2, 7);
      const int d = uniform_int(rng, 1, 4);
      Eigen::VectorXd w(k * d);
      for (auto& x : w) x = 5.0 * normal(rng);
      Features phi(d);
      for (auto& x : phi) x = normal(rng);
      phi /= std::max(1.0, phi.norm());
      OptimisticRewardSpec spec;
      spec.weights = w;
      spec.k = k;
      spec.n = uniform_int(rng, 1, 10000);
      spec.c_conf = 20.0 * uniform01(rng) + 1e-3;
      const double v = optimistic_reward(spec, phi);
      if (!(v <= k - 1) || !(v >= std::min(estimated_reward(w, phi, k), k - 1.0))) ++violations;
    }
    report("optimistic clamp bounds", violations == 0, std::to_string(violations) + " violations in 100000 draws");
  }
  return results;
}

}  // namespace kfeed
