#pragma once

// Test-only generators. Nothing here calls into the code paths under test.

#include <Eigen/Core>
#include <cmath>
#include <random>
#include <vector>

#include "kfeed/mdp.hpp"
#include "kfeed/mle.hpp"

namespace kfeed::testing {

inline Eigen::VectorXd random_vector(std::mt19937_64& gen, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = normal(gen);
  return v;
}

/// Uniform in the unit ball of R^d.
inline Eigen::VectorXd random_unit_ball(std::mt19937_64& gen, int d) {
  Eigen::VectorXd v = random_vector(gen, d);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return v.normalized() * std::pow(u(gen), 1.0 / d);
}

inline StateActionMatrix random_theta(std::mt19937_64& gen, int states, int actions, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  StateActionMatrix t(states, actions);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = normal(gen);
  return t;
}

/// Random MDP whose rows mix a few random successors; some entries are exactly zero.
inline TabularMdp random_mdp(std::mt19937_64& gen, int states, int actions, int horizon) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> transition(static_cast<std::size_t>(states) * actions * states, 0.0);
  for (int s = 0; s < states; ++s) {
    for (int a = 0; a < actions; ++a) {
      double* row = transition.data() + (static_cast<std::size_t>(s) * actions + a) * states;
      double total = 0.0;
      for (int n = 0; n < states; ++n) {
        row[n] = u(gen) < 0.6 ? u(gen) : 0.0;
        total += row[n];
      }
      if (total == 0.0) {
        row[s] = 1.0;
        total = 1.0;
      }
      for (int n = 0; n < states; ++n) row[n] /= total;
    }
  }
  std::vector<double> initial(static_cast<std::size_t>(states));
  double total = 0.0;
  for (auto& p : initial) total += (p = u(gen) + 0.1);
  for (auto& p : initial) p /= total;
  return TabularMdp(states, actions, horizon, std::move(transition), std::move(initial));
}

/// A trajectory-level (non-Markovian) reward in [0, 1] derived from a hash of the whole path.
inline double hashed_reward(const Trajectory& t, std::uint64_t salt) {
  std::uint64_t h = salt ^ 0x9E3779B97F4A7C15ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
    h *= 0xBF58476D1CE4E5B9ULL;
  };
  for (auto s : t.states) mix(static_cast<std::uint64_t>(s) + 11);
  for (auto a : t.actions) mix(static_cast<std::uint64_t>(a) + 101);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/// Deterministic MDP: one state per (position), single successor everywhere.
inline TabularMdp deterministic_chain(int states, int actions, int horizon) {
  std::vector<double> transition(static_cast<std::size_t>(states) * actions * states, 0.0);
  for (int s = 0; s < states; ++s) {
    for (int a = 0; a < actions; ++a) {
      transition[(static_cast<std::size_t>(s) * actions + a) * states + static_cast<std::size_t>((s + a) % states)] = 1.0;
    }
  }
  std::vector<double> initial(static_cast<std::size_t>(states), 0.0);
  initial[0] = 1.0;
  return TabularMdp(states, actions, horizon, std::move(transition), std::move(initial));
}

/// Dataset with features in the unit ball and labels drawn from the softmax model at w_star.
inline FeedbackDataset sample_dataset(std::mt19937_64& gen, const Eigen::VectorXd& w_star, int k, int d, int n) {
  FeedbackDataset data(k, d);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd phi = random_unit_ball(gen, d);
    Eigen::VectorXd logits(k);
    for (int j = 0; j < k; ++j) logits[j] = w_star.segment(j * d, d).dot(phi);
    const Eigen::ArrayXd e = (logits.array() - logits.maxCoeff()).exp();
    const double draw = u(gen) * e.sum();
    double acc = 0.0;
    int y = k - 1;
    for (int j = 0; j < k; ++j) {
      acc += e[j];
      if (draw < acc) {
        y = j;
        break;
      }
    }
    data.add(phi, y);
  }
  return data;
}

/// Blocks summing to zero, scaled to the requested norm.
inline Eigen::VectorXd random_centered_weights(std::mt19937_64& gen, int k, int d, double norm) {
  Eigen::VectorXd w = random_vector(gen, static_cast<Eigen::Index>(k) * d);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (int j = 0; j < k; ++j) mean += w.segment(j * d, d);
  mean /= k;
  for (int j = 0; j < k; ++j) w.segment(j * d, d) -= mean;
  return w.normalized() * norm;
}

inline double relative_error(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  return (got - want).norm() / want.norm();
}

}  // namespace kfeed::testing
