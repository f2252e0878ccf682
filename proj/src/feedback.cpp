#include "kfeed/feedback.hpp"

#include <cmath>
#include <fstream>

#include "kfeed/errors.hpp"

namespace kfeed {

WeightBlocks::WeightBlocks(int k, int d, double bound)
    : k_(k), d_(d), bound_(bound), concatenated_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k) * d)) {
  if (k < 2) throw ArgumentError("WeightBlocks: at least two feedback levels are required");
  if (d < 1) throw ArgumentError("WeightBlocks: feature dimension must be positive");
  if (!(bound > 0.0)) throw ArgumentError("WeightBlocks: bound must be positive");
}

WeightBlocks WeightBlocks::from_concatenated(const Eigen::VectorXd& w, int k, double bound) {
  if (k < 2 || w.size() % k != 0 || w.size() == 0) {
    throw ArgumentError("WeightBlocks: concatenated length is not a positive multiple of k");
  }
  WeightBlocks out(k, static_cast<int>(w.size() / k), bound);
  out.concatenated_ = w;
  return out;
}

double WeightBlocks::max_block_norm() const {
  double best = 0.0;
  for (int i = 0; i < k_; ++i) best = std::max(best, block(i).norm());
  return best;
}

bool WeightBlocks::satisfies_block_bound(double slack) const {
  return max_block_norm() <= bound_ / k_ + slack;
}

StackedFeatures stack_features(const Features& phi, int k) {
  const auto d = phi.size();
  StackedFeatures out;
  out.levels.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(k * d);
    v.segment(i * d, d) = phi;
    out.levels.push_back(std::move(v));
  }
  return out;
}

Eigen::VectorXd level_logits(const Eigen::VectorXd& w, const Features& phi, int k) {
  const auto d = phi.size();
  if (w.size() != k * d) throw ArgumentError("level_logits: weight and feature dimensions disagree");
  Eigen::VectorXd logits(k);
  for (int i = 0; i < k; ++i) logits[i] = w.segment(i * d, d).dot(phi);
  return logits;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double top = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - top).exp();
  return e / e.sum();
}

Eigen::VectorXd feedback_probabilities(const Eigen::VectorXd& w, const Features& phi, int k) {
  return softmax(level_logits(w, phi, k));
}

Eigen::VectorXd feedback_probabilities(const WeightBlocks& w, const Features& phi) {
  if (phi.size() != w.d()) throw ArgumentError("feedback_probabilities: feature dimension mismatch");
  return feedback_probabilities(w.concatenated(), phi, w.k());
}

double expected_level(const Eigen::VectorXd& probabilities) {
  double r = 0.0;
  for (Eigen::Index i = 1; i < probabilities.size(); ++i) r += static_cast<double>(i) * probabilities[i];
  return r;
}

double true_expected_reward(const WeightBlocks& w, const Features& phi) {
  return expected_level(feedback_probabilities(w, phi));
}

int sample_level(const Eigen::VectorXd& probabilities, Rng& rng) {
  return sample_index({probabilities.data(), static_cast<std::size_t>(probabilities.size())}, rng);
}

int sample_feedback(const WeightBlocks& w, const Features& phi, Rng& rng) {
  return sample_level(feedback_probabilities(w, phi), rng);
}

Eigen::VectorXd mix_with_uniform_noise(const Eigen::VectorXd& p, double noise_level) {
  if (!(noise_level >= 0.0 && noise_level <= 1.0)) {
    throw ArgumentError("mix_with_uniform_noise: noise level must lie in [0, 1]");
  }
  const double uniform = 1.0 / static_cast<double>(p.size());
  return ((1.0 - noise_level) * p.array() + noise_level * uniform).matrix();
}

nlohmann::json to_json(const WeightBlocks& w) {
  nlohmann::json blocks = nlohmann::json::array();
  for (int i = 0; i < w.k(); ++i) {
    auto b = w.block(i);
    blocks.push_back(std::vector<double>(b.begin(), b.end()));
  }
  return {{"k", w.k()}, {"d", w.d()}, {"B", w.bound()}, {"blocks", blocks}};
}

WeightBlocks weights_from_json(const nlohmann::json& doc) {
  try {
    const int k = doc.at("k").get<int>();
    const int d = doc.at("d").get<int>();
    const double bound = doc.at("B").get<double>();
    const auto& blocks = doc.at("blocks");
    if (!blocks.is_array() || static_cast<int>(blocks.size()) != k) {
      throw ArgumentError("weights JSON: expected " + std::to_string(k) + " blocks");
    }
    WeightBlocks out(k, d, bound);
    for (int i = 0; i < k; ++i) {
      const auto values = blocks[static_cast<std::size_t>(i)].get<std::vector<double>>();
      if (static_cast<int>(values.size()) != d) {
        throw ArgumentError("weights JSON: block " + std::to_string(i) + " has wrong length");
      }
      for (int j = 0; j < d; ++j) out.block(i)[j] = values[static_cast<std::size_t>(j)];
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("weights JSON: ") + e.what());
  }
}

void save_weights(const WeightBlocks& w, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << to_json(w).dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path);
}

WeightBlocks load_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(path + ": " + e.what());
  }
  return weights_from_json(doc);
}

}  // namespace kfeed
