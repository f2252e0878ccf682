#include "kfeed/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "kfeed/errors.hpp"

namespace kfeed {

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(!grid_path.empty(), "a grid map path is required");
  require(k >= 2, "k must be at least 2");
  require(horizon >= 1, "horizon must be positive");
  require(intended_probability >= 0.0 && intended_probability <= 1.0, "slip probability must lie in [0, 1]");
  require(episodes >= 1, "episodes must be at least 1");
  require(runs >= 1, "runs must be at least 1");
  require(noise >= 0.0 && noise <= 1.0, "noise must lie in [0, 1]");
  require(c_conf > 0.0, "conf-c must be positive");
  require(delta > 0.0 && delta <= 1.0, "delta must lie in (0, 1]");
  require(ridge >= 0.0, "ridge must be non-negative");
  require(bound > 0.0, "B must be positive");
  require(solver.step_size > 0.0 && solver.max_iters >= 0 && solver.grad_tolerance >= 0.0,
          "invalid MLE solver settings");
  require(planner.step_size > 0.0 && planner.epsilon > 0.0 && planner.rollouts_per_gradient >= 1 &&
              planner.max_ascent_iters >= 1,
          "invalid planner settings");
  require(eval_rollouts >= 1, "eval-rollouts must be at least 1");
  require(refit_every >= 0, "refit-every must be non-negative");
  require(threads >= 0, "threads must be non-negative");
}

int ExperimentConfig::effective_refit_every() const {
  if (refit_every > 0) return refit_every;
  return std::max(1, (episodes + 1999) / 2000);
}

Eigen::VectorXd expected_reward_table(const Eigen::MatrixXd& final_features, const Eigen::VectorXd& w, int k) {
  const auto d = final_features.cols();
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> blocks(
      w.data(), k, d);
  const Eigen::MatrixXd logits = final_features * blocks.transpose();  // states x K
  Eigen::VectorXd table(final_features.rows());
  for (Eigen::Index s = 0; s < logits.rows(); ++s) {
    const Eigen::ArrayXd e = (logits.row(s).array() - logits.row(s).maxCoeff()).exp().transpose();
    double weighted = 0.0;
    for (int i = 1; i < k; ++i) weighted += i * e[i];
    table[s] = weighted / e.sum();
  }
  return table;
}

RewardFn terminal_reward(const Eigen::VectorXd& table) {
  return [&table](const Trajectory& t) { return table[t.final_state()]; };
}

Environment make_environment(grid::GridSpec spec, WeightBlocks w_star) {
  if (w_star.d() != spec.feature_dim()) {
    throw ConfigError("weights have dimension " + std::to_string(w_star.d()) + " but the grid needs " +
                      std::to_string(spec.feature_dim()));
  }
  TabularMdp mdp = grid::to_tabular_mdp(spec);
  Eigen::MatrixXd features(mdp.num_states(), spec.feature_dim());
  for (State s = 0; s < mdp.num_states(); ++s) {
    features.row(s) = grid::features_of_final_state(spec, s).transpose();
  }
  Eigen::VectorXd reward = expected_reward_table(features, w_star.concatenated(), w_star.k());
  return {std::move(spec), std::move(mdp), std::move(w_star), std::move(features), std::move(reward), std::nullopt};
}

Environment make_environment(const ExperimentConfig& config) {
  config.validate();
  grid::GridSpec spec = grid::load_grid_map(config.grid_path, config.horizon, config.intended_probability);
  if (!config.weights_path.empty()) {
    WeightBlocks w = load_weights(config.weights_path);
    if (w.k() != config.k) throw ConfigError("weights file has k = " + std::to_string(w.k()));
    return make_environment(std::move(spec), std::move(w));
  }
  Rng rng(derive_seed(config.seed, 0x5EED));
  grid::SynthesisReport report = grid::synthesize_true_weights(spec, config.k, config.bound, rng);
  Environment env = make_environment(std::move(spec), report.weights);
  env.synthesis = std::move(report);
  return env;
}

OptimalValue estimate_optimal_value(const Environment& env, const ExperimentConfig& config, std::uint64_t seed) {
  PlannerConfig planner = config.planner;
  planner.max_ascent_iters *= kOptimalIterationFactor;
  planner.rollouts_per_gradient = kOptimalRollouts;
  Rng rng(seed);
  const RewardFn reward = terminal_reward(env.true_reward);
  const StateActionMatrix start = StateActionMatrix::Zero(env.mdp.num_states(), env.mdp.num_actions());
  PlanResult plan = optimize_policy(env.mdp, reward, planner, start, rng);
  const ValueEstimate est =
      policy_value_statistics(env.mdp, plan.policy.theta(), reward, kOptimalEvalRollouts, rng);
  return {est.mean, est.standard_error, plan.policy.theta()};
}

OptimalValue estimate_optimal_value(const Environment& env, const ExperimentConfig& config) {
  return estimate_optimal_value(env, config, derive_seed(config.seed, 0xB0B));
}

std::vector<EpisodeRecord> run_kucbvi(const Environment& env, const ExperimentConfig& config,
                                      std::uint64_t run_seed, int run_id, double v_star,
                                      const RunOptions& options) {
  const TabularMdp& mdp = env.mdp;
  const int k = env.w_star.k();
  const int d = env.w_star.d();
  const double top_level = k - 1;
  const double bound = config.bound;
  const int refit_every = config.effective_refit_every();

  Rng agent_rng(derive_seed(run_seed, 1));
  Rng eval_rng(derive_seed(run_seed, 2));
  const ConfidenceConstants constants =
      ConfidenceConstants::make(bound, k, config.delta);

  StateActionMatrix theta = StateActionMatrix::Zero(mdp.num_states(), mdp.num_actions());
  FeedbackDataset dataset(k, d);
  Eigen::VectorXd w_hat = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k) * d);
  Eigen::VectorXd optimistic_table = Eigen::VectorXd::Constant(mdp.num_states(), top_level);
  const RewardFn optimistic = terminal_reward(optimistic_table);

  std::vector<EpisodeRecord> records;
  records.reserve(static_cast<std::size_t>(config.episodes));
  double regret_raw = 0.0;
  double regret_clipped = 0.0;
  Trajectory trajectory;

  for (int episode = 1; episode <= config.episodes; ++episode) {
    try {
      if (options.fixed_policy) {
        theta = *options.fixed_policy;
      } else if (episode > 1) {
        const int n = dataset.size();
        double bonus = 0.0;
        if (config.bonus_mode == BonusMode::Practical) {
          bonus = practical_confidence_width(config.c_conf, n);
        } else {
          const double lambda = min_eigenvalue(design_matrix_sigma(dataset), config.ridge);
          bonus = theoretical_confidence_width(constants, k, bound, lambda, n);
        }
        const Eigen::VectorXd estimate = expected_reward_table(env.final_features, w_hat, k);
        for (Eigen::Index s = 0; s < estimate.size(); ++s) {
          optimistic_table[s] = clamp_optimistic(estimate[s], bonus, k);
        }
        theta = optimize_policy(mdp, optimistic, config.planner, theta, agent_rng).policy.theta();
      }

      const StateActionMatrix probs = policy_probabilities(theta);
      sample_trajectory_into(mdp, probs, agent_rng, trajectory);
      const State end = trajectory.final_state();
      const Eigen::VectorXd phi = env.final_features.row(end).transpose();
      Eigen::VectorXd p = feedback_probabilities(env.w_star, phi);
      if (config.noise > 0.0) p = mix_with_uniform_noise(p, config.noise);
      const int y = sample_level(p, agent_rng);
      dataset.add(phi, y);

      if (episode == 1 || episode % refit_every == 0 || episode == config.episodes) {
        w_hat = fit_mle(dataset, bound, config.solver, w_hat).weights;
      }

      // Diagnostics on a separate stream so they never influence the agent.
      double value = 0.0;
      double optimistic_value = 0.0;
      Trajectory eval;
      for (int r = 0; r < config.eval_rollouts; ++r) {
        sample_trajectory_into(mdp, probs, eval_rng, eval);
        const State s = eval.final_state();
        value += (env.true_reward[s] - value) / (r + 1);
        optimistic_value += (optimistic_table[s] - optimistic_value) / (r + 1);
      }
      const double regret = v_star - value;
      regret_raw += regret;
      regret_clipped += std::max(0.0, regret);

      EpisodeRecord rec;
      rec.run = run_id;
      rec.episode = episode;
      rec.feedback = y;
      rec.value_mc = value;
      rec.optimistic_value = optimistic_value;
      rec.w_error = (w_hat - env.w_star.concatenated()).norm();
      rec.regret_cum_raw = regret_raw;
      rec.regret_cum = regret_clipped;
      records.push_back(rec);

      if (options.on_episode) options.on_episode({episode, theta, dataset, w_hat});
    } catch (const std::exception& e) {
      throw std::runtime_error("run " + std::to_string(run_id) + " failed at episode " +
                               std::to_string(episode) + ": " + e.what());
    }
  }
  return records;
}

CurveStats aggregate(const std::vector<std::vector<EpisodeRecord>>& runs, double EpisodeRecord::*field) {
  CurveStats out;
  if (runs.empty()) return out;
  const std::size_t episodes = runs.front().size();
  out.mean.assign(episodes, 0.0);
  out.stddev.assign(episodes, 0.0);
  const double count = static_cast<double>(runs.size());
  for (std::size_t e = 0; e < episodes; ++e) {
    double sum = 0.0;
    for (const auto& run : runs) sum += run[e].*field;
    const double mean = sum / count;
    double ss = 0.0;
    for (const auto& run : runs) ss += (run[e].*field - mean) * (run[e].*field - mean);
    out.mean[e] = mean;
    out.stddev[e] = runs.size() > 1 ? std::sqrt(ss / (count - 1.0)) : 0.0;
  }
  return out;
}

double window_mean(const CurveStats& curve, std::size_t first, std::size_t last) {
  last = std::min(last, curve.mean.size());
  if (first >= last) return 0.0;
  double sum = 0.0;
  for (std::size_t i = first; i < last; ++i) sum += curve.mean[i];
  return sum / static_cast<double>(last - first);
}

BatchResult run_batch(const ExperimentConfig& config, const Environment& env, const OptimalValue& optimal) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  BatchResult batch;
  batch.config = config;
  batch.w_star = to_json(env.w_star);
  batch.optimal = optimal;
  for (int r = 0; r < config.runs; ++r) batch.seeds.push_back(config.seed + static_cast<std::uint64_t>(r));
  batch.runs.resize(static_cast<std::size_t>(config.runs));

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers =
      std::min<unsigned>(config.threads > 0 ? static_cast<unsigned>(config.threads) : hw,
                         static_cast<unsigned>(config.runs));
  std::mutex failure_mutex;
  std::vector<std::string> failures;
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int r = next++; r < config.runs; r = next++) {
      try {
        batch.runs[static_cast<std::size_t>(r)] =
            run_kucbvi(env, config, batch.seeds[static_cast<std::size_t>(r)], r, optimal.value);
      } catch (const std::exception& e) {
        std::lock_guard lock(failure_mutex);
        failures.push_back(e.what());
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(worker);
  }
  if (!failures.empty()) {
    std::string message = "batch failed:";
    for (const auto& f : failures) message += "\n  " + f;
    throw std::runtime_error(message);
  }
  batch.value = aggregate(batch.runs, &EpisodeRecord::value_mc);
  batch.regret = aggregate(batch.runs, &EpisodeRecord::regret_cum);
  batch.regret_raw = aggregate(batch.runs, &EpisodeRecord::regret_cum_raw);
  batch.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return batch;
}

BatchResult run_batch(const ExperimentConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  const Environment env = make_environment(config);
  const OptimalValue optimal = estimate_optimal_value(env, config);
  BatchResult batch = run_batch(config, env, optimal);
  batch.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return batch;
}

std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

}  // namespace kfeed
