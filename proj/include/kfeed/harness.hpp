#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kfeed/feedback.hpp"
#include "kfeed/gridworld.hpp"
#include "kfeed/mdp.hpp"
#include "kfeed/mle.hpp"
#include "kfeed/optimistic.hpp"
#include "kfeed/policy.hpp"

namespace kfeed {

struct ExperimentConfig {
  std::string grid_path;
  std::string weights_path;  // load w* from JSON instead of synthesizing it
  int k = 4;
  int horizon = grid::kDefaultHorizon;
  double intended_probability = grid::kIntendedProbability;
  int episodes = 6000;
  int runs = 20;
  std::uint64_t seed = 1;
  double noise = 0.0;
  BonusMode bonus_mode = BonusMode::Practical;
  double c_conf = 10.0;
  double delta = 0.1;
  double ridge = kDefaultRidge;
  double bound = 80.0;  // B: estimation radius, and the synthesis bound for w*
  SolverConfig solver;
  PlannerConfig planner;
  int eval_rollouts = 200;
  int refit_every = 1;  // 0 selects ceil(N / 2000)
  int threads = 0;      // 0 selects the hardware concurrency
  std::string out_dir = "results";

  /// Throws ConfigError on any out-of-range field.
  void validate() const;
  int effective_refit_every() const;
};

/// Everything a run needs that does not change between runs.
struct Environment {
  grid::GridSpec spec;
  TabularMdp mdp;
  WeightBlocks w_star;
  Eigen::MatrixXd final_features;      // product state -> phi (rows)
  Eigen::VectorXd true_reward;         // product state -> R(tau) for trajectories ending there
  std::optional<grid::SynthesisReport> synthesis;  // set when w* was synthesized here
};

/// Loads the grid and either loads or synthesizes w*.
Environment make_environment(const ExperimentConfig& config);
Environment make_environment(grid::GridSpec spec, WeightBlocks w_star);

/// R(tau) for every final state under concatenated weights w.
Eigen::VectorXd expected_reward_table(const Eigen::MatrixXd& final_features, const Eigen::VectorXd& w, int k);

/// Reward function that looks up the final state of a trajectory.
RewardFn terminal_reward(const Eigen::VectorXd& table);

struct OptimalValue {
  double value = 0.0;
  double standard_error = 0.0;
  StateActionMatrix theta;
};

inline constexpr int kOptimalIterationFactor = 5;
inline constexpr int kOptimalRollouts = 500;
inline constexpr int kOptimalEvalRollouts = 10000;

/// Best-effort Markovian baseline: plans against the true expected reward with a 5x iteration budget
/// and 500 rollouts per gradient, then evaluates with 10^4 rollouts. A lower bound on the optimum.
OptimalValue estimate_optimal_value(const Environment& env, const ExperimentConfig& config,
                                    std::uint64_t seed);
OptimalValue estimate_optimal_value(const Environment& env, const ExperimentConfig& config);

struct EpisodeRecord {
  int run = 0;
  int episode = 0;  // 1-based
  int feedback = 0;
  double value_mc = 0.0;
  double optimistic_value = 0.0;
  double w_error = 0.0;
  double regret_cum_raw = 0.0;  // sum of (V* - V^(n)), unclipped
  double regret_cum = 0.0;      // per-episode regret clipped at 0, then summed
};

struct EpisodeContext {
  int episode;
  const StateActionMatrix& theta;  // deployed policy logits
  const FeedbackDataset& dataset;  // after this episode's sample was appended
  const Eigen::VectorXd& w_hat;
};

struct RunOptions {
  std::function<void(const EpisodeContext&)> on_episode;
  std::optional<StateActionMatrix> fixed_policy;  // deploy these logits every episode instead of planning
};

/// One K-UCBVI run: uniform first episode, then plan against the optimistic reward of the previous
/// estimate, sample one trajectory and one feedback, refit.
std::vector<EpisodeRecord> run_kucbvi(const Environment& env, const ExperimentConfig& config,
                                      std::uint64_t run_seed, int run_id, double v_star,
                                      const RunOptions& options = {});

struct CurveStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct BatchResult {
  ExperimentConfig config;
  nlohmann::json w_star;
  OptimalValue optimal;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<EpisodeRecord>> runs;
  CurveStats value;       // learning curve
  CurveStats regret;      // clipped cumulative regret
  CurveStats regret_raw;  // unclipped cumulative regret
  double wall_time_seconds = 0.0;
};

CurveStats aggregate(const std::vector<std::vector<EpisodeRecord>>& runs,
                     double EpisodeRecord::*field);

/// Runs with seeds seed .. seed + runs - 1, possibly concurrently, then aggregates.
BatchResult run_batch(const ExperimentConfig& config);
BatchResult run_batch(const ExperimentConfig& config, const Environment& env, const OptimalValue& optimal);

/// Writes episodes.csv, regret_raw.csv, summary.json, timing.json, learning_curve.svg, regret_curve.svg.
void emit_results(const BatchResult& batch, const std::string& out_dir);

/// "%.6g"
std::string format_number(double value);

/// Mean of `field` over all runs and over episodes [first, last) (0-based).
double window_mean(const CurveStats& curve, std::size_t first, std::size_t last);

}  // namespace kfeed
