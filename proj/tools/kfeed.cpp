#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "kfeed/checks.hpp"
#include "kfeed/errors.hpp"
#include "kfeed/harness.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

/// Expands `--config <path>` into `--key value` tokens placed right after the subcommand, so that
/// flags given later on the command line take precedence.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  for (std::size_t i = 1; i < args.size(); ++i) {
    std::string path;
    std::size_t erase = 0;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      erase = 2;
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      erase = 1;
    } else {
      continue;
    }
    args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + erase));
    std::vector<std::string> tokens;
    for (const CLI::ConfigItem& item : CLI::ConfigINI().from_file(path)) {
      std::string key = item.name;
      std::replace(key.begin(), key.end(), '_', '-');
      if (key.empty() || key == "++" || key == "--") continue;  // section markers
      tokens.push_back("--" + key);
      tokens.insert(tokens.end(), item.inputs.begin(), item.inputs.end());
    }
    const std::size_t at = args.size() > 1 ? 2 : args.size();
    args.insert(args.begin() + static_cast<std::ptrdiff_t>(at), tokens.begin(), tokens.end());
    break;
  }
  return args;
}

void print_run_summary(const kfeed::BatchResult& batch, const std::string& out_dir) {
  const std::size_t n = batch.value.mean.size();
  const std::size_t decile = std::max<std::size_t>(1, n / 10);
  std::printf("optimal value estimate  %s (se %s)\n", kfeed::format_number(batch.optimal.value).c_str(),
              kfeed::format_number(batch.optimal.standard_error).c_str());
  std::printf("first-decile mean value %s\n", kfeed::format_number(kfeed::window_mean(batch.value, 0, decile)).c_str());
  std::printf("last-decile mean value  %s\n", kfeed::format_number(kfeed::window_mean(batch.value, n - decile, n)).c_str());
  std::printf("final mean regret       %s\n", kfeed::format_number(batch.regret.mean.back()).c_str());
  std::printf("wall time               %.1f s\n", batch.wall_time_seconds);
  std::printf("outputs written to %s\n", out_dir.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reinforcement learning from K-ary episodic feedback"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  kfeed::ExperimentConfig config;
  std::string bonus = "practical";
  CLI::App* run = app.add_subcommand("run", "Run a batch of learning runs and write curves");
  run->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  run->add_option("--grid", config.grid_path, "Grid map file")->required()->check(CLI::ExistingFile);
  run->add_option("--weights", config.weights_path, "True weights JSON (synthesized when absent)")->check(CLI::ExistingFile);
  run->add_option("--k", config.k, "Number of feedback levels")->capture_default_str();
  run->add_option("--horizon", config.horizon, "Episode length")->capture_default_str();
  run->add_option("--intended-prob", config.intended_probability, "Probability of the intended move")->capture_default_str();
  run->add_option("--episodes", config.episodes, "Episodes per run")->capture_default_str();
  run->add_option("--runs", config.runs, "Independent runs")->capture_default_str();
  run->add_option("--seed", config.seed, "Base seed")->capture_default_str();
  run->add_option("--noise", config.noise, "Feedback noise level")->capture_default_str();
  run->add_option("--bonus-mode", bonus, "Bonus mode")->check(CLI::IsMember({"practical", "theoretical"}))->capture_default_str();
  run->add_option("--conf-c", config.c_conf, "Practical confidence constant")->capture_default_str();
  run->add_option("--delta", config.delta, "Failure probability for the theoretical width")->capture_default_str();
  run->add_option("--ridge", config.ridge, "Ridge added to the design matrix")->capture_default_str();
  run->add_option("--b", config.bound, "Weight norm bound")->capture_default_str();
  run->add_option("--pg-step", config.planner.step_size, "Planner step size")->capture_default_str();
  run->add_option("--pg-samples", config.planner.rollouts_per_gradient, "Rollouts per planner gradient")->capture_default_str();
  run->add_option("--pg-eps", config.planner.epsilon, "Planner stopping tolerance")->capture_default_str();
  run->add_option("--pg-iters", config.planner.max_ascent_iters, "Planner iterations per episode")->capture_default_str();
  run->add_option("--mle-step", config.solver.step_size, "Estimator step size")->capture_default_str();
  run->add_option("--mle-iters", config.solver.max_iters, "Estimator iteration cap")->capture_default_str();
  run->add_option("--mle-tol", config.solver.grad_tolerance, "Estimator gradient tolerance")->capture_default_str();
  run->add_option("--eval-rollouts", config.eval_rollouts, "Rollouts per value estimate")->capture_default_str();
  run->add_option("--refit-every", config.refit_every, "Episodes between refits (0 = automatic)")->capture_default_str();
  run->add_option("--threads", config.threads, "Worker threads (0 = hardware)")->capture_default_str();
  run->add_option("--out", config.out_dir, "Output directory")->capture_default_str();

  std::string synth_grid, synth_out = "weights.json";
  int synth_k = 4, synth_horizon = kfeed::grid::kDefaultHorizon;
  double synth_bound = config.bound;
  std::uint64_t synth_seed = 1;
  CLI::App* synth = app.add_subcommand("synth-weights", "Fit true weights to the rule-based labels");
  synth->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  synth->add_option("--grid", synth_grid, "Grid map file")->required()->check(CLI::ExistingFile);
  synth->add_option("--k", synth_k, "Number of feedback levels")->capture_default_str();
  synth->add_option("--b", synth_bound, "Weight norm bound")->capture_default_str();
  synth->add_option("--horizon", synth_horizon, "Episode length")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Seed")->capture_default_str();
  synth->add_option("--out", synth_out, "Output JSON file")->capture_default_str();

  std::uint64_t check_seed = 1;
  CLI::App* check = app.add_subcommand("check", "Run the oracle and invariant checks");
  check->add_option("--seed", check_seed, "Seed")->capture_default_str();

  try {
    std::vector<std::string> args = expand_config(std::vector<std::string>(argv, argv + argc));
    std::reverse(args.begin(), args.end());
    args.pop_back();  // program name
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*run) {
      config.bonus_mode = kfeed::bonus_mode_from_string(bonus);
      config.validate();
      const kfeed::Environment env = kfeed::make_environment(config);
      const kfeed::OptimalValue optimal = kfeed::estimate_optimal_value(env, config);
      const kfeed::BatchResult batch = kfeed::run_batch(config, env, optimal);
      kfeed::emit_results(batch, config.out_dir);
      print_run_summary(batch, config.out_dir);
    } else if (*synth) {
      if (synth_k < 2) throw kfeed::ConfigError("--k must be at least 2");
      if (!(synth_bound > 0.0)) throw kfeed::ConfigError("--b must be positive");
      if (synth_horizon < 1) throw kfeed::ConfigError("--horizon must be positive");
      const kfeed::grid::GridSpec spec = kfeed::grid::load_grid_map(synth_grid, synth_horizon);
      kfeed::Rng rng(synth_seed);
      const kfeed::grid::SynthesisReport report = kfeed::grid::synthesize_true_weights(spec, synth_k, synth_bound, rng);
      kfeed::save_weights(report.weights, synth_out);
      std::printf("held-out agreement %s, danger agreement %s, attempts %d\n",
                  kfeed::format_number(report.agreement).c_str(),
                  kfeed::format_number(report.danger_agreement).c_str(), report.attempts);
    } else if (*check) {
      const auto results = kfeed::run_self_checks(std::cout, check_seed);
      const bool ok = std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
      return ok ? 0 : kExitRuntime;
    }
  } catch (const kfeed::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const kfeed::ParseError& e) {
    std::cerr << "grid map error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const kfeed::ArgumentError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
