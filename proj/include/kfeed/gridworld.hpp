#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "kfeed/feedback.hpp"
#include "kfeed/mdp.hpp"
#include "kfeed/mle.hpp"
#include "kfeed/random.hpp"

namespace kfeed::grid {

enum class CellKind : char { Empty, Wall, Goal, Danger, Coin, Start };

enum Direction : int { Up = 0, Down = 1, Left = 2, Right = 3 };
inline constexpr int kNumDirections = 4;

inline constexpr double kIntendedProbability = 0.91;
inline constexpr int kDefaultHorizon = 50;

/// Parsed grid world. Cells are indexed row-major; row 0 is the first line of the map.
struct GridSpec {
  int width = 0;
  int height = 0;
  std::vector<CellKind> cells;
  std::vector<int> coin_cells;  // coin id -> cell
  int start = -1;
  int goal = -1;
  int danger = -1;  // -1 when the map has no danger cell
  double intended_probability = kIntendedProbability;
  int horizon = kDefaultHorizon;

  int num_cells() const { return width * height; }
  int num_coins() const { return static_cast<int>(coin_cells.size()); }
  int row(int cell) const { return cell / width; }
  int col(int cell) const { return cell % width; }
  bool is_wall(int cell) const { return cells[static_cast<std::size_t>(cell)] == CellKind::Wall; }
  bool has_danger() const { return danger >= 0; }
  /// Coin id at `cell`, or -1.
  int coin_at(int cell) const;
  int feature_dim() const { return 4 + num_coins(); }
  int manhattan(int a, int b) const;
};

/// Simulator state: agent cell plus the bitmask of collected coins.
struct GridState {
  int cell = 0;
  unsigned mask = 0;

  bool operator==(const GridState&) const = default;
};

/// Parses the ASCII map format ('.', '#', 'S', 'G', 'D', 'C'; one row per line).
GridSpec parse_grid_map(std::string_view text, int horizon = kDefaultHorizon,
                        double intended_probability = kIntendedProbability);
GridSpec load_grid_map(const std::string& path, int horizon = kDefaultHorizon,
                       double intended_probability = kIntendedProbability);

/// Cell reached by moving one step in `dir`; walls and the border leave the agent in place.
int move_cell(const GridSpec& spec, int cell, Direction dir);

/// Probability of each realized direction given the intended one.
std::array<double, kNumDirections> slip_distribution(const GridSpec& spec, Direction intended);

/// Successor after the realized direction is known. Goal and danger are absorbing.
GridState apply_direction(const GridSpec& spec, const GridState& state, Direction realized);

GridState grid_step(const GridSpec& spec, const GridState& state, Direction action, Rng& rng);

GridState initial_state(const GridSpec& spec);

/// Product state space (cell x coin mask). State index = cell * 2^c + mask.
int num_product_states(const GridSpec& spec);
State encode_state(const GridSpec& spec, const GridState& state);
GridState decode_state(const GridSpec& spec, State s);

inline constexpr double kMaxProductStates = 1e6;

TabularMdp to_tabular_mdp(const GridSpec& spec);

/// Features of a trajectory that ends in product state `final_state`.
Features features_of_final_state(const GridSpec& spec, State final_state);

/// (d_goal, d_danger, 1{goal}, 1{danger}, coin_0..coin_{c-1}) with distances divided by
/// (width-1 + height-1), then the whole vector divided by sqrt(4 + c).
Features extract_features(const GridSpec& spec, const Trajectory& trajectory);

/// Level of a trajectory ending in `final_state` under the coin/goal/danger rule.
int label_of_final_state(const GridSpec& spec, State final_state, int k);
int rule_based_label(const GridSpec& spec, const Trajectory& trajectory, int k);

/// Deterministic coin-then-goal walker: heads to the nearest uncollected coin, then to the goal.
StateActionMatrix scripted_policy(const GridSpec& spec);

struct SynthesisOptions {
  int num_trajectories = 20000;
  double random_fraction = 0.7;
  double holdout_fraction = 0.2;
  double min_agreement = 0.9;
  int max_bound_doublings = 4;
  SolverConfig solver{1.0, 5000, 1e-7};
};

struct SynthesisReport {
  WeightBlocks weights;
  double agreement;         // held-out argmax agreement with rule labels
  double danger_agreement;  // held-out danger endings where level 0 is the most likely level
  int danger_holdout_count;
  int attempts;
};

/// Learns ground-truth weights that imitate the rule labels, scaled so ||w_i|| <= B/K.
SynthesisReport synthesize_true_weights(const GridSpec& spec, int k, double bound, Rng& rng,
                                        const SynthesisOptions& options = {});

}  // namespace kfeed::grid
