#include "kfeed/gridworld.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "kfeed/errors.hpp"

namespace kfeed::grid {

int GridSpec::coin_at(int cell) const {
  if (cells[static_cast<std::size_t>(cell)] != CellKind::Coin) return -1;
  const auto it = std::find(coin_cells.begin(), coin_cells.end(), cell);
  return static_cast<int>(it - coin_cells.begin());
}

int GridSpec::manhattan(int a, int b) const {
  return std::abs(row(a) - row(b)) + std::abs(col(a) - col(b));
}

GridSpec parse_grid_map(std::string_view text, int horizon, double intended_probability) {
  if (horizon < 1) throw ArgumentError("grid map: horizon must be positive");
  if (!(intended_probability >= 0.0 && intended_probability <= 1.0)) {
    throw ArgumentError("grid map: intended-move probability must lie in [0, 1]");
  }
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? text.size() - pos : end - pos);
    lines.push_back(line);
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw ParseError("empty map", 1, 1);

  GridSpec spec;
  spec.height = static_cast<int>(lines.size());
  spec.width = static_cast<int>(lines.front().size());
  spec.intended_probability = intended_probability;
  spec.horizon = horizon;
  if (spec.width == 0) throw ParseError("empty row", 1, 1);
  spec.cells.reserve(static_cast<std::size_t>(spec.width) * spec.height);

  for (int r = 0; r < spec.height; ++r) {
    const auto line = lines[static_cast<std::size_t>(r)];
    if (static_cast<int>(line.size()) != spec.width) {
      throw ParseError("row has " + std::to_string(line.size()) + " cells, expected " +
                           std::to_string(spec.width),
                       r + 1, static_cast<int>(std::min<std::size_t>(line.size(), spec.width)) + 1);
    }
    for (int c = 0; c < spec.width; ++c) {
      const int cell = r * spec.width + c;
      CellKind kind;
      switch (line[static_cast<std::size_t>(c)]) {
        case '.': kind = CellKind::Empty; break;
        case '#': kind = CellKind::Wall; break;
        case 'S':
          if (spec.start >= 0) throw ParseError("second start cell", r + 1, c + 1);
          kind = CellKind::Start;
          spec.start = cell;
          break;
        case 'G':
          if (spec.goal >= 0) throw ParseError("second goal cell", r + 1, c + 1);
          kind = CellKind::Goal;
          spec.goal = cell;
          break;
        case 'D':
          if (spec.danger >= 0) throw ParseError("second danger cell", r + 1, c + 1);
          kind = CellKind::Danger;
          spec.danger = cell;
          break;
        case 'C':
          kind = CellKind::Coin;
          spec.coin_cells.push_back(cell);
          break;
        default:
          throw ParseError(std::string("unknown symbol '") + line[static_cast<std::size_t>(c)] + "'", r + 1,
                           c + 1);
      }
      spec.cells.push_back(kind);
    }
  }
  if (spec.start < 0) throw ParseError("map has no start cell", 1, 1);
  if (spec.goal < 0) throw ParseError("map has no goal cell", 1, 1);
  if (spec.num_coins() > 16) throw ParseError("at most 16 coins are supported", 1, 1);
  return spec;
}

GridSpec load_grid_map(const std::string& path, int horizon, double intended_probability) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open grid map " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_grid_map(buffer.str(), horizon, intended_probability);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line(), e.column());
  }
}

int move_cell(const GridSpec& spec, int cell, Direction dir) {
  int r = spec.row(cell);
  int c = spec.col(cell);
  switch (dir) {
    case Up: --r; break;
    case Down: ++r; break;
    case Left: --c; break;
    case Right: ++c; break;
  }
  if (r < 0 || r >= spec.height || c < 0 || c >= spec.width) return cell;
  const int next = r * spec.width + c;
  return spec.is_wall(next) ? cell : next;
}

std::array<double, kNumDirections> slip_distribution(const GridSpec& spec, Direction intended) {
  const double other = (1.0 - spec.intended_probability) / (kNumDirections - 1);
  std::array<double, kNumDirections> dist{};
  dist.fill(other);
  dist[static_cast<std::size_t>(intended)] = spec.intended_probability;
  return dist;
}

GridState apply_direction(const GridSpec& spec, const GridState& state, Direction realized) {
  if (state.cell == spec.goal || state.cell == spec.danger) return state;
  GridState next{move_cell(spec, state.cell, realized), state.mask};
  const int coin = spec.coin_at(next.cell);
  if (coin >= 0) next.mask |= 1u << coin;
  return next;
}

GridState grid_step(const GridSpec& spec, const GridState& state, Direction action, Rng& rng) {
  const auto dist = slip_distribution(spec, action);
  const auto realized = static_cast<Direction>(sample_index(dist, rng));
  return apply_direction(spec, state, realized);
}

GridState initial_state(const GridSpec& spec) { return {spec.start, 0u}; }

int num_product_states(const GridSpec& spec) { return spec.num_cells() << spec.num_coins(); }

State encode_state(const GridSpec& spec, const GridState& state) {
  return static_cast<State>((state.cell << spec.num_coins()) | static_cast<int>(state.mask));
}

GridState decode_state(const GridSpec& spec, State s) {
  const int c = spec.num_coins();
  return {s >> c, static_cast<unsigned>(s & ((1 << c) - 1))};
}

TabularMdp to_tabular_mdp(const GridSpec& spec) {
  const double count = static_cast<double>(spec.num_cells()) * std::ldexp(1.0, spec.num_coins());
  if (count > kMaxProductStates) {
    throw CapacityError("grid product state space has " + std::to_string(count) + " states");
  }
  const int n = num_product_states(spec);
  const std::size_t stride = static_cast<std::size_t>(n);
  std::vector<double> transition(stride * kNumDirections * stride, 0.0);
  for (State s = 0; s < n; ++s) {
    const GridState state = decode_state(spec, s);
    for (int a = 0; a < kNumDirections; ++a) {
      double* row = transition.data() + (static_cast<std::size_t>(s) * kNumDirections + a) * stride;
      if (spec.is_wall(state.cell)) {
        row[s] = 1.0;  // unreachable; kept so every row is a distribution
        continue;
      }
      const auto dist = slip_distribution(spec, static_cast<Direction>(a));
      for (int dir = 0; dir < kNumDirections; ++dir) {
        if (dist[static_cast<std::size_t>(dir)] == 0.0) continue;
        const State next = encode_state(spec, apply_direction(spec, state, static_cast<Direction>(dir)));
        row[next] += dist[static_cast<std::size_t>(dir)];
      }
    }
  }
  std::vector<double> initial(stride, 0.0);
  initial[static_cast<std::size_t>(encode_state(spec, initial_state(spec)))] = 1.0;
  return TabularMdp(n, kNumDirections, spec.horizon, std::move(transition), std::move(initial));
}

Features features_of_final_state(const GridSpec& spec, State final_state) {
  const GridState end = decode_state(spec, final_state);
  const int c = spec.num_coins();
  const double span = std::max(1, spec.width - 1 + spec.height - 1);
  Features phi = Features::Zero(4 + c);
  phi[0] = spec.manhattan(end.cell, spec.goal) / span;
  if (spec.has_danger()) phi[1] = spec.manhattan(end.cell, spec.danger) / span;
  phi[2] = end.cell == spec.goal ? 1.0 : 0.0;
  phi[3] = end.cell == spec.danger ? 1.0 : 0.0;
  for (int i = 0; i < c; ++i) phi[4 + i] = (end.mask >> i) & 1u ? 1.0 : 0.0;
  phi /= std::sqrt(static_cast<double>(4 + c));
  return phi;
}

Features extract_features(const GridSpec& spec, const Trajectory& trajectory) {
  if (trajectory.states.empty()) throw ArgumentError("extract_features: empty trajectory");
  return features_of_final_state(spec, trajectory.final_state());
}

int label_of_final_state(const GridSpec& spec, State final_state, int k) {
  const int c = spec.num_coins();
  if (k < c + 1 || k < 2) {
    throw ConfigError("rule-based labels need at least c + 1 = " + std::to_string(c + 1) + " levels");
  }
  const GridState end = decode_state(spec, final_state);
  if (end.cell == spec.danger) return 0;
  const int collected = std::popcount(end.mask);
  if (collected == c && end.cell == spec.goal) return k - 1;
  if (c == 0) return 0;
  // One level per coin when the levels are exactly enough; otherwise spread over 0..K-2.
  const int level = k == c + 1 ? collected
                               : static_cast<int>(std::lround(static_cast<double>(k - 2) * collected / c));
  return std::min(level, k - 2);
}

int rule_based_label(const GridSpec& spec, const Trajectory& trajectory, int k) {
  if (trajectory.states.empty()) throw ArgumentError("rule_based_label: empty trajectory");
  return label_of_final_state(spec, trajectory.final_state(), k);
}

namespace {

/// BFS step counts to `target` over non-wall cells; the danger cell is impassable unless it is the target.
std::vector<int> distance_field(const GridSpec& spec, int target) {
  constexpr int kUnreachable = std::numeric_limits<int>::max();
  std::vector<int> dist(static_cast<std::size_t>(spec.num_cells()), kUnreachable);
  std::deque<int> queue{target};
  dist[static_cast<std::size_t>(target)] = 0;
  while (!queue.empty()) {
    const int cell = queue.front();
    queue.pop_front();
    for (int dir = 0; dir < kNumDirections; ++dir) {
      const int next = move_cell(spec, cell, static_cast<Direction>(dir));
      if (next == cell || dist[static_cast<std::size_t>(next)] != kUnreachable) continue;
      if (next == spec.danger) continue;
      dist[static_cast<std::size_t>(next)] = dist[static_cast<std::size_t>(cell)] + 1;
      queue.push_back(next);
    }
  }
  return dist;
}

}  // namespace

StateActionMatrix scripted_policy(const GridSpec& spec) {
  constexpr int kUnreachable = std::numeric_limits<int>::max();
  std::vector<std::vector<int>> coin_fields;
  for (int cell : spec.coin_cells) coin_fields.push_back(distance_field(spec, cell));
  const std::vector<int> goal_field = distance_field(spec, spec.goal);

  const int n = num_product_states(spec);
  StateActionMatrix policy = StateActionMatrix::Zero(n, kNumDirections);
  for (State s = 0; s < n; ++s) {
    const GridState state = decode_state(spec, s);
    const std::vector<int>* field = &goal_field;
    int best_distance = kUnreachable;
    for (int i = 0; i < spec.num_coins(); ++i) {
      if ((state.mask >> i) & 1u) continue;
      const int d = coin_fields[static_cast<std::size_t>(i)][static_cast<std::size_t>(state.cell)];
      if (d < best_distance) {
        best_distance = d;
        field = &coin_fields[static_cast<std::size_t>(i)];
      }
    }
    int action = 0;
    int best = (*field)[static_cast<std::size_t>(state.cell)];
    for (int dir = 0; dir < kNumDirections; ++dir) {
      const int next = move_cell(spec, state.cell, static_cast<Direction>(dir));
      const int d = (*field)[static_cast<std::size_t>(next)];
      if (d < best) {
        best = d;
        action = dir;
      }
    }
    policy(s, action) = 1.0;
  }
  return policy;
}

namespace {

int argmax_level(const Eigen::VectorXd& p) {
  Eigen::Index best = 0;
  p.maxCoeff(&best);
  return static_cast<int>(best);
}

}  // namespace

SynthesisReport synthesize_true_weights(const GridSpec& spec, int k, double bound, Rng& rng,
                                        const SynthesisOptions& options) {
  if (!(bound > 0.0)) throw ArgumentError("synthesize_true_weights: bound must be positive");
  label_of_final_state(spec, encode_state(spec, initial_state(spec)), k);  // validates k against c

  const TabularMdp mdp = to_tabular_mdp(spec);
  const StateActionMatrix uniform =
      StateActionMatrix::Constant(mdp.num_states(), mdp.num_actions(), 1.0 / mdp.num_actions());
  const StateActionMatrix scripted = scripted_policy(spec);

  std::vector<State> endings;
  endings.reserve(static_cast<std::size_t>(options.num_trajectories));
  Trajectory trajectory;
  for (int i = 0; i < options.num_trajectories; ++i) {
    const bool random_walk = uniform01(rng) < options.random_fraction;
    sample_trajectory_into(mdp, random_walk ? uniform : scripted, rng, trajectory);
    endings.push_back(trajectory.final_state());
  }
  std::vector<std::size_t> order(endings.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(order[i - 1], order[std::min(j, i - 1)]);
  }
  const auto holdout_count = static_cast<std::size_t>(options.holdout_fraction * endings.size());

  const int d = spec.feature_dim();
  FeedbackDataset train(k, d);
  for (std::size_t i = holdout_count; i < order.size(); ++i) {
    const State end = endings[order[i]];
    train.add(features_of_final_state(spec, end), label_of_final_state(spec, end, k));
  }

  double radius = bound;
  std::optional<Eigen::VectorXd> warm;
  double agreement = 0.0;
  for (int attempt = 0; attempt <= options.max_bound_doublings; ++attempt, radius *= 2.0) {
    const FitResult fit = fit_mle(train, radius, options.solver, warm);
    warm = fit.weights;

    WeightBlocks w = WeightBlocks::from_concatenated(fit.weights, k, radius);
    // Softmax is invariant to a common shift of every block; centering shrinks the block norms.
    Eigen::VectorXd mean_block = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < k; ++i) mean_block += w.block(i);
    mean_block /= k;
    for (int i = 0; i < k; ++i) w.block(i) -= mean_block;
    const double largest = w.max_block_norm();
    if (largest > radius / k) {
      const double scale = (radius / k) / largest;
      for (int i = 0; i < k; ++i) w.block(i) *= scale;
    }

    int agree = 0;
    int danger_cases = 0;
    int danger_agree = 0;
    for (std::size_t i = 0; i < holdout_count; ++i) {
      const State end = endings[order[i]];
      const int predicted = argmax_level(feedback_probabilities(w, features_of_final_state(spec, end)));
      if (predicted == label_of_final_state(spec, end, k)) ++agree;
      if (decode_state(spec, end).cell == spec.danger) {
        ++danger_cases;
        if (predicted == 0) ++danger_agree;
      }
    }
    agreement = holdout_count > 0 ? static_cast<double>(agree) / holdout_count : 0.0;
    if (agreement >= options.min_agreement) {
      const double danger_rate = danger_cases > 0 ? static_cast<double>(danger_agree) / danger_cases : 1.0;
      return {std::move(w), agreement, danger_rate, danger_cases, attempt + 1};
    }
  }
  throw SynthesisError("ground-truth weight synthesis reached agreement " + std::to_string(agreement) +
                           " at the largest bound " + std::to_string(radius / 2.0),
                       agreement);
}

}  // namespace kfeed::grid
