#include <doctest.h>

#include <map>
#include <unordered_map>

#include "kfeed/errors.hpp"
#include "kfeed/mdp.hpp"
#include "kfeed/policy.hpp"
#include "support.hpp"

using namespace kfeed;

namespace {

TabularMdp single_row_mdp(std::vector<double> row) {
  const int states = static_cast<int>(row.size());
  std::vector<double> transition(static_cast<std::size_t>(states) * states, 0.0);
  for (int s = 0; s < states; ++s) {
    for (int n = 0; n < states; ++n) transition[static_cast<std::size_t>(s) * states + n] = row[n];
  }
  std::vector<double> initial(static_cast<std::size_t>(states), 0.0);
  initial[0] = 1.0;
  return TabularMdp(states, 1, 1, std::move(transition), std::move(initial));
}

StateActionMatrix uniform_rows(int states, int actions) {
  return StateActionMatrix::Constant(states, actions, 1.0 / actions);
}

}  // namespace

TEST_CASE("constructor rejects malformed tables") {
  CHECK_THROWS_AS(TabularMdp(2, 1, 1, {0.5, 0.5, 1.0}, {1.0, 0.0}), ArgumentError);
  CHECK_THROWS_AS(TabularMdp(2, 1, 1, {0.5, 0.4, 0.0, 1.0}, {1.0, 0.0}), ArgumentError);
  CHECK_THROWS_AS(TabularMdp(2, 1, 1, {1.2, -0.2, 0.0, 1.0}, {1.0, 0.0}), ArgumentError);
  CHECK_THROWS_AS(TabularMdp(2, 1, 1, {1.0, 0.0, 0.0, 1.0}, {0.5, 0.6}), ArgumentError);
  CHECK_THROWS_AS(TabularMdp(2, 1, 0, {1.0, 0.0, 0.0, 1.0}, {1.0, 0.0}), ArgumentError);
  CHECK_THROWS_AS(TabularMdp(0, 1, 1, {}, {}), ArgumentError);
}

TEST_CASE("successor lists hold the nonzero entries in order") {
  const auto mdp = single_row_mdp({0.0, 0.25, 0.0, 0.75});
  const auto succ = mdp.successors(2, 0);
  REQUIRE(succ.size() == 2);
  CHECK(succ[0].state == 1);
  CHECK(succ[0].probability == 0.25);
  CHECK(succ[1].state == 3);
  CHECK(mdp.initial_support().size() == 1);
}

TEST_CASE("point-mass row always yields its target") {
  const auto mdp = single_row_mdp({0.0, 0.0, 0.0, 1.0, 0.0});
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) CHECK(sample_transition(mdp, 1, 0, rng) == 3);
}

TEST_CASE("slip-shaped row is reproduced by sampling frequencies") {
  const std::vector<double> row{0.91, 0.03, 0.03, 0.03};
  const auto mdp = single_row_mdp(row);
  Rng rng(11);
  std::vector<int> counts(4, 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(sample_transition(mdp, 0, 0, rng))];
  for (int n = 0; n < 4; ++n) CHECK(std::abs(counts[n] / double(draws) - row[n]) <= 0.01);
}

TEST_CASE("sampling is a pure function of the seed") {
  std::mt19937_64 gen(3);
  const auto mdp = testing::random_mdp(gen, 5, 3, 6);
  const auto policy = policy_probabilities(testing::random_theta(gen, 5, 3));
  Rng a(99), b(99);
  for (int i = 0; i < 200; ++i) CHECK(sample_trajectory(mdp, policy, a) == sample_trajectory(mdp, policy, b));
  Rng c(99), d(99);
  for (int i = 0; i < 200; ++i) CHECK(sample_transition(mdp, 2, 1, c) == sample_transition(mdp, 2, 1, d));
}

TEST_CASE("out-of-range indices are argument errors") {
  const auto mdp = single_row_mdp({0.5, 0.5});
  Rng rng(1);
  CHECK_THROWS_AS(sample_transition(mdp, 2, 0, rng), ArgumentError);
  CHECK_THROWS_AS(sample_transition(mdp, 0, 1, rng), ArgumentError);
  CHECK_THROWS_AS(sample_transition(mdp, -1, 0, rng), ArgumentError);
}

TEST_CASE("invalid policies are rejected") {
  const auto mdp = testing::deterministic_chain(3, 2, 2);
  Rng rng(1);
  StateActionMatrix bad = uniform_rows(3, 2);
  bad(1, 0) = 0.7;
  CHECK_THROWS_AS(sample_trajectory(mdp, bad, rng), ArgumentError);
  CHECK_THROWS_AS(sample_trajectory(mdp, uniform_rows(2, 2), rng), ArgumentError);
  CHECK_THROWS_AS(enumerate_trajectories(mdp, bad), ArgumentError);
}

TEST_CASE("fully deterministic instance has a single trajectory") {
  const auto mdp = testing::deterministic_chain(3, 2, 1);
  StateActionMatrix policy = StateActionMatrix::Zero(3, 2);
  policy.col(1).setOnes();
  Rng rng(5);
  const auto t = sample_trajectory(mdp, policy, rng);
  CHECK(t.states == std::vector<State>{0, 1});
  CHECK(t.actions == std::vector<Action>{1});
  const auto all = enumerate_trajectories(mdp, policy);
  REQUIRE(all.size() == 1);
  CHECK(all[0].probability == 1.0);
  CHECK(all[0].trajectory == t);
}

TEST_CASE("uniform policy on a two-action chain picks each action half the time") {
  const auto mdp = testing::deterministic_chain(4, 2, 1);
  Rng rng(21);
  int ones = 0;
  const int episodes = 100000;
  for (int i = 0; i < episodes; ++i) ones += sample_trajectory(mdp, uniform_rows(4, 2), rng).actions[0];
  CHECK(std::abs(ones / double(episodes) - 0.5) <= 0.01);
}

TEST_CASE("sampled trajectories satisfy the structural invariants") {
  std::mt19937_64 gen(8);
  for (int inst = 0; inst < 10; ++inst) {
    const auto mdp = testing::random_mdp(gen, 4, 3, 5);
    const auto policy = policy_probabilities(testing::random_theta(gen, 4, 3, 2.0));
    Rng rng(inst);
    for (int i = 0; i < 100; ++i) {
      const auto t = sample_trajectory(mdp, policy, rng);
      CHECK(t.states.size() == 6);
      CHECK(t.actions.size() == 5);
      CHECK(is_valid_trajectory(mdp, t));
    }
  }
}

TEST_CASE("structural trajectory check") {
  const auto mdp = testing::deterministic_chain(3, 2, 2);
  CHECK(is_valid_trajectory(mdp, {{0, 1, 1}, {1, 0}}));
  CHECK_FALSE(is_valid_trajectory(mdp, {{0, 1}, {1}}));
  CHECK_FALSE(is_valid_trajectory(mdp, {{0, 1, 1, 1}, {1, 0}}));
  CHECK_FALSE(is_valid_trajectory(mdp, {{0, 1, 1}, {1, 5}}));
  CHECK_FALSE(is_valid_trajectory(mdp, {{0, 3, 1}, {1, 0}}));
  CHECK_FALSE(is_valid_trajectory(mdp, {{0, -1, 1}, {1, 0}}));
}

TEST_CASE("one state, two actions, two steps: four equally likely trajectories") {
  const TabularMdp mdp(1, 2, 2, {1.0, 1.0}, {1.0});
  const auto all = enumerate_trajectories(mdp, uniform_rows(1, 2));
  REQUIRE(all.size() == 4);
  for (const auto& wt : all) CHECK(wt.probability == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("enumeration mass sums to one on random instances") {
  std::mt19937_64 gen(12);
  for (int inst = 0; inst < 30; ++inst) {
    const int states = 1 + static_cast<int>(gen() % 5);
    const int actions = 1 + static_cast<int>(gen() % 3);
    const int horizon = 1 + static_cast<int>(gen() % 4);
    const auto mdp = testing::random_mdp(gen, states, actions, horizon);
    const auto policy = policy_probabilities(testing::random_theta(gen, states, actions));
    double total = 0.0;
    for (const auto& wt : enumerate_trajectories(mdp, policy)) {
      CHECK(wt.probability > 0.0);
      CHECK(is_valid_trajectory(mdp, wt.trajectory));
      total += wt.probability;
    }
    CHECK(std::abs(total - 1.0) <= 1e-9);
  }
}

TEST_CASE("enumeration visitor and list agree") {
  std::mt19937_64 gen(13);
  const auto mdp = testing::random_mdp(gen, 3, 2, 3);
  const auto policy = policy_probabilities(testing::random_theta(gen, 3, 2));
  const auto list = enumerate_trajectories(mdp, policy);
  std::size_t i = 0;
  for_each_trajectory(mdp, policy, [&](const Trajectory& t, double p) {
    REQUIRE(i < list.size());
    CHECK(t == list[i].trajectory);
    CHECK(p == list[i].probability);
    ++i;
  });
  CHECK(i == list.size());
}

TEST_CASE("enumeration probability equals the hand-multiplied path product") {
  std::mt19937_64 gen(14);
  const auto mdp = testing::random_mdp(gen, 3, 2, 3);
  const auto policy = policy_probabilities(testing::random_theta(gen, 3, 2));
  for (const auto& wt : enumerate_trajectories(mdp, policy)) {
    const auto& t = wt.trajectory;
    double p = mdp.initial_distribution()[static_cast<std::size_t>(t.states[0])];
    for (int h = 0; h < t.horizon(); ++h) {
      p *= policy(t.states[h], t.actions[h]) * mdp.probability(t.states[h], t.actions[h], t.states[h + 1]);
    }
    CHECK(wt.probability == doctest::Approx(p).epsilon(1e-13));
  }
}

TEST_CASE("size guard raises a capacity error") {
  const auto mdp = testing::deterministic_chain(10, 3, 6);
  CHECK_THROWS_AS(enumerate_trajectories(mdp, uniform_rows(10, 3)), CapacityError);
  CHECK_NOTHROW(enumerate_trajectories(testing::deterministic_chain(4, 2, 3), uniform_rows(4, 2)));
}

TEST_CASE("sampling frequencies match enumeration within four binomial sigmas") {
  std::mt19937_64 gen(15);
  for (int inst = 0; inst < 3; ++inst) {
    const auto mdp = testing::random_mdp(gen, 3, 2, 2);
    const auto policy = policy_probabilities(testing::random_theta(gen, 3, 2));
    const auto all = enumerate_trajectories(mdp, policy);
    std::unordered_map<Trajectory, int, TrajectoryHash> counts;
    Rng rng(100 + inst);
    const int samples = 100000;
    Trajectory t;
    for (int i = 0; i < samples; ++i) {
      sample_trajectory_into(mdp, policy, rng, t);
      ++counts[t];
    }
    std::size_t seen = 0;
    for (const auto& wt : all) {
      const auto it = counts.find(wt.trajectory);
      const double freq = it == counts.end() ? 0.0 : it->second / double(samples);
      seen += it != counts.end();
      const double p = wt.probability;
      CHECK(std::abs(freq - p) <= 4.0 * std::sqrt(p * (1.0 - p) / samples) + 1e-12);
    }
    CHECK(seen == counts.size());  // nothing sampled outside the enumerated support
  }
}
