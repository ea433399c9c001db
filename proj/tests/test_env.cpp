#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <mir3/env.hpp>

#include <set>
#include <utility>

using namespace mir3;

TEST_CASE("reset: deterministic under the seed") {
  RendezvousEnv env({.n_agents = 5});
  env.reset(42);
  const Matrix first = env.positions();
  env.reset(42);
  CHECK((env.positions().array() == first.array()).all());
}

TEST_CASE("reset: positions are uniform over the arena") {
  RendezvousEnv env({.n_agents = 4});
  Rng rng(7);
  Vector mean = Vector::Zero(2);
  const int resets = 10000;
  for (int r = 0; r < resets; ++r) {
    env.reset(rng);
    mean += env.positions().rowwise().mean();
  }
  mean /= static_cast<Scalar>(resets);
  CHECK(std::abs(mean[0]) < 0.02);
  CHECK(std::abs(mean[1]) < 0.02);
}

TEST_CASE("single agent: observation has no relative block, reward is 0") {
  RendezvousEnv env({.n_agents = 1});
  auto obs = env.reset(1);
  CHECK(obs.size() == 1);
  CHECK(obs[0].size() == 2);
  const auto step = env.step(Matrix::Zero(2, 1));
  CHECK(step.reward == 0.0);
}

TEST_CASE("step: reward is the negative mean pairwise distance") {
  RendezvousEnv env({.n_agents = 2, .v_max = 0.05});
  env.reset(1);
  // Zero actions leave positions where we put them via a crafted reset: use
  // the reward function directly on crafted positions instead.
  Matrix pos(2, 2);
  pos << 0.0, 1.0, 0.0, 0.0;
  CHECK(rendezvous_reward(pos) == doctest::Approx(-1.0));

  SUBCASE("coincident agents maximize the reward") {
    pos.col(1) = pos.col(0);
    CHECK(rendezvous_reward(pos) == 0.0);
  }
}

TEST_CASE("step: arena clipping holds the boundary") {
  RendezvousEnv env({.n_agents = 1, .v_max = 0.05});
  env.reset(3);
  // March the agent into the right wall.
  Matrix push(2, 1);
  push << 1.0, 0.0;
  for (int t = 0; t < 60; ++t) env.step(push);
  CHECK(env.positions()(0, 0) == 1.0);
  const Scalar y = env.positions()(1, 0);
  env.step(push);
  CHECK(env.positions()(0, 0) == 1.0);
  CHECK(env.positions()(1, 0) == y);
}

TEST_CASE("step: out-of-range actions are clamped and counted") {
  RendezvousEnv env({.n_agents = 1, .v_max = 0.05});
  env.reset(3);
  const Scalar x = env.positions()(0, 0);
  Matrix wild(2, 1);
  wild << 3.0, 0.0;
  env.step(wild);
  CHECK(env.clamped_action_components() == 1);
  CHECK(env.positions()(0, 0) == doctest::Approx(std::min(1.0, x + 0.05)));
}

TEST_CASE("episodes run exactly max_episode_len steps") {
  RendezvousEnv env({.n_agents = 2, .max_episode_len = 5});
  env.reset(9);
  for (int t = 0; t < 4; ++t) CHECK_FALSE(env.step(Matrix::Zero(2, 2)).done);
  CHECK(env.step(Matrix::Zero(2, 2)).done);
  CHECK(env.step_index() == 5);
  CHECK_THROWS_AS(env.step(Matrix::Zero(2, 2)), std::logic_error);
}

TEST_CASE("reward bound: -2*sqrt(2) <= r <= 0 along random rollouts") {
  RendezvousEnv env({.n_agents = 6, .max_episode_len = 50});
  Rng rng(17);
  env.reset(rng);
  for (int t = 0; t < 50; ++t) {
    Matrix a(2, 6);
    for (Index i = 0; i < a.size(); ++i) a(i) = rng.uniform(-1.0, 1.0);
    const auto step = env.step(a);
    CHECK(step.reward <= 0.0);
    CHECK(step.reward >= -2.0 * std::sqrt(2.0));
    for (const auto& obs : step.observations) {
      CHECK(obs.size() == 12);
      CHECK(obs.tail(10).cwiseAbs().maxCoeff() <= 2.0);
    }
  }
}

TEST_CASE("permutation consistency: reward invariant, observations permuted") {
  Rng rng(23);
  Matrix pos(2, 4);
  for (Index i = 0; i < pos.size(); ++i) pos(i) = rng.uniform(-1.0, 1.0);

  const std::vector<int> perm{2, 0, 3, 1};
  Matrix permuted(2, 4);
  for (int i = 0; i < 4; ++i) permuted.col(perm[static_cast<std::size_t>(i)]) = pos.col(i);

  CHECK(rendezvous_reward(permuted) == doctest::Approx(rendezvous_reward(pos)).epsilon(1e-12));

  // Each agent keeps its own position and sees the same multiset of
  // relative positions.
  for (int i = 0; i < 4; ++i) {
    const Vector a = observation_of(pos, i);
    const Vector b = observation_of(permuted, perm[static_cast<std::size_t>(i)]);
    CHECK((a.head(2) - b.head(2)).cwiseAbs().maxCoeff() == 0.0);
    std::multiset<std::pair<Scalar, Scalar>> rel_a, rel_b;
    for (int k = 0; k < 3; ++k) {
      rel_a.insert({a[2 + 2 * k], a[3 + 2 * k]});
      rel_b.insert({b[2 + 2 * k], b[3 + 2 * k]});
    }
    CHECK(rel_a == rel_b);
  }
}

TEST_CASE("compose_perturbed_action selects by partition flag") {
  Matrix defender(2, 4), adversary(2, 4);
  defender.setConstant(0.25);
  adversary.setConstant(-0.75);

  SUBCASE("all-defender partition is the identity") {
    const Partition phi(4);
    CHECK((compose_perturbed_action(defender, adversary, phi).array() == defender.array()).all());
  }
  SUBCASE("all-adversary partition replaces everything") {
    Partition phi = Partition::from_bitstring("1111");
    CHECK(
        (compose_perturbed_action(defender, adversary, phi).array() == adversary.array()).all());
  }
  SUBCASE("mixed partition replaces only flagged columns") {
    Partition phi = Partition::from_bitstring("0001");
    const Matrix out = compose_perturbed_action(defender, adversary, phi);
    CHECK((out.leftCols(3).array() == defender.leftCols(3).array()).all());
    CHECK((out.col(3).array() == adversary.col(3).array()).all());
  }
}

TEST_CASE("history window") {
  SUBCASE("window of one is the current observation") {
    History h(1, 2);
    Vector obs(2);
    obs << 0.5, -0.5;
    h.push(obs);
    CHECK((h.flat() - obs).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("fresh slots stay zero until filled") {
    History h(3, 2);
    Vector obs(2);
    obs << 1.0, 2.0;
    h.push(obs);
    CHECK(h.flat().head(4).cwiseAbs().maxCoeff() == 0.0);
    CHECK(h.flat()[4] == 1.0);
    CHECK(h.flat()[5] == 2.0);
  }
  SUBCASE("oldest observation is dropped after window+1 pushes") {
    History h(2, 1);
    Vector obs(1);
    for (int k = 1; k <= 3; ++k) {
      obs << static_cast<Scalar>(k);
      h.push(obs);
    }
    CHECK(h.flat()[0] == 2.0);
    CHECK(h.flat()[1] == 3.0);
  }
}

TEST_CASE("partition helpers") {
  Partition p = Partition::from_bitstring("0101");
  CHECK(p.adversary_count() == 2);
  CHECK(p.bitstring() == "0101");
  CHECK_FALSE(p.none());
  CHECK(Partition(3).none());
  CHECK_THROWS_AS(Partition::from_bitstring("01x1"), std::invalid_argument);
}
