#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <mir3/replay.hpp>

using namespace mir3;

namespace {

EpisodeRecord tagged_episode(const EnvConfig& env, Scalar tag) {
  EpisodeRecord e;
  e.positions = Matrix::Zero(2 * env.n_agents, env.max_episode_len + 1);
  e.actions = Matrix::Zero(2 * env.n_agents, env.max_episode_len);
  e.rewards = Vector::Constant(env.max_episode_len, tag);
  return e;
}

}  // namespace

TEST_CASE("buffer keeps exactly the last capacity episodes (FIFO)") {
  const EnvConfig env{.n_agents = 2, .max_episode_len = 3};
  ReplayBuffer buffer(4);
  for (int k = 0; k < 9; ++k) buffer.push(tagged_episode(env, static_cast<Scalar>(k)));

  CHECK(buffer.size() == 4);
  CHECK(buffer.total_inserted() == 9);
  for (int i = 0; i < 4; ++i)
    CHECK(buffer.episode(i).rewards[0] == static_cast<Scalar>(5 + i));
  CHECK_THROWS_AS(buffer.episode(4), std::out_of_range);
}

TEST_CASE("sampling is uniform over retained episodes and deterministic") {
  const EnvConfig env{.n_agents = 1, .max_episode_len = 2};
  ReplayBuffer buffer(8);
  for (int k = 0; k < 8; ++k) buffer.push(tagged_episode(env, static_cast<Scalar>(k)));

  Rng a(5), b(5);
  CHECK(buffer.sample_episode_indices(a, 32) == buffer.sample_episode_indices(b, 32));

  Rng rng(6);
  std::vector<int> counts(8, 0);
  for (const int idx : buffer.sample_episode_indices(rng, 8000)) ++counts[static_cast<std::size_t>(idx)];
  for (const int c : counts) CHECK(c > 800);
}

TEST_CASE("make_transitions reconstructs states, rewards and done flags") {
  const EnvConfig env{.n_agents = 2, .v_max = 0.1, .max_episode_len = 4, .history_window = 1};
  RendezvousEnv world(env);
  Rng rng(11);

  EpisodeRecord record;
  record.positions.resize(4, 5);
  record.actions.resize(4, 4);
  record.rewards.resize(4);
  world.reset(rng);
  record.positions.col(0) = world.global_state();
  for (int t = 0; t < 4; ++t) {
    Matrix a(2, 2);
    for (Index i = 0; i < a.size(); ++i) a(i) = rng.uniform(-1.0, 1.0);
    const auto step = world.step(a);
    record.actions.col(t) = Eigen::Map<const Vector>(a.data(), 4);
    record.rewards[t] = step.reward;
    record.positions.col(t + 1) = world.global_state();
  }

  const auto transitions = make_transitions(record, env);
  REQUIRE(transitions.size() == 4);
  for (int t = 0; t < 4; ++t) {
    const auto& tr = transitions[static_cast<std::size_t>(t)];
    CHECK((tr.state - record.positions.col(t)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((tr.next_state - record.positions.col(t + 1)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(tr.reward == record.rewards[t]);
    CHECK(tr.done == (t == 3));
    // With window 1 the history is exactly the current observation.
    const Matrix pos = Eigen::Map<const Matrix>(record.positions.col(t).data(), 2, 2);
    CHECK((tr.histories[0] - observation_of(pos, 0)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((tr.histories[1] - observation_of(pos, 1)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("histories honor the window and its zero padding") {
  const EnvConfig env{.n_agents = 1, .v_max = 0.05, .max_episode_len = 3, .history_window = 2};
  EpisodeRecord record;
  record.positions.resize(2, 4);
  record.positions << 0.1, 0.2, 0.3, 0.4, 0.0, 0.0, 0.0, 0.0;
  record.actions = Matrix::Zero(2, 3);
  record.rewards = Vector::Zero(3);

  const auto transitions = make_transitions(record, env);
  // First step: one observation pushed, the older slot is still zero.
  CHECK(transitions[0].histories[0].head(2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(transitions[0].histories[0][2] == 0.1);
  // Second step: window holds [obs_0, obs_1].
  CHECK(transitions[1].histories[0][0] == 0.1);
  CHECK(transitions[1].histories[0][2] == 0.2);
  // Third step: oldest dropped.
  CHECK(transitions[2].histories[0][0] == 0.2);
  CHECK(transitions[2].histories[0][2] == 0.3);
}

TEST_CASE("sample_history_action_pairs shapes and determinism") {
  const EnvConfig env{.n_agents = 3, .max_episode_len = 5, .history_window = 2};
  ReplayBuffer buffer(4);
  Rng fill(3);
  for (int k = 0; k < 3; ++k) {
    EpisodeRecord e = tagged_episode(env, 0.0);
    for (Index i = 0; i < e.positions.size(); ++i) e.positions(i) = fill.uniform(-1.0, 1.0);
    for (Index i = 0; i < e.actions.size(); ++i) e.actions(i) = fill.uniform(-1.0, 1.0);
    buffer.push(std::move(e));
  }

  std::vector<Matrix> h1, a1, h2, a2;
  Rng ra(7), rb(7);
  buffer.sample_history_action_pairs(ra, 16, env, h1, a1);
  buffer.sample_history_action_pairs(rb, 16, env, h2, a2);
  REQUIRE(h1.size() == 3);
  CHECK(h1[0].rows() == env.history_dim());
  CHECK(h1[0].cols() == 16);
  CHECK(a1[2].rows() == 2);
  for (int i = 0; i < 3; ++i) {
    CHECK((h1[static_cast<std::size_t>(i)] - h2[static_cast<std::size_t>(i)]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a1[static_cast<std::size_t>(i)] - a2[static_cast<std::size_t>(i)]).cwiseAbs().maxCoeff() == 0.0);
  }
}
