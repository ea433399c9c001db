#include "mir3/replay.hpp"

#include <stdexcept>

namespace mir3 {

namespace {

Matrix positions_at(const EpisodeRecord& episode, int t, int n_agents) {
  return Eigen::Map<const Matrix>(episode.positions.col(t).data(), 2, n_agents);
}

// Histories for every step of one episode: hist[t][agent] is the flattened
// window right before action t was taken (so index T holds next_histories of
// the final transition).
std::vector<std::vector<Vector>> episode_histories(const EpisodeRecord& episode,
                                                   const EnvConfig& env) {
  const int steps = episode.length();
  std::vector<std::vector<Vector>> result(static_cast<std::size_t>(steps) + 1);
  std::vector<History> histories(static_cast<std::size_t>(env.n_agents),
                                 History(env.history_window, env.obs_dim()));
  for (int t = 0; t <= steps; ++t) {
    const Matrix pos = positions_at(episode, t, env.n_agents);
    auto& slot = result[static_cast<std::size_t>(t)];
    slot.reserve(static_cast<std::size_t>(env.n_agents));
    for (int i = 0; i < env.n_agents; ++i) {
      histories[static_cast<std::size_t>(i)].push(observation_of(pos, i));
      slot.push_back(histories[static_cast<std::size_t>(i)].flat());
    }
  }
  return result;
}

}  // namespace

std::vector<Transition> make_transitions(const EpisodeRecord& episode, const EnvConfig& env) {
  const int steps = episode.length();
  const auto histories = episode_histories(episode, env);

  std::vector<Transition> out;
  out.reserve(static_cast<std::size_t>(steps));
  for (int t = 0; t < steps; ++t) {
    Transition tr;
    tr.state = episode.positions.col(t);
    tr.histories = histories[static_cast<std::size_t>(t)];
    tr.actions = Eigen::Map<const Matrix>(episode.actions.col(t).data(), 2, env.n_agents);
    tr.reward = episode.rewards[t];
    tr.next_state = episode.positions.col(t + 1);
    tr.next_histories = histories[static_cast<std::size_t>(t) + 1];
    tr.done = (t == steps - 1);
    out.push_back(std::move(tr));
  }
  return out;
}

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw std::invalid_argument("replay: capacity must be >= 1");
  storage_.reserve(static_cast<std::size_t>(capacity));
}

void ReplayBuffer::push(EpisodeRecord episode) {
  if (size() < capacity_) {
    storage_.push_back(std::move(episode));
  } else {
    storage_[static_cast<std::size_t>(cursor_)] = std::move(episode);
    cursor_ = (cursor_ + 1) % capacity_;
  }
  ++total_inserted_;
}

const EpisodeRecord& ReplayBuffer::episode(int i) const {
  if (i < 0 || i >= size()) throw std::out_of_range("replay: episode index out of range");
  if (size() < capacity_) return storage_[static_cast<std::size_t>(i)];
  return storage_[static_cast<std::size_t>((cursor_ + i) % capacity_)];
}

std::vector<int> ReplayBuffer::sample_episode_indices(Rng& rng, int count) const {
  if (size() == 0) throw std::logic_error("replay: cannot sample from an empty buffer");
  std::vector<int> indices(static_cast<std::size_t>(count));
  for (auto& idx : indices) idx = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(size())));
  return indices;
}

std::vector<Transition> ReplayBuffer::sample_transitions(Rng& rng, int count,
                                                         const EnvConfig& env) const {
  std::vector<Transition> batch;
  for (const int idx : sample_episode_indices(rng, count)) {
    auto transitions = make_transitions(episode(idx), env);
    batch.insert(batch.end(), std::make_move_iterator(transitions.begin()),
                 std::make_move_iterator(transitions.end()));
  }
  return batch;
}

void ReplayBuffer::sample_history_action_pairs(Rng& rng, int count, const EnvConfig& env,
                                               std::vector<Matrix>& histories,
                                               std::vector<Matrix>& actions) const {
  if (size() == 0) throw std::logic_error("replay: cannot sample from an empty buffer");
  histories.assign(static_cast<std::size_t>(env.n_agents), Matrix(env.history_dim(), count));
  actions.assign(static_cast<std::size_t>(env.n_agents), Matrix(2, count));

  for (int c = 0; c < count; ++c) {
    const int ep = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(size())));
    const EpisodeRecord& record = episode(ep);
    const int t = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(record.length())));
    // Rebuild the windowed history up to step t only.
    std::vector<History> hist(static_cast<std::size_t>(env.n_agents),
                              History(env.history_window, env.obs_dim()));
    const int from = std::max(0, t - env.history_window + 1);
    for (int s = from; s <= t; ++s) {
      const Matrix pos = positions_at(record, s, env.n_agents);
      for (int i = 0; i < env.n_agents; ++i) hist[static_cast<std::size_t>(i)].push(observation_of(pos, i));
    }
    for (int i = 0; i < env.n_agents; ++i) {
      histories[static_cast<std::size_t>(i)].col(c) = hist[static_cast<std::size_t>(i)].flat();
      actions[static_cast<std::size_t>(i)].col(c) =
          record.actions.col(t).segment<2>(2 * static_cast<Index>(i));
    }
  }
}

}  // namespace mir3
