#pragma once

#include <cstdint>
#include <vector>

#include "mir3/env.hpp"
#include "mir3/rng.hpp"
#include "mir3/types.hpp"

namespace mir3 {

/// One stored (s, h, a, r, s', h', done) record, materialized from episode
/// storage when a minibatch is sampled. `actions` holds the executed
/// (possibly perturbed) joint action.
struct Transition {
  Vector state;                        // 2N
  std::vector<Vector> histories;       // N x history_dim
  Matrix actions;                      // 2 x N
  Scalar reward = 0.0;
  Vector next_state;
  std::vector<Vector> next_histories;
  bool done = false;
};

/// Compact episode storage: positions per step (column t = flattened
/// positions before step t; one extra column for the terminal state),
/// executed actions and raw environment rewards. Observations and histories
/// are pure functions of positions and are rebuilt on sampling.
struct EpisodeRecord {
  Matrix positions;  // 2N x (T+1)
  Matrix actions;    // 2N x T
  Vector rewards;    // T

  int length() const { return static_cast<int>(rewards.size()); }
};

std::vector<Transition> make_transitions(const EpisodeRecord& episode, const EnvConfig& env);

/// FIFO ring of episodes.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity);

  void push(EpisodeRecord episode);

  int size() const { return static_cast<int>(storage_.size()); }
  int capacity() const { return capacity_; }
  std::int64_t total_inserted() const { return total_inserted_; }

  /// Episode i with 0 = oldest currently retained.
  const EpisodeRecord& episode(int i) const;

  /// Uniform i.i.d. episode indices (with replacement).
  std::vector<int> sample_episode_indices(Rng& rng, int count) const;

  /// Flattened transitions of `count` uniformly sampled episodes.
  std::vector<Transition> sample_transitions(Rng& rng, int count, const EnvConfig& env) const;

  /// `count` uniformly sampled (history, action) pairs per agent, as one
  /// matrix pair per agent (columns are samples).
  void sample_history_action_pairs(Rng& rng, int count, const EnvConfig& env,
                                   std::vector<Matrix>& histories,
                                   std::vector<Matrix>& actions) const;

 private:
  int capacity_;
  std::vector<EpisodeRecord> storage_;
  int cursor_ = 0;  // next overwrite position once full
  std::int64_t total_inserted_ = 0;
};

}  // namespace mir3
