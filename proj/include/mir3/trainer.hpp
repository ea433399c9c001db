#pragma once

#include <optional>
#include <vector>

#include "mir3/checkpoint.hpp"
#include "mir3/club.hpp"
#include "mir3/config.hpp"
#include "mir3/env.hpp"
#include "mir3/replay.hpp"

namespace mir3 {

struct EpochMetrics {
  int epoch = 0;
  std::int64_t env_steps = 0;
  Scalar episode_return = 0.0;
  Scalar mi_total = 0.0;  // 0 whenever shaping is inactive
  std::optional<Scalar> critic_loss;
  std::optional<Scalar> actor_loss;
  Scalar wall_time_seconds = 0.0;
};

/// r - lambda * I.
Scalar shape_reward(Scalar r, const MIEstimate& mi, Scalar lambda);

/// TD target r + gamma * (1 - done) * next_q.
Scalar td_target(Scalar reward, Scalar gamma, bool done, Scalar next_q);

/// Shifts every agent's action except `self_index` by -eps * sign(dQ/da)
/// where Q is `critic` evaluated at (state, actions); the result is clipped
/// to [-1, 1]. Columns of `states` / entries of `actions` are per agent;
/// batched variant takes one sample per column.
Matrix m3ddpg_perturb(Net& critic, const Vector& state, const Matrix& actions, Scalar eps,
                      int self_index);
Matrix m3ddpg_perturb_batch(Net& critic, const Matrix& states, const Matrix& actions_flat,
                            Scalar eps, int self_index);

/// MADDPG training (decentralized actors, centralized critics, episode replay,
/// soft target updates) with the optional history-action mutual-information
/// reward penalty and the minimax action-perturbation baseline.
class Trainer {
 public:
  explicit Trainer(const RunConfig& cfg);

  EpochMetrics train_epoch();

  /// One rollout under the current actors; pushes nothing.
  EpisodeRecord rollout_episode(bool with_exploration_noise);

  /// Temporal-difference critic regression on a flattened episode minibatch;
  /// returns the mean squared Bellman error (absent when the batch was
  /// skipped because a target went non-finite).
  std::optional<Scalar> critic_update(const std::vector<Transition>& batch);

  /// Deterministic policy-gradient ascent through each agent's own action;
  /// returns -mean Q.
  Scalar actor_update(const std::vector<Transition>& batch);

  void soft_update_targets();

  std::vector<Net>& actors() { return actors_; }
  std::vector<Net>& critics() { return critics_; }
  std::vector<Net>& target_actors() { return target_actors_; }
  std::vector<Net>& target_critics() { return target_critics_; }
  std::vector<ClubNet>& clubs() { return clubs_; }
  ReplayBuffer& buffer() { return buffer_; }
  const RunConfig& config() const { return cfg_; }
  int epoch() const { return epoch_; }
  std::int64_t env_steps() const { return env_steps_; }
  const MIEstimate& last_mi() const { return last_mi_; }
  std::int64_t skipped_batches() const { return skipped_batches_; }

  CheckpointData make_checkpoint() const;
  void restore_checkpoint(const CheckpointData& data);

 private:
  bool shaping_active() const;
  void fit_clubs_from_buffer();
  // Per-transition shaped rewards for the batch; also refreshes last_mi_.
  Vector shaped_rewards(const std::vector<Transition>& batch);

  RunConfig cfg_;
  EnvConfig env_cfg_;
  RendezvousEnv env_;
  ReplayBuffer buffer_;

  std::vector<Net> actors_, target_actors_;
  std::vector<Net> critics_, target_critics_;
  std::vector<ClubNet> clubs_;

  Rng env_rng_, explore_rng_, sample_rng_, club_rng_;

  int epoch_ = 0;
  std::int64_t env_steps_ = 0;
  MIEstimate last_mi_;
  std::int64_t skipped_batches_ = 0;
  bool shaping_scale_warned_ = false;
};

/// Builds actor/critic topologies from the config (shared with the attack
/// trainer and the evaluation harness).
std::vector<int> actor_sizes(const RunConfig& cfg);
std::vector<Activation> actor_activations(const RunConfig& cfg);
std::vector<int> critic_sizes(const RunConfig& cfg);
std::vector<Activation> critic_activations(const RunConfig& cfg);

}  // namespace mir3
