#pragma once

#include <cstdint>
#include <vector>

#include "mir3/rng.hpp"
#include "mir3/types.hpp"

namespace mir3 {

struct EnvConfig {
  int n_agents = 10;
  Scalar v_max = 0.05;
  int max_episode_len = 200;
  int history_window = 1;

  int obs_dim() const { return 2 * n_agents; }
  int state_dim() const { return 2 * n_agents; }
  int history_dim() const { return history_window * obs_dim(); }
};

/// Agent i's local view: own position followed by the other agents' positions
/// relative to it, in ascending agent-index order. Flattened length 2N.
Vector observation_of(const Matrix& positions, int agent);

/// Fixed observation window, zero-padded until filled; newest lives in the
/// last slot.
class History {
 public:
  History(int window, int obs_dim)
      : window_(window), obs_dim_(obs_dim), flat_(Vector::Zero(static_cast<Index>(window) * obs_dim)) {}

  void push(const Vector& obs);
  const Vector& flat() const { return flat_; }
  void clear() { flat_.setZero(); }

  int window() const { return window_; }
  int obs_dim() const { return obs_dim_; }

 private:
  int window_;
  int obs_dim_;
  Vector flat_;
};

inline void update_history(History& history, const Vector& observation) { history.push(observation); }

/// output column i = adversary action i where the partition flags agent i,
/// else the defender action.
Matrix compose_perturbed_action(const Matrix& defender_actions, const Matrix& adversary_actions,
                                const Partition& phi);

/// Point-mass swarm in the unit arena [-1,1]^2. Positions and joint actions
/// are 2 x N matrices (columns are agents). The shared reward is the negative
/// mean pairwise distance of the post-step positions; episodes run exactly
/// max_episode_len steps.
class RendezvousEnv {
 public:
  explicit RendezvousEnv(EnvConfig cfg);

  std::vector<Vector> reset(std::uint64_t seed);
  std::vector<Vector> reset(Rng& rng);

  struct StepResult {
    std::vector<Vector> observations;
    Scalar reward = 0.0;
    bool done = false;
  };
  StepResult step(const Matrix& joint_action);

  const Matrix& positions() const { return positions_; }
  Vector global_state() const;
  int step_index() const { return step_index_; }
  const EnvConfig& config() const { return cfg_; }

  /// Count of action components that arrived outside [-1,1] and were clamped.
  std::int64_t clamped_action_components() const { return clamped_components_; }

 private:
  std::vector<Vector> observations() const;

  EnvConfig cfg_;
  Matrix positions_;  // 2 x N
  int step_index_ = 0;
  std::int64_t clamped_components_ = 0;
};

/// Negative mean pairwise Euclidean distance; 0 for a single agent.
Scalar rendezvous_reward(const Matrix& positions);

}  // namespace mir3
