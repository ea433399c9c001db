#include "mir3/env.hpp"

#include <stdexcept>

namespace mir3 {

Partition Partition::from_bitstring(const std::string& bits) {
  Partition p(static_cast<int>(bits.size()));
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] == '1')
      p.flags[i] = 1;
    else if (bits[i] != '0')
      throw std::invalid_argument("partition: bitstring must contain only 0/1, got '" + bits + "'");
  }
  return p;
}

Vector observation_of(const Matrix& positions, int agent) {
  const auto n = static_cast<int>(positions.cols());
  Vector obs(2 * n);
  obs.segment<2>(0) = positions.col(agent);
  Index at = 2;
  for (int j = 0; j < n; ++j) {
    if (j == agent) continue;
    obs.segment<2>(at) = positions.col(j) - positions.col(agent);
    at += 2;
  }
  return obs;
}

void History::push(const Vector& obs) {
  if (obs.size() != obs_dim_)
    throw std::invalid_argument("history: observation size " + std::to_string(obs.size()) +
                                " != " + std::to_string(obs_dim_));
  if (window_ > 1)
    flat_.head(static_cast<Index>(window_ - 1) * obs_dim_) =
        flat_.tail(static_cast<Index>(window_ - 1) * obs_dim_).eval();
  flat_.tail(obs_dim_) = obs;
}

Matrix compose_perturbed_action(const Matrix& defender_actions, const Matrix& adversary_actions,
                                const Partition& phi) {
  if (defender_actions.cols() != adversary_actions.cols() ||
      defender_actions.cols() != phi.size() || defender_actions.rows() != adversary_actions.rows())
    throw std::invalid_argument("compose_perturbed_action: shape mismatch");
  Matrix out = defender_actions;
  for (int i = 0; i < phi.size(); ++i)
    if (phi.is_adversary(i)) out.col(i) = adversary_actions.col(i);
  return out;
}

Scalar rendezvous_reward(const Matrix& positions) {
  const auto n = static_cast<int>(positions.cols());
  if (n < 2) return 0.0;
  Scalar sum = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) sum += (positions.col(i) - positions.col(j)).norm();
  return -2.0 * sum / (static_cast<Scalar>(n) * (n - 1));
}

RendezvousEnv::RendezvousEnv(EnvConfig cfg) : cfg_(cfg) {
  if (cfg_.n_agents < 1) throw std::invalid_argument("env: n_agents must be >= 1");
  if (cfg_.max_episode_len < 1) throw std::invalid_argument("env: max_episode_len must be >= 1");
  if (cfg_.history_window < 1) throw std::invalid_argument("env: history_window must be >= 1");
  positions_ = Matrix::Zero(2, cfg_.n_agents);
}

std::vector<Vector> RendezvousEnv::reset(std::uint64_t seed) {
  Rng rng(seed);
  return reset(rng);
}

std::vector<Vector> RendezvousEnv::reset(Rng& rng) {
  for (int i = 0; i < cfg_.n_agents; ++i)
    for (int d = 0; d < 2; ++d) positions_(d, i) = rng.uniform(-1.0, 1.0);
  step_index_ = 0;
  return observations();
}

RendezvousEnv::StepResult RendezvousEnv::step(const Matrix& joint_action) {
  if (joint_action.rows() != 2 || joint_action.cols() != cfg_.n_agents)
    throw std::invalid_argument("env: joint action must be 2 x n_agents");
  if (step_index_ >= cfg_.max_episode_len)
    throw std::logic_error("env: step called on a finished episode");

  for (int i = 0; i < cfg_.n_agents; ++i) {
    for (int d = 0; d < 2; ++d) {
      Scalar a = joint_action(d, i);
      if (a < -1.0 || a > 1.0) {
        // Adversaries and exploration noise may leave the action box; clamp
        // and count instead of failing.
        a = std::clamp(a, -1.0, 1.0);
        ++clamped_components_;
      }
      positions_(d, i) = std::clamp(positions_(d, i) + cfg_.v_max * a, -1.0, 1.0);
    }
  }
  ++step_index_;

  StepResult result;
  result.observations = observations();
  result.reward = rendezvous_reward(positions_);
  result.done = step_index_ >= cfg_.max_episode_len;
  return result;
}

Vector RendezvousEnv::global_state() const {
  return Eigen::Map<const Vector>(positions_.data(), positions_.size());
}

std::vector<Vector> RendezvousEnv::observations() const {
  std::vector<Vector> obs;
  obs.reserve(static_cast<std::size_t>(cfg_.n_agents));
  for (int i = 0; i < cfg_.n_agents; ++i) obs.push_back(observation_of(positions_, i));
  return obs;
}

}  // namespace mir3
