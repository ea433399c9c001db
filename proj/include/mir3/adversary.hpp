#pragma once

#include <filesystem>
#include <vector>

#include "mir3/config.hpp"
#include "mir3/replay.hpp"
#include "mir3/trainer.hpp"

namespace mir3 {

/// All one-hot partitions in agent-index order.
std::vector<Partition> enumerate_single_adversary_partitions(int n_agents);

/// `count` distinct partitions with exactly k adversaries, uniform without
/// replacement, deterministic under the seed.
std::vector<Partition> sample_multi_adversary_partitions(int n_agents, int k, int count,
                                                         std::uint64_t seed);

struct AttackJob {
  std::filesystem::path defender_checkpoint;
  Partition partition;
  std::int64_t budget_steps = 50000;
  std::uint64_t seed = 0;
};

struct AttackResult {
  Partition partition;
  CheckpointData adversary_checkpoint;  // adv_actor.<i>.* / adv_critic.<i>.* + flag bytes
  std::vector<EpochMetrics> learning_curve;
};

/// Trains adversarial policies for the flagged agents against the frozen
/// defender checkpoint: deterministic-policy gradient on the negated team
/// reward, with one centralized critic per adversary over (state, all
/// executed actions). The defender checkpoint file is never written to.
AttackResult train_adversary(const AttackJob& job, const RunConfig& cfg);

/// Loads the flagged agents' adversary actors from an adversary checkpoint;
/// returns them in flagged-agent index order and checks the stored partition.
std::vector<Net> load_adversary_actors(const CheckpointData& data, const RunConfig& cfg,
                                       const Partition& expected);

/// Loads the defender actors (index order) from a defender checkpoint.
std::vector<Net> load_defender_actors(const CheckpointData& data, const RunConfig& cfg);

}  // namespace mir3
