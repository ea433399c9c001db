#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "mir3/env.hpp"
#include "mir3/errors.hpp"
#include "mir3/types.hpp"

namespace mir3 {

enum class Algorithm { kMaddpg, kMir3, kM3ddpg };

Algorithm algorithm_from_string(const std::string& s);
const char* algorithm_name(Algorithm a);

/// All run hyperparameters. Defaults are the rendezvous values of the shared
/// hyperparameter table (lr 1e-3, gamma 0.99, tau 0.01, batch 8, buffer 5000,
/// noise 0.1, max grad norm 0.5, episode length 200, hidden dim 256,
/// lambda 5e-5, perturbation epsilon 1e-3, evaluate episodes 32).
struct RunConfig {
  std::string algorithm = "maddpg";  // maddpg | mir3 | m3ddpg
  std::uint64_t seed = 0;
  bool deterministic = false;

  struct Env {
    int n_agents = 10;
    Scalar v_max = 0.05;
    int max_episode_len = 200;
    int history_window = 1;

    bool operator==(const Env&) const = default;
  } env;

  struct Train {
    std::int64_t total_timesteps = 200000;
    Scalar lr = 1e-3;
    Scalar actor_lr = 1e-3;
    Scalar critic_lr = 1e-3;
    Scalar gamma = 0.99;
    Scalar tau = 0.01;
    int batch_size = 8;     // episodes per sampled minibatch
    int buffer_size = 5000;  // episodes
    std::int64_t warmup_steps = 0;
    Scalar exploration_noise = 0.1;
    Scalar max_grad_norm = 0.5;
    int train_epochs = 1;
    int num_batches = 1;
    int hidden_dim = 256;
    int hidden_layers = 1;
    Scalar adam_beta1 = 0.9;
    Scalar adam_beta2 = 0.999;
    Scalar adam_eps = 1e-8;

    bool operator==(const Train&) const = default;
  } train;

  struct Mir3 {
    Scalar lambda = 5e-5;
    Scalar mi_lr = 1e-3;
    int mi_train_epochs = 1;
    int mi_hidden_dim = 256;
    int mi_buffer_size = 5000;
    int mi_batch_size = 256;

    bool operator==(const Mir3&) const = default;
  } mir3;

  struct M3ddpg {
    Scalar epsilon = 0.001;

    bool operator==(const M3ddpg&) const = default;
  } m3ddpg;

  struct Attack {
    std::int64_t budget_steps = 50000;
    std::string partitions = "auto-single";
    int k_adversaries = 1;

    bool operator==(const Attack&) const = default;
  } attack;

  struct Eval {
    int episodes = 32;
    Scalar ci_level = 0.95;

    bool operator==(const Eval&) const = default;
  } eval;

  bool operator==(const RunConfig&) const = default;

  Algorithm algo() const { return algorithm_from_string(algorithm); }
  EnvConfig env_config() const {
    return EnvConfig{env.n_agents, env.v_max, env.max_episode_len, env.history_window};
  }
};

/// Throws ConfigError naming the offending field path.
void validate(const RunConfig& cfg);

/// Canonical flat-sectioned key=value text. Numbers use shortest
/// round-trip formatting, so parse(serialize(c)) == c.
std::string serialize_config(const RunConfig& cfg, bool include_seed = true);

/// Parses canonical or hand-written config text. Unknown keys are rejected.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::filesystem::path& path);

/// Applies one "section.key=value" (or top-level "key=value") override.
void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value);

/// First 8 hex chars of the SHA-256 of the seedless canonical serialization;
/// run directories are "<algorithm>-<hash>-s<seed>".
std::string config_hash(const RunConfig& cfg);
std::string run_dir_name(const RunConfig& cfg);

}  // namespace mir3
