#pragma once

#include <filesystem>
#include <iosfwd>

#include "mir3/config.hpp"
#include "mir3/trainer.hpp"

namespace mir3 {

struct RunPaths {
  std::filesystem::path dir;
  std::filesystem::path config;
  std::filesystem::path metrics;
  std::filesystem::path final_checkpoint;
  std::filesystem::path trajectory;

  static RunPaths in(const std::filesystem::path& run_dir);
};

struct RunHandle {
  RunConfig cfg;
  RunPaths paths;
};

inline constexpr const char* kMetricsHeader =
    "epoch,env_steps,episode_return,mi_total,critic_loss,actor_loss,wall_time_s";

/// One metrics CSV row; absent losses print as empty cells and wall time is
/// written as 0 in deterministic mode so runs are byte-reproducible.
std::string metrics_row(const EpochMetrics& m, bool deterministic);

/// Trains to total_timesteps inside a fresh content-addressed run directory:
/// config snapshot first, one metrics row per epoch, periodic checkpoints,
/// final checkpoint and a deterministic trajectory sample. On numerical
/// failure writes checkpoint_abort.ckpt and rethrows.
RunHandle run_training(const RunConfig& cfg, const std::filesystem::path& out_root);

/// Opens an existing run directory (config snapshot + final checkpoint).
RunHandle load_run(const std::filesystem::path& run_dir);

/// Exports one episode's positions as step,agent,x,y rows.
void write_trajectory_csv(const std::filesystem::path& path, const EpisodeRecord& episode,
                          int n_agents);

}  // namespace mir3
