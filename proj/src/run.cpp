#include "mir3/run.hpp"

#include <fstream>
#include <iostream>

#include "mir3/eval.hpp"
#include "mir3/format.hpp"

namespace mir3 {

RunPaths RunPaths::in(const std::filesystem::path& run_dir) {
  RunPaths p;
  p.dir = run_dir;
  p.config = run_dir / "config.ini";
  p.metrics = run_dir / "metrics.csv";
  p.final_checkpoint = run_dir / "checkpoint_final.ckpt";
  p.trajectory = run_dir / "trajectory.csv";
  return p;
}

std::string metrics_row(const EpochMetrics& m, bool deterministic) {
  std::string row = std::to_string(m.epoch) + "," + std::to_string(m.env_steps) + "," +
                    format_number(m.episode_return) + "," + format_number(m.mi_total) + ",";
  if (m.critic_loss) row += format_number(*m.critic_loss);
  row += ",";
  if (m.actor_loss) row += format_number(*m.actor_loss);
  row += ",";
  row += deterministic ? "0" : format_number(m.wall_time_seconds);
  return row;
}

void write_trajectory_csv(const std::filesystem::path& path, const EpisodeRecord& episode,
                          int n_agents) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write trajectory CSV '" + path.string() + "'");
  out << "step,agent,x,y\n";
  for (Index t = 0; t < episode.positions.cols(); ++t)
    for (int i = 0; i < n_agents; ++i)
      out << t << ',' << i << ',' << format_number(episode.positions(2 * i, t)) << ','
          << format_number(episode.positions(2 * i + 1, t)) << '\n';
}

RunHandle run_training(const RunConfig& cfg, const std::filesystem::path& out_root) {
  validate(cfg);
  const auto dir = out_root / run_dir_name(cfg);
  if (std::filesystem::exists(dir))
    throw ConfigError("run directory already exists: " + dir.string() +
                      " (runs are keyed by config hash and seed)");
  std::filesystem::create_directories(dir);
  RunPaths paths = RunPaths::in(dir);

  {
    std::ofstream config_out(paths.config, std::ios::trunc);
    config_out << serialize_config(cfg);
  }

  Trainer trainer(cfg);
  const auto steps_per_episode = static_cast<std::int64_t>(cfg.env.max_episode_len);
  const auto total_epochs = static_cast<int>(
      (cfg.train.total_timesteps + steps_per_episode - 1) / steps_per_episode);
  const int checkpoint_interval = std::max(1, total_epochs / 5);

  std::ofstream metrics(paths.metrics, std::ios::trunc);
  metrics << kMetricsHeader << "\n";

  try {
    for (int epoch = 0; epoch < total_epochs; ++epoch) {
      const EpochMetrics m = trainer.train_epoch();
      metrics << metrics_row(m, cfg.deterministic) << "\n";
      if ((epoch + 1) % checkpoint_interval == 0 && epoch + 1 < total_epochs)
        save_checkpoint(dir / ("checkpoint_ep" + std::to_string(epoch + 1) + ".ckpt"),
                        trainer.make_checkpoint());
    }
  } catch (const NumericalError& e) {
    metrics.flush();
    save_checkpoint(dir / "checkpoint_abort.ckpt", trainer.make_checkpoint());
    std::cerr << "[train] aborting: " << e.what() << " (state saved to checkpoint_abort.ckpt)\n";
    throw;
  }

  save_checkpoint(paths.final_checkpoint, trainer.make_checkpoint());

  // One deterministic episode with the final policies for the plot surface.
  Rng traj_env(derive_stream_seed(cfg.seed, "trajectory.env"));
  Rng traj_adv(derive_stream_seed(cfg.seed, "trajectory.adversary"));
  const Partition all_defenders(cfg.env.n_agents);
  const EpisodeRecord episode = play_episode(trainer.actors(), AdversaryPolicy::none(),
                                             all_defenders, traj_env, traj_adv, cfg.env_config());
  write_trajectory_csv(paths.trajectory, episode, cfg.env.n_agents);

  return RunHandle{cfg, paths};
}

RunHandle load_run(const std::filesystem::path& run_dir) {
  RunPaths paths = RunPaths::in(run_dir);
  if (!std::filesystem::exists(paths.config))
    throw MissingArtifactError("no config snapshot at " + paths.config.string());
  if (!std::filesystem::exists(paths.final_checkpoint))
    throw MissingArtifactError("no final checkpoint at " + paths.final_checkpoint.string());
  return RunHandle{load_config_file(paths.config), paths};
}

}  // namespace mir3
