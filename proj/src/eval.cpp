#include "mir3/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mir3/format.hpp"

namespace mir3 {

Scalar normal_quantile(Scalar p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must be in (0,1)");
  // Acklam (2003).
  static const Scalar a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const Scalar b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const Scalar c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const Scalar d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  constexpr Scalar plow = 0.02425;
  Scalar q, r;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  q = p - 0.5;
  r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

std::pair<Scalar, Scalar> confidence_interval(std::span<const Scalar> samples, Scalar level) {
  const auto n = static_cast<Index>(samples.size());
  if (n < 2) throw std::invalid_argument("confidence_interval: need at least 2 samples");
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("confidence_interval: level must be in (0,1)");
  Scalar mean = 0.0;
  for (const Scalar s : samples) mean += s;
  mean /= static_cast<Scalar>(n);
  Scalar var = 0.0;
  for (const Scalar s : samples) var += (s - mean) * (s - mean);
  var /= static_cast<Scalar>(n - 1);
  const Scalar z = normal_quantile(0.5 + level / 2.0);
  return {mean, z * std::sqrt(var) / std::sqrt(static_cast<Scalar>(n))};
}

EpisodeRecord play_episode(std::vector<Net>& defenders, const AdversaryPolicy& adversary,
                           const Partition& phi, Rng& env_rng, Rng& adversary_rng,
                           const EnvConfig& env_cfg) {
  const int n = env_cfg.n_agents;
  if (phi.size() != n) throw std::invalid_argument("play_episode: partition length != n_agents");
  if (adversary.kind == AdversaryPolicy::Kind::kNone && !phi.none())
    throw std::invalid_argument("play_episode: partition flags adversaries but no adversary given");
  if (adversary.kind == AdversaryPolicy::Kind::kNets) {
    if (phi.none()) throw std::invalid_argument("play_episode: adversary given but partition is empty");
    if (adversary.nets == nullptr ||
        static_cast<int>(adversary.nets->size()) != phi.adversary_count())
      throw std::invalid_argument("play_episode: adversary net count != flagged agents");
  }

  RendezvousEnv env(env_cfg);
  EpisodeRecord record;
  record.positions.resize(2 * n, env_cfg.max_episode_len + 1);
  record.actions.resize(2 * n, env_cfg.max_episode_len);
  record.rewards.resize(env_cfg.max_episode_len);

  std::vector<Vector> obs = env.reset(env_rng);
  std::vector<History> histories(static_cast<std::size_t>(n),
                                 History(env_cfg.history_window, env_cfg.obs_dim()));
  for (int i = 0; i < n; ++i)
    histories[static_cast<std::size_t>(i)].push(obs[static_cast<std::size_t>(i)]);
  record.positions.col(0) = env.global_state();

  Matrix defender_actions(2, n), adversary_actions(2, n);
  for (int t = 0; t < env_cfg.max_episode_len; ++t) {
    adversary_actions.setZero();
    int adv = 0;
    for (int i = 0; i < n; ++i) {
      const Vector& h = histories[static_cast<std::size_t>(i)].flat();
      defender_actions.col(i) = forward(defenders[static_cast<std::size_t>(i)], h);
      if (phi.is_adversary(i)) {
        switch (adversary.kind) {
          case AdversaryPolicy::Kind::kNets:
            adversary_actions.col(i) = forward((*adversary.nets)[static_cast<std::size_t>(adv)], h);
            break;
          case AdversaryPolicy::Kind::kRandom:
            adversary_actions(0, i) = adversary_rng.uniform(-1.0, 1.0);
            adversary_actions(1, i) = adversary_rng.uniform(-1.0, 1.0);
            break;
          case AdversaryPolicy::Kind::kNone:
            break;
        }
        ++adv;
      }
    }
    const Matrix joint = compose_perturbed_action(defender_actions, adversary_actions, phi);
    const auto step = env.step(joint);
    record.actions.col(t) = Eigen::Map<const Vector>(joint.data(), joint.size());
    record.rewards[t] = step.reward;
    record.positions.col(t + 1) = env.global_state();
    for (int i = 0; i < n; ++i)
      histories[static_cast<std::size_t>(i)].push(step.observations[static_cast<std::size_t>(i)]);
  }
  return record;
}

std::vector<Scalar> run_episodes(std::vector<Net>& defenders, const AdversaryPolicy& adversary,
                                 const Partition& phi, int n_episodes, std::uint64_t seed,
                                 const EnvConfig& env_cfg) {
  Rng env_rng(derive_stream_seed(seed, "eval.env"));
  Rng adversary_rng(derive_stream_seed(seed, "eval.adversary"));
  std::vector<Scalar> returns;
  returns.reserve(static_cast<std::size_t>(n_episodes));
  for (int e = 0; e < n_episodes; ++e) {
    const EpisodeRecord record =
        play_episode(defenders, adversary, phi, env_rng, adversary_rng, env_cfg);
    returns.push_back(record.rewards.sum());
  }
  return returns;
}

EvalReport aggregate_report(std::string scenario, std::vector<EvalCell> cells, Scalar level) {
  EvalReport report;
  report.scenario = std::move(scenario);
  report.cells = std::move(cells);
  report.n = static_cast<int>(report.cells.size());
  if (report.cells.empty()) return report;

  Scalar weighted = 0.0;
  std::int64_t episodes = 0;
  std::vector<Scalar> means;
  means.reserve(report.cells.size());
  for (const auto& c : report.cells) {
    weighted += c.mean_return * c.n_episodes;
    episodes += c.n_episodes;
    means.push_back(c.mean_return);
  }
  report.mean = episodes > 0 ? weighted / static_cast<Scalar>(episodes) : 0.0;
  if (means.size() >= 2) report.ci95_halfwidth = confidence_interval(means, level).second;
  return report;
}

void write_eval_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write eval CSV '" + path.string() + "'");
  out << "scenario,defender_seed,partition,n_episodes,mean_return,ci95\n";
  for (const auto& c : report.cells)
    out << report.scenario << ',' << c.defender_seed << ',' << c.partition.bitstring() << ','
        << c.n_episodes << ',' << format_number(c.mean_return) << ',' << format_number(c.ci95)
        << '\n';
  out << report.scenario << ",aggregate,," << report.n << ',' << format_number(report.mean) << ','
      << format_number(report.ci95_halfwidth) << '\n';
}

namespace {

EvalCell evaluate_cell(const RunHandle& defender, const AdversaryPolicy& adversary,
                       const Partition& phi, int episodes, std::uint64_t seed, Scalar ci_level) {
  const CheckpointData data = load_checkpoint(defender.paths.final_checkpoint);
  std::vector<Net> actors = load_defender_actors(data, defender.cfg);
  const auto returns =
      run_episodes(actors, adversary, phi, episodes, seed, defender.cfg.env_config());
  EvalCell cell;
  cell.defender_seed = defender.cfg.seed;
  cell.partition = phi;
  cell.n_episodes = episodes;
  if (!returns.empty()) {
    Scalar mean = 0.0;
    for (const Scalar r : returns) mean += r;
    cell.mean_return = mean / static_cast<Scalar>(returns.size());
    if (returns.size() >= 2) cell.ci95 = confidence_interval(returns, ci_level).second;
  }
  return cell;
}

}  // namespace

std::uint64_t attack_cell_seed(std::uint64_t master_seed, std::uint64_t defender_seed,
                               const Partition& partition) {
  return derive_stream_seed(master_seed,
                            "attack." + std::to_string(defender_seed) + "." + partition.bitstring());
}

EvalReport cooperative_report(const std::vector<RunHandle>& defenders, int episodes,
                              std::uint64_t master_seed, Scalar ci_level) {
  std::vector<EvalCell> cells;
  for (const auto& d : defenders) {
    const Partition phi(d.cfg.env.n_agents);
    const auto seed = derive_stream_seed(master_seed, "coop." + std::to_string(d.cfg.seed));
    cells.push_back(
        evaluate_cell(d, AdversaryPolicy::none(), phi, episodes, seed, ci_level));
  }
  return aggregate_report("cooperative", std::move(cells), ci_level);
}

EvalReport attack_protocol(const std::vector<RunHandle>& defenders, const ProtocolOptions& opt) {
  if (defenders.empty()) throw MissingArtifactError("attack_protocol: no defender runs given");
  const int n = defenders.front().cfg.env.n_agents;
  const auto partitions = enumerate_single_adversary_partitions(n);

  struct Job {
    const RunHandle* defender;
    Partition partition;
    std::uint64_t seed;
    std::filesystem::path dir;
  };
  std::vector<Job> jobs;
  std::vector<std::string> missing;
  for (const auto& d : defenders) {
    for (const auto& phi : partitions) {
      Job job{&d, phi, attack_cell_seed(opt.master_seed, d.cfg.seed, phi), {}};
      job.dir = d.paths.dir / "attacks" /
                ("p" + phi.bitstring() + "-s" + std::to_string(job.seed));
      if (!opt.train_missing && !std::filesystem::exists(job.dir / "adversary.ckpt"))
        missing.push_back((job.dir / "adversary.ckpt").string());
      jobs.push_back(std::move(job));
    }
  }
  if (!missing.empty()) {
    std::string msg = "attack_protocol: missing adversary checkpoints:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw MissingArtifactError(msg);
  }

  std::vector<EvalCell> cells(jobs.size());
  parallel_for(opt.jobs, static_cast<int>(jobs.size()), [&](int idx) {
    const Job& job = jobs[static_cast<std::size_t>(idx)];
    const RunHandle& d = *job.defender;
    const auto ckpt_path = job.dir / "adversary.ckpt";

    CheckpointData adversary_data;
    if (std::filesystem::exists(ckpt_path)) {
      adversary_data = load_checkpoint(ckpt_path);
    } else {
      AttackJob attack{d.paths.final_checkpoint, job.partition, opt.attack_budget, job.seed};
      AttackResult result = train_adversary(attack, d.cfg);
      std::filesystem::create_directories(job.dir);
      save_checkpoint(ckpt_path, result.adversary_checkpoint);
      std::ofstream curve(job.dir / "curve.csv", std::ios::trunc);
      curve << kMetricsHeader << "\n";
      for (const auto& m : result.learning_curve)
        curve << metrics_row(m, d.cfg.deterministic) << "\n";
      // The persisted f32 checkpoint is canonical; evaluate what was saved.
      adversary_data = load_checkpoint(ckpt_path);
    }

    const CheckpointData defender_data = load_checkpoint(d.paths.final_checkpoint);
    std::vector<Net> defender_actors = load_defender_actors(defender_data, d.cfg);
    std::vector<Net> adversary_actors = load_adversary_actors(adversary_data, d.cfg, job.partition);
    const auto returns =
        run_episodes(defender_actors, AdversaryPolicy::from_nets(adversary_actors), job.partition,
                     opt.episodes, derive_stream_seed(job.seed, "attack.eval"),
                     d.cfg.env_config());

    EvalCell cell;
    cell.defender_seed = d.cfg.seed;
    cell.partition = job.partition;
    cell.n_episodes = opt.episodes;
    Scalar mean = 0.0;
    for (const Scalar r : returns) mean += r;
    cell.mean_return = returns.empty() ? 0.0 : mean / static_cast<Scalar>(returns.size());
    if (returns.size() >= 2) cell.ci95 = confidence_interval(returns, opt.ci_level).second;
    cells[static_cast<std::size_t>(idx)] = std::move(cell);
  });

  return aggregate_report("single-adversary", std::move(cells), opt.ci_level);
}

EvalReport random_adversary_report(const std::vector<RunHandle>& defenders, int episodes,
                                   std::uint64_t master_seed, Scalar ci_level) {
  std::vector<EvalCell> cells;
  for (const auto& d : defenders) {
    for (const auto& phi : enumerate_single_adversary_partitions(d.cfg.env.n_agents)) {
      const auto seed = derive_stream_seed(
          master_seed, "random." + std::to_string(d.cfg.seed) + "." + phi.bitstring());
      cells.push_back(
          evaluate_cell(d, AdversaryPolicy::random(), phi, episodes, seed, ci_level));
    }
  }
  return aggregate_report("random-adversary", std::move(cells), ci_level);
}

Scalar timing_benchmark(const RunConfig& cfg, int epochs) {
  Trainer trainer(cfg);
  Scalar total = 0.0;
  for (int e = 0; e < epochs; ++e) total += trainer.train_epoch().wall_time_seconds;
  return epochs > 0 ? total / static_cast<Scalar>(epochs) : 0.0;
}

}  // namespace mir3
