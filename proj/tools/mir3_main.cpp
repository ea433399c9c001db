#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "mir3/adversary.hpp"
#include "mir3/checkpoint.hpp"
#include "mir3/eval.hpp"
#include "mir3/format.hpp"
#include "mir3/plot.hpp"
#include "mir3/run.hpp"

namespace fs = std::filesystem;
using namespace mir3;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::string out_dir = "runs";
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
};

void add_global_options(CLI::App* cmd, GlobalOptions& opt) {
  cmd->add_option("--config", opt.config_path, "Config file (flat-sectioned key = value)");
  cmd->add_option("--set", opt.overrides, "Override one config key, e.g. --set mir3.lambda=5e-5")
      ->take_all();
  cmd->add_option("--seed", opt.seed, "Master seed");
  cmd->add_flag("--deterministic", opt.deterministic,
                "Reproducible outputs (wall times written as 0)");
  cmd->add_option("--out-dir", opt.out_dir, "Root directory for run artifacts");
  cmd->add_option("--jobs", opt.jobs, "Parallel worker count for independent jobs");
}

RunConfig build_config(const GlobalOptions& opt) {
  RunConfig cfg;
  if (!opt.config_path.empty()) cfg = load_config_file(opt.config_path);
  for (const auto& kv : opt.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.deterministic) cfg.deterministic = true;
  validate(cfg);
  return cfg;
}

std::vector<Partition> resolve_partitions(const std::string& spec, int n_agents,
                                          std::uint64_t seed, int k, int count) {
  if (spec == "auto-single") return enumerate_single_adversary_partitions(n_agents);
  if (spec == "auto-multi") return sample_multi_adversary_partitions(n_agents, k, count, seed);
  Partition p = Partition::from_bitstring(spec);
  if (p.size() != n_agents)
    throw ConfigError("partition '" + spec + "' has length " + std::to_string(p.size()) +
                      ", expected " + std::to_string(n_agents));
  if (p.none()) throw ConfigError("partition '" + spec + "' flags no adversary");
  return {p};
}

int cmd_train(const GlobalOptions& opt, const std::string& algo) {
  RunConfig cfg = build_config(opt);
  if (!algo.empty()) {
    cfg.algorithm = algo;
    validate(cfg);
  }
  const RunHandle run = run_training(cfg, opt.out_dir);
  std::cout << "run " << run.paths.dir.string() << " complete; final checkpoint at "
            << run.paths.final_checkpoint.string() << "\n";
  return 0;
}

int cmd_attack(const GlobalOptions& opt, const std::string& run_dir,
               const std::string& partition_spec) {
  const RunHandle defender = load_run(run_dir);
  RunConfig cfg = defender.cfg;
  for (const auto& kv : opt.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  const std::uint64_t attack_seed = opt.seed.value_or(cfg.seed);

  const auto partitions = resolve_partitions(partition_spec, cfg.env.n_agents, attack_seed,
                                             cfg.attack.k_adversaries, 5);
  const std::string defender_hash = sha256_file(defender.paths.final_checkpoint);

  parallel_for(opt.jobs, static_cast<int>(partitions.size()), [&](int idx) {
    const Partition& phi = partitions[static_cast<std::size_t>(idx)];
    const std::uint64_t job_seed = attack_cell_seed(attack_seed, cfg.seed, phi);
    const fs::path dir = defender.paths.dir / "attacks" /
                         ("p" + phi.bitstring() + "-s" + std::to_string(job_seed));
    if (fs::exists(dir))
      throw ConfigError("attack directory already exists: " + dir.string());

    AttackJob job{defender.paths.final_checkpoint, phi, cfg.attack.budget_steps, job_seed};
    AttackResult result = train_adversary(job, cfg);
    fs::create_directories(dir);
    save_checkpoint(dir / "adversary.ckpt", result.adversary_checkpoint);
    std::ofstream curve(dir / "curve.csv", std::ios::trunc);
    curve << kMetricsHeader << "\n";
    for (const auto& m : result.learning_curve) curve << metrics_row(m, cfg.deterministic) << "\n";
    std::cout << "attack p" << phi.bitstring() << " done: final adversary return "
              << format_number(result.learning_curve.back().episode_return) << "\n";
  });

  if (sha256_file(defender.paths.final_checkpoint) != defender_hash)
    throw NumericalError("defender checkpoint changed during attack (freeze violation)");
  return 0;
}

int cmd_eval(const GlobalOptions& opt, const std::vector<std::string>& run_dirs,
             const std::string& mode, bool train_attackers, const std::string& out_csv) {
  std::vector<RunHandle> defenders;
  defenders.reserve(run_dirs.size());
  for (const auto& d : run_dirs) defenders.push_back(load_run(d));
  if (defenders.empty()) throw MissingArtifactError("eval: no run directories given");

  RunConfig cfg = defenders.front().cfg;
  const std::uint64_t master = opt.seed.value_or(cfg.seed);

  EvalReport report;
  if (mode == "cooperative") {
    report = cooperative_report(defenders, cfg.eval.episodes, master, cfg.eval.ci_level);
  } else if (mode == "attacked") {
    ProtocolOptions popt;
    popt.attack_budget = cfg.attack.budget_steps;
    popt.episodes = cfg.eval.episodes;
    popt.master_seed = master;
    popt.jobs = opt.jobs;
    popt.ci_level = cfg.eval.ci_level;
    popt.train_missing = train_attackers;
    report = attack_protocol(defenders, popt);
  } else if (mode == "random-adversary") {
    report = random_adversary_report(defenders, cfg.eval.episodes, master, cfg.eval.ci_level);
  } else {
    throw ConfigError("eval: mode must be cooperative|attacked|random-adversary, got '" + mode +
                      "'");
  }

  const fs::path csv = out_csv.empty()
                           ? fs::path(opt.out_dir) / ("eval_" + report.scenario + ".csv")
                           : fs::path(out_csv);
  fs::create_directories(csv.parent_path().empty() ? "." : csv.parent_path());
  write_eval_csv(csv, report);
  std::cout << report.scenario << " aggregate: " << format_number(report.mean) << " +- "
            << format_number(report.ci95_halfwidth) << " (n=" << report.n << " cells) -> "
            << csv.string() << "\n";
  return 0;
}

int cmd_sweep(const GlobalOptions& opt, const std::vector<double>& lambdas,
              const std::vector<std::uint64_t>& seeds, const std::string& out_csv) {
  if (lambdas.empty()) throw ConfigError("sweep: need at least one lambda");
  if (seeds.empty()) throw ConfigError("sweep: need at least one seed");

  const fs::path root = fs::path(opt.out_dir);
  fs::create_directories(root);

  struct Row {
    double lambda;
    EvalReport coop, attacked;
  };
  std::vector<Row> rows;

  for (const double lambda : lambdas) {
    std::vector<RunHandle> defenders(seeds.size());
    parallel_for(opt.jobs, static_cast<int>(seeds.size()), [&](int idx) {
      GlobalOptions run_opt = opt;
      run_opt.seed = seeds[static_cast<std::size_t>(idx)];
      RunConfig cfg = build_config(run_opt);
      cfg.algorithm = "mir3";
      cfg.mir3.lambda = lambda;
      validate(cfg);
      defenders[static_cast<std::size_t>(idx)] = run_training(cfg, root);
    });

    RunConfig cfg = defenders.front().cfg;
    ProtocolOptions popt;
    popt.attack_budget = cfg.attack.budget_steps;
    popt.episodes = cfg.eval.episodes;
    popt.master_seed = opt.seed.value_or(0);
    popt.jobs = opt.jobs;
    popt.ci_level = cfg.eval.ci_level;
    Row row{lambda, cooperative_report(defenders, cfg.eval.episodes, popt.master_seed,
                                       cfg.eval.ci_level),
            attack_protocol(defenders, popt)};
    std::cout << "lambda=" << format_number(lambda)
              << " cooperative=" << format_number(row.coop.mean)
              << " attacked=" << format_number(row.attacked.mean) << "\n";
    rows.push_back(std::move(row));
  }

  const fs::path csv = out_csv.empty() ? root / "sweep.csv" : fs::path(out_csv);
  std::ofstream out(csv, std::ios::trunc);
  out << "lambda,cooperative_mean,cooperative_ci95,attacked_mean,attacked_ci95\n";
  for (const auto& r : rows)
    out << format_number(r.lambda) << ',' << format_number(r.coop.mean) << ','
        << format_number(r.coop.ci95_halfwidth) << ',' << format_number(r.attacked.mean) << ','
        << format_number(r.attacked.ci95_halfwidth) << '\n';
  std::cout << "sweep written to " << csv.string() << "\n";
  return 0;
}

int cmd_bench(const GlobalOptions& opt, const std::vector<std::string>& algos, int epochs) {
  std::vector<Scalar> results;
  for (const auto& algo : algos) {
    GlobalOptions bench_opt = opt;
    RunConfig cfg = build_config(bench_opt);
    cfg.algorithm = algo;
    validate(cfg);
    const Scalar mean_s = timing_benchmark(cfg, epochs);
    results.push_back(mean_s);
    std::cout << algo << ": " << format_number(mean_s) << " s/epoch over " << epochs
              << " epochs\n";
  }
  if (results.size() == 2 && results[0] > 0.0)
    std::cout << "ratio " << algos[1] << "/" << algos[0] << " = "
              << format_number(results[1] / results[0]) << "\n";
  return 0;
}

int cmd_plot(const std::string& kind, const std::vector<std::string>& csvs,
             const std::string& out_svg) {
  if (csvs.empty()) throw ConfigError("plot: need at least one CSV");
  std::vector<fs::path> paths(csvs.begin(), csvs.end());
  const fs::path svg = out_svg.empty() ? fs::path(csvs.front()).replace_extension(".svg")
                                       : fs::path(out_svg);
  if (kind == "ablation")
    plot_ablation(paths.front(), svg);
  else if (kind == "bars")
    plot_eval_bars(paths, svg);
  else if (kind == "trajectory")
    plot_trajectory(paths.front(), svg);
  else
    throw ConfigError("plot: kind must be ablation|bars|trajectory, got '" + kind + "'");
  std::cout << "wrote " << svg.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust swarm training: regularized multi-agent policies and worst-case attacks"};
  app.require_subcommand(1);

  GlobalOptions opt;

  auto* train = app.add_subcommand("train", "Train policies and write a run directory");
  std::string train_algo;
  add_global_options(train, opt);
  train->add_option("--algo", train_algo, "maddpg | mir3 | m3ddpg");

  auto* attack = app.add_subcommand("attack", "Train worst-case adversaries against a run");
  std::string attack_run, attack_partition = "auto-single";
  add_global_options(attack, opt);
  attack->add_option("run_dir", attack_run, "Defender run directory")->required();
  attack->add_option("--partition", attack_partition,
                     "Bitstring (e.g. 0001), auto-single, or auto-multi");

  auto* eval = app.add_subcommand("eval", "Evaluate runs and write an eval report CSV");
  std::vector<std::string> eval_runs;
  std::string eval_mode = "cooperative", eval_out;
  bool train_attackers = false;
  add_global_options(eval, opt);
  eval->add_option("run_dirs", eval_runs, "Defender run directories")->required();
  eval->add_option("--mode", eval_mode, "cooperative | attacked | random-adversary");
  eval->add_flag("--train-attackers", train_attackers,
                 "Train missing adversaries instead of failing");
  eval->add_option("--out", eval_out, "Report CSV path");

  auto* sweep = app.add_subcommand("sweep", "Train/attack/eval over a lambda grid");
  std::vector<double> sweep_lambdas;
  std::vector<std::uint64_t> sweep_seeds;
  std::string sweep_out;
  add_global_options(sweep, opt);
  sweep->add_option("--lambda", sweep_lambdas, "Lambda grid values")->required()->take_all();
  sweep->add_option("--seeds", sweep_seeds, "Seeds per lambda")->required()->take_all();
  sweep->add_option("--out", sweep_out, "Sweep CSV path");

  auto* bench = app.add_subcommand("bench", "Mean training seconds per epoch");
  std::vector<std::string> bench_algos{"maddpg", "mir3"};
  int bench_epochs = 50;
  add_global_options(bench, opt);
  bench->add_option("--algo", bench_algos, "Algorithms to time")->take_all();
  bench->add_option("--epochs", bench_epochs, "Epochs to average over");

  auto* plot = app.add_subcommand("plot", "Emit SVG charts from result CSVs");
  std::string plot_kind, plot_out;
  std::vector<std::string> plot_csvs;
  plot->add_option("kind", plot_kind, "ablation | bars | trajectory")->required();
  plot->add_option("csvs", plot_csvs, "Input CSV paths")->required();
  plot->add_option("--out", plot_out, "Output SVG path");

  try {
    app.parse(argc, argv);
    if (train->parsed()) return cmd_train(opt, train_algo);
    if (attack->parsed()) return cmd_attack(opt, attack_run, attack_partition);
    if (eval->parsed()) return cmd_eval(opt, eval_runs, eval_mode, train_attackers, eval_out);
    if (sweep->parsed()) return cmd_sweep(opt, sweep_lambdas, sweep_seeds, sweep_out);
    if (bench->parsed()) return cmd_bench(opt, bench_algos, bench_epochs);
    if (plot->parsed()) return cmd_plot(plot_kind, plot_csvs, plot_out);
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
