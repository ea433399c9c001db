#pragma once

#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "mir3/adversary.hpp"
#include "mir3/run.hpp"

namespace mir3 {

/// Inverse standard-normal CDF (Acklam's rational approximation, |relative
/// error| < 1.2e-9); z for a two-sided 95% interval is 1.959964.
Scalar normal_quantile(Scalar p);

/// Normal-approximation interval: mean +- z * s / sqrt(n) with the n-1
/// sample standard deviation. Requires >= 2 samples.
std::pair<Scalar, Scalar> confidence_interval(std::span<const Scalar> samples,
                                              Scalar level = 0.95);

/// Policy source for compromised agents during evaluation rollouts.
struct AdversaryPolicy {
  enum class Kind { kNone, kNets, kRandom };
  Kind kind = Kind::kNone;
  std::vector<Net>* nets = nullptr;  // flagged-agent order, Kind::kNets only

  static AdversaryPolicy none() { return {}; }
  static AdversaryPolicy from_nets(std::vector<Net>& nets) {
    return {Kind::kNets, &nets};
  }
  static AdversaryPolicy random() { return {Kind::kRandom, nullptr}; }
};

/// One noise-free episode; defender actions come from the frozen actors and
/// flagged agents from the adversary policy.
EpisodeRecord play_episode(std::vector<Net>& defenders, const AdversaryPolicy& adversary,
                           const Partition& phi, Rng& env_rng, Rng& adversary_rng,
                           const EnvConfig& env_cfg);

/// Undiscounted raw-reward episode returns for n_episodes deterministic
/// rollouts. Without an adversary the partition must be all-defender.
std::vector<Scalar> run_episodes(std::vector<Net>& defenders, const AdversaryPolicy& adversary,
                                 const Partition& phi, int n_episodes, std::uint64_t seed,
                                 const EnvConfig& env_cfg);

struct EvalCell {
  std::uint64_t defender_seed = 0;
  Partition partition;
  int n_episodes = 0;
  Scalar mean_return = 0.0;
  Scalar ci95 = 0.0;
};

struct EvalReport {
  std::string scenario;  // cooperative | single-adversary | k-adversary | random-adversary
  std::vector<EvalCell> cells;
  Scalar mean = 0.0;
  Scalar ci95_halfwidth = 0.0;
  int n = 0;  // contributing cells
};

/// Episode-count-weighted mean over cells; interval over the cell means.
EvalReport aggregate_report(std::string scenario, std::vector<EvalCell> cells, Scalar level);

/// CSV columns: scenario,defender_seed,partition,n_episodes,mean_return,ci95;
/// one aggregate row last (defender_seed "aggregate", n_episodes = cell
/// count).
void write_eval_csv(const std::filesystem::path& path, const EvalReport& report);

struct ProtocolOptions {
  std::int64_t attack_budget = 50000;
  int episodes = 32;
  std::uint64_t master_seed = 0;
  int jobs = 1;
  Scalar ci_level = 0.95;
  bool train_missing = true;  // otherwise missing adversaries are an error
};

/// One cell per defender, all-defender partition, no adversary training.
EvalReport cooperative_report(const std::vector<RunHandle>& defenders, int episodes,
                              std::uint64_t master_seed, Scalar ci_level);

/// The worst-case protocol: per defender seed x one-hot partition, train (or
/// load) an adversary under attacks/p<bits>-s<seed>/ inside the defender run
/// directory and evaluate it; aggregates over the seed-x-partition cells.
EvalReport attack_protocol(const std::vector<RunHandle>& defenders, const ProtocolOptions& opt);

/// Same cells but the flagged agent plays uniform random actions.
EvalReport random_adversary_report(const std::vector<RunHandle>& defenders, int episodes,
                                   std::uint64_t master_seed, Scalar ci_level);

/// Mean wall seconds per epoch over `epochs` fresh-trainer epochs (process
/// startup and checkpoint I/O excluded).
Scalar timing_benchmark(const RunConfig& cfg, int epochs = 50);

/// Deterministic per-cell seed for the attack protocol.
std::uint64_t attack_cell_seed(std::uint64_t master_seed, std::uint64_t defender_seed,
                               const Partition& partition);

}  // namespace mir3
