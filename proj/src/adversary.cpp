#include "mir3/adversary.hpp"

#include <algorithm>
#include <chrono>
#include <set>

#include "mir3/errors.hpp"

namespace mir3 {

std::vector<Partition> enumerate_single_adversary_partitions(int n_agents) {
  if (n_agents < 1) throw std::invalid_argument("partitions: n_agents must be >= 1");
  std::vector<Partition> out;
  out.reserve(static_cast<std::size_t>(n_agents));
  for (int i = 0; i < n_agents; ++i) {
    Partition p(n_agents);
    p.set(i, true);
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

// C(n, k) saturated at a large cap; n stays small here.
std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (int i = 1; i <= k; ++i) {
    const std::uint64_t next = result * static_cast<std::uint64_t>(n - k + i) /
                               static_cast<std::uint64_t>(i);
    if (next < result) return UINT64_MAX;
    result = next;
  }
  return result;
}

}  // namespace

std::vector<Partition> sample_multi_adversary_partitions(int n_agents, int k, int count,
                                                         std::uint64_t seed) {
  if (k < 1 || k > n_agents)
    throw std::invalid_argument("partitions: k must be in [1, n_agents]");
  const std::uint64_t total = binomial(n_agents, k);
  if (static_cast<std::uint64_t>(count) > total)
    throw std::invalid_argument("partitions: count " + std::to_string(count) + " exceeds C(" +
                                std::to_string(n_agents) + "," + std::to_string(k) + ") = " +
                                std::to_string(total));

  Rng rng(derive_stream_seed(seed, "partition-sample"));
  std::set<std::string> seen;
  std::vector<Partition> out;
  std::vector<int> agents(static_cast<std::size_t>(n_agents));
  for (int i = 0; i < n_agents; ++i) agents[static_cast<std::size_t>(i)] = i;

  while (static_cast<int>(out.size()) < count) {
    rng.shuffle(agents);
    Partition p(n_agents);
    for (int i = 0; i < k; ++i) p.set(agents[static_cast<std::size_t>(i)], true);
    if (seen.insert(p.bitstring()).second) out.push_back(std::move(p));
  }
  return out;
}

std::vector<Net> load_defender_actors(const CheckpointData& data, const RunConfig& cfg) {
  Rng scratch(0);
  std::vector<Net> actors;
  for (int i = 0; i < cfg.env.n_agents; ++i) {
    Net net(actor_sizes(cfg), actor_activations(cfg), scratch);
    restore_params(data, "actor." + std::to_string(i) + ".", net.params());
    actors.push_back(std::move(net));
  }
  return actors;
}

std::vector<Net> load_adversary_actors(const CheckpointData& data, const RunConfig& cfg,
                                       const Partition& expected) {
  if (!data.trailing.empty()) {
    Partition stored;
    stored.flags = data.trailing;
    if (!(stored == expected))
      throw MissingArtifactError("adversary checkpoint partition " + stored.bitstring() +
                                 " does not match requested " + expected.bitstring());
  }
  Rng scratch(0);
  std::vector<Net> actors;
  for (int i = 0; i < expected.size(); ++i) {
    if (!expected.is_adversary(i)) continue;
    Net net(actor_sizes(cfg), actor_activations(cfg), scratch);
    restore_params(data, "adv_actor." + std::to_string(i) + ".", net.params());
    actors.push_back(std::move(net));
  }
  return actors;
}

AttackResult train_adversary(const AttackJob& job, const RunConfig& cfg) {
  if (job.partition.size() != cfg.env.n_agents)
    throw ConfigError("attack: partition length " + std::to_string(job.partition.size()) +
                      " != n_agents " + std::to_string(cfg.env.n_agents));
  if (job.partition.none())
    throw ConfigError("attack: partition must flag at least one adversary");
  if (job.budget_steps < 1) throw ConfigError("attack: budget_steps must be >= 1");

  const CheckpointData defender_data = load_checkpoint(job.defender_checkpoint);
  std::vector<Net> defenders = load_defender_actors(defender_data, cfg);

  const EnvConfig env_cfg = cfg.env_config();
  const int n = env_cfg.n_agents;
  const int state_dim = env_cfg.state_dim();
  const int action_dim = 2 * n;

  std::vector<int> flagged;
  for (int i = 0; i < n; ++i)
    if (job.partition.is_adversary(i)) flagged.push_back(i);

  Rng init(derive_stream_seed(job.seed, "attack.init"));
  Rng env_rng(derive_stream_seed(job.seed, "attack.env"));
  Rng explore_rng(derive_stream_seed(job.seed, "attack.explore"));
  Rng sample_rng(derive_stream_seed(job.seed, "attack.sample"));

  std::vector<Net> adv_actors, adv_critics;
  for (const int i : flagged) {
    (void)i;
    adv_actors.emplace_back(actor_sizes(cfg), actor_activations(cfg), init);
  }
  for (const int i : flagged) {
    (void)i;
    adv_critics.emplace_back(critic_sizes(cfg), critic_activations(cfg), init);
  }
  std::vector<Net> adv_target_actors = adv_actors;
  std::vector<Net> adv_target_critics = adv_critics;

  RendezvousEnv env(env_cfg);
  ReplayBuffer buffer(cfg.train.buffer_size);
  const AdamConfig actor_adam{cfg.train.actor_lr, cfg.train.adam_beta1, cfg.train.adam_beta2,
                              cfg.train.adam_eps};
  const AdamConfig critic_adam{cfg.train.critic_lr, cfg.train.adam_beta1, cfg.train.adam_beta2,
                               cfg.train.adam_eps};

  const auto epochs = static_cast<int>(
      (job.budget_steps + env_cfg.max_episode_len - 1) / env_cfg.max_episode_len);

  AttackResult result;
  result.partition = job.partition;
  std::int64_t env_steps = 0;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();

    // Rollout: frozen defenders act deterministically, adversaries explore.
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

    Matrix joint(2, n);
    for (int t = 0; t < env_cfg.max_episode_len; ++t) {
      int adv = 0;
      for (int i = 0; i < n; ++i) {
        const Vector& h = histories[static_cast<std::size_t>(i)].flat();
        if (job.partition.is_adversary(i)) {
          Vector a = forward(adv_actors[static_cast<std::size_t>(adv)], h);
          if (cfg.train.exploration_noise > 0.0)
            for (Index d = 0; d < 2; ++d)
              a[d] = std::clamp(a[d] + explore_rng.normal(0.0, cfg.train.exploration_noise),
                                -1.0, 1.0);
          joint.col(i) = a;
          ++adv;
        } else {
          joint.col(i) = forward(defenders[static_cast<std::size_t>(i)], h);
        }
      }
      const auto step = env.step(joint);
      record.actions.col(t) = Eigen::Map<const Vector>(joint.data(), joint.size());
      record.rewards[t] = step.reward;
      record.positions.col(t + 1) = env.global_state();
      for (int i = 0; i < n; ++i)
        histories[static_cast<std::size_t>(i)].push(step.observations[static_cast<std::size_t>(i)]);
    }

    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.episode_return = record.rewards.sum();
    env_steps += record.length();
    metrics.env_steps = env_steps;
    buffer.push(std::move(record));

    // Updates on the negated team reward.
    const auto batch = buffer.sample_transitions(sample_rng, cfg.train.batch_size, env_cfg);
    const auto B = static_cast<Index>(batch.size());

    Matrix states(state_dim, B), next_states(state_dim, B), actions(action_dim, B);
    Vector neg_rewards(B), done(B);
    for (Index j = 0; j < B; ++j) {
      const auto& tr = batch[static_cast<std::size_t>(j)];
      states.col(j) = tr.state;
      next_states.col(j) = tr.next_state;
      actions.col(j) = Eigen::Map<const Vector>(tr.actions.data(), tr.actions.size());
      neg_rewards[j] = -tr.reward;
      done[j] = tr.done ? 1.0 : 0.0;
    }

    // Next joint action: frozen defender policies plus adversary targets.
    Matrix next_actions(action_dim, B);
    Matrix next_hist(env_cfg.history_dim(), B);
    {
      int adv = 0;
      for (int k = 0; k < n; ++k) {
        for (Index j = 0; j < B; ++j)
          next_hist.col(j) =
              batch[static_cast<std::size_t>(j)].next_histories[static_cast<std::size_t>(k)];
        if (job.partition.is_adversary(k)) {
          next_actions.middleRows(2 * k, 2) =
              forward(adv_target_actors[static_cast<std::size_t>(adv)], next_hist);
          ++adv;
        } else {
          next_actions.middleRows(2 * k, 2) = forward(defenders[static_cast<std::size_t>(k)], next_hist);
        }
      }
    }

    Matrix target_input(state_dim + action_dim, B);
    target_input.topRows(state_dim) = next_states;
    target_input.bottomRows(action_dim) = next_actions;
    Matrix critic_input(state_dim + action_dim, B);
    critic_input.topRows(state_dim) = states;
    critic_input.bottomRows(action_dim) = actions;

    Scalar critic_loss_sum = 0.0, actor_loss_sum = 0.0;
    for (std::size_t a = 0; a < flagged.size(); ++a) {
      const Matrix next_q = forward(adv_target_critics[a], target_input);
      Vector y(B);
      for (Index j = 0; j < B; ++j)
        y[j] = td_target(neg_rewards[j], cfg.train.gamma, done[j] != 0.0, next_q(0, j));

      Net& critic = adv_critics[a];
      const Matrix q = forward(critic, critic_input);
      const Matrix diff = q - y.transpose();
      critic_loss_sum += diff.squaredNorm() / static_cast<Scalar>(B);
      zero_grads(critic.params());
      backward(critic, Matrix(2.0 / static_cast<Scalar>(B) * diff));
      clip_grad_norm(critic.params(), cfg.train.max_grad_norm);
      adam_step(critic.params(), critic_adam);
    }
    for (std::size_t a = 0; a < flagged.size(); ++a) {
      const int agent = flagged[a];
      Net& actor = adv_actors[a];
      Net& critic = adv_critics[a];
      Matrix hist(env_cfg.history_dim(), B);
      for (Index j = 0; j < B; ++j)
        hist.col(j) =
            batch[static_cast<std::size_t>(j)].histories[static_cast<std::size_t>(agent)];
      const Matrix mu = forward(actor, hist);

      Matrix input = critic_input;
      input.middleRows(state_dim + 2 * agent, 2) = mu;
      const Matrix q = forward(critic, input);
      actor_loss_sum += -q.mean();

      const Matrix input_grad =
          backward(critic, Matrix(Matrix::Constant(1, B, -1.0 / static_cast<Scalar>(B))),
                   /*accumulate_param_grads=*/false);
      zero_grads(actor.params());
      backward(actor, Matrix(input_grad.middleRows(state_dim + 2 * agent, 2)));
      clip_grad_norm(actor.params(), cfg.train.max_grad_norm);
      adam_step(actor.params(), actor_adam);
    }
    for (std::size_t a = 0; a < flagged.size(); ++a) {
      soft_update(adv_actors[a], adv_target_actors[a], cfg.train.tau);
      soft_update(adv_critics[a], adv_target_critics[a], cfg.train.tau);
    }

    metrics.critic_loss = critic_loss_sum / static_cast<Scalar>(flagged.size());
    metrics.actor_loss = actor_loss_sum / static_cast<Scalar>(flagged.size());
    metrics.wall_time_seconds =
        std::chrono::duration<Scalar>(std::chrono::steady_clock::now() - start).count();
    result.learning_curve.push_back(metrics);
  }

  for (std::size_t a = 0; a < flagged.size(); ++a) {
    const std::string idx = std::to_string(flagged[a]);
    collect_params(adv_actors[a].params(), "adv_actor." + idx + ".", result.adversary_checkpoint);
    collect_params(adv_critics[a].params(), "adv_critic." + idx + ".",
                   result.adversary_checkpoint);
  }
  result.adversary_checkpoint.trailing = job.partition.flags;
  return result;
}

}  // namespace mir3
