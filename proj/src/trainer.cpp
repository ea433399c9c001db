#include "mir3/trainer.hpp"

#include <chrono>
#include <cmath>
#include <iostream>

#include "mir3/errors.hpp"

namespace mir3 {

Scalar shape_reward(Scalar r, const MIEstimate& mi, Scalar lambda) {
  return r - lambda * mi.total;
}

Scalar td_target(Scalar reward, Scalar gamma, bool done, Scalar next_q) {
  return reward + gamma * (done ? 0.0 : 1.0) * next_q;
}

std::vector<int> actor_sizes(const RunConfig& cfg) {
  std::vector<int> sizes{cfg.env_config().history_dim()};
  sizes.insert(sizes.end(), static_cast<std::size_t>(cfg.train.hidden_layers),
               cfg.train.hidden_dim);
  sizes.push_back(2);
  return sizes;
}

std::vector<Activation> actor_activations(const RunConfig& cfg) {
  std::vector<Activation> acts(static_cast<std::size_t>(cfg.train.hidden_layers),
                               Activation::kRelu);
  acts.push_back(Activation::kTanh);
  return acts;
}

std::vector<int> critic_sizes(const RunConfig& cfg) {
  const EnvConfig env = cfg.env_config();
  std::vector<int> sizes{env.state_dim() + 2 * env.n_agents};
  sizes.insert(sizes.end(), static_cast<std::size_t>(cfg.train.hidden_layers),
               cfg.train.hidden_dim);
  sizes.push_back(1);
  return sizes;
}

std::vector<Activation> critic_activations(const RunConfig& cfg) {
  std::vector<Activation> acts(static_cast<std::size_t>(cfg.train.hidden_layers),
                               Activation::kRelu);
  acts.push_back(Activation::kLinear);
  return acts;
}

Matrix m3ddpg_perturb_batch(Net& critic, const Matrix& states, const Matrix& actions_flat,
                            Scalar eps, int self_index) {
  if (eps < 0.0) throw std::invalid_argument("m3ddpg_perturb: eps must be >= 0");
  if (eps == 0.0) return actions_flat;
  const Index batch = states.cols();
  Matrix input(states.rows() + actions_flat.rows(), batch);
  input.topRows(states.rows()) = states;
  input.bottomRows(actions_flat.rows()) = actions_flat;
  forward(critic, input);
  const Matrix input_grad =
      backward(critic, Matrix(Matrix::Ones(1, batch)), /*accumulate_param_grads=*/false);
  const Matrix action_grad = input_grad.bottomRows(actions_flat.rows());

  Matrix perturbed =
      (actions_flat.array() - eps * action_grad.array().sign()).cwiseMax(-1.0).cwiseMin(1.0);
  perturbed.middleRows(2 * self_index, 2) = actions_flat.middleRows(2 * self_index, 2);
  return perturbed;
}

Matrix m3ddpg_perturb(Net& critic, const Vector& state, const Matrix& actions, Scalar eps,
                      int self_index) {
  const Index n = actions.cols();
  const Eigen::Map<const Vector> flat(actions.data(), actions.size());
  const Matrix perturbed =
      m3ddpg_perturb_batch(critic, Matrix(state), Matrix(flat), eps, self_index);
  return Eigen::Map<const Matrix>(perturbed.data(), 2, n);
}

Trainer::Trainer(const RunConfig& cfg)
    : cfg_(cfg),
      env_cfg_(cfg.env_config()),
      env_(env_cfg_),
      buffer_(cfg.train.buffer_size),
      env_rng_(derive_stream_seed(cfg.seed, "env")),
      explore_rng_(derive_stream_seed(cfg.seed, "explore")),
      sample_rng_(derive_stream_seed(cfg.seed, "sample")),
      club_rng_(derive_stream_seed(cfg.seed, "club")) {
  validate(cfg_);
  const int n = env_cfg_.n_agents;

  Rng init(derive_stream_seed(cfg.seed, "init.backbone"));
  actors_.reserve(static_cast<std::size_t>(n));
  critics_.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) actors_.emplace_back(actor_sizes(cfg_), actor_activations(cfg_), init);
  for (int i = 0; i < n; ++i)
    critics_.emplace_back(critic_sizes(cfg_), critic_activations(cfg_), init);
  target_actors_ = actors_;
  target_critics_ = critics_;

  if (cfg_.algo() == Algorithm::kMir3) {
    Rng club_init(derive_stream_seed(cfg.seed, "init.club"));
    for (int i = 0; i < n; ++i)
      clubs_.emplace_back(env_cfg_.history_dim(), 2, cfg_.mir3.mi_hidden_dim, club_init);
  }
  last_mi_.per_agent = Vector::Zero(n);
}

bool Trainer::shaping_active() const {
  return cfg_.algo() == Algorithm::kMir3 && cfg_.mir3.lambda > 0.0;
}

EpisodeRecord Trainer::rollout_episode(bool with_exploration_noise) {
  const int n = env_cfg_.n_agents;
  const int steps = env_cfg_.max_episode_len;

  EpisodeRecord record;
  record.positions.resize(2 * n, steps + 1);
  record.actions.resize(2 * n, steps);
  record.rewards.resize(steps);

  std::vector<Vector> obs = env_.reset(env_rng_);
  std::vector<History> histories(static_cast<std::size_t>(n),
                                 History(env_cfg_.history_window, env_cfg_.obs_dim()));
  for (int i = 0; i < n; ++i) histories[static_cast<std::size_t>(i)].push(obs[static_cast<std::size_t>(i)]);
  record.positions.col(0) = env_.global_state();

  Matrix joint(2, n);
  for (int t = 0; t < steps; ++t) {
    for (int i = 0; i < n; ++i) {
      Vector a = forward(actors_[static_cast<std::size_t>(i)],
                         histories[static_cast<std::size_t>(i)].flat());
      if (with_exploration_noise && cfg_.train.exploration_noise > 0.0) {
        for (Index d = 0; d < 2; ++d)
          a[d] = std::clamp(a[d] + explore_rng_.normal(0.0, cfg_.train.exploration_noise), -1.0,
                            1.0);
      }
      joint.col(i) = a;
    }
    const auto result = env_.step(joint);
    record.actions.col(t) = Eigen::Map<const Vector>(joint.data(), joint.size());
    record.rewards[t] = result.reward;
    record.positions.col(t + 1) = env_.global_state();
    for (int i = 0; i < n; ++i)
      histories[static_cast<std::size_t>(i)].push(result.observations[static_cast<std::size_t>(i)]);
  }
  return record;
}

void Trainer::fit_clubs_from_buffer() {
  if (cfg_.algo() != Algorithm::kMir3 || cfg_.mir3.mi_train_epochs <= 0) return;
  std::vector<Matrix> histories, actions;
  buffer_.sample_history_action_pairs(club_rng_, cfg_.mir3.mi_batch_size, env_cfg_, histories,
                                      actions);
  for (int i = 0; i < env_cfg_.n_agents; ++i)
    fit_club(clubs_[static_cast<std::size_t>(i)], histories[static_cast<std::size_t>(i)],
             actions[static_cast<std::size_t>(i)], cfg_.mir3.mi_train_epochs, cfg_.mir3.mi_lr,
             club_rng_, cfg_.mir3.mi_batch_size, cfg_.train.max_grad_norm);
}

Vector Trainer::shaped_rewards(const std::vector<Transition>& batch) {
  const auto B = static_cast<Index>(batch.size());
  Vector rewards(B);
  for (Index j = 0; j < B; ++j) rewards[j] = batch[static_cast<std::size_t>(j)].reward;
  if (!shaping_active()) return rewards;

  const int n = env_cfg_.n_agents;
  Matrix h(env_cfg_.history_dim(), B), a(2, B);
  Matrix scores(n, B);
  for (int i = 0; i < n; ++i) {
    for (Index j = 0; j < B; ++j) {
      const auto& tr = batch[static_cast<std::size_t>(j)];
      h.col(j) = tr.histories[static_cast<std::size_t>(i)];
      a.col(j) = tr.actions.col(i);
    }
    scores.row(i) = club_scores(clubs_[static_cast<std::size_t>(i)], h, a, &club_rng_).transpose();
  }

  last_mi_.per_agent = scores.rowwise().mean();
  last_mi_.total = last_mi_.per_agent.sum();

  Vector shaped(B);
  for (Index j = 0; j < B; ++j) {
    MIEstimate sample_mi;
    sample_mi.per_agent = scores.col(j);
    sample_mi.total = scores.col(j).sum();
    shaped[j] = shape_reward(rewards[j], sample_mi, cfg_.mir3.lambda);
  }

  // Shaping-scale sanity monitor: the penalty should stay well below the raw
  // reward magnitude at sensible lambdas.
  const Scalar mean_abs_r = rewards.cwiseAbs().mean();
  const Scalar mean_penalty = (rewards - shaped).cwiseAbs().mean();
  if (!shaping_scale_warned_ && mean_abs_r > 0.0 && mean_penalty > 0.1 * mean_abs_r) {
    std::cerr << "[mir3] note: mean |lambda*I| = " << mean_penalty << " exceeds 10% of mean |r| = "
              << mean_abs_r << "\n";
    shaping_scale_warned_ = true;
  }
  return shaped;
}

std::optional<Scalar> Trainer::critic_update(const std::vector<Transition>& batch) {
  const auto B = static_cast<Index>(batch.size());
  if (B == 0) throw std::invalid_argument("critic_update: empty batch");
  const int n = env_cfg_.n_agents;
  const int state_dim = env_cfg_.state_dim();
  const int action_dim = 2 * n;

  Matrix states(state_dim, B), next_states(state_dim, B), actions(action_dim, B);
  Vector done(B);
  for (Index j = 0; j < B; ++j) {
    const auto& tr = batch[static_cast<std::size_t>(j)];
    states.col(j) = tr.state;
    next_states.col(j) = tr.next_state;
    actions.col(j) = Eigen::Map<const Vector>(tr.actions.data(), tr.actions.size());
    done[j] = tr.done ? 1.0 : 0.0;
  }

  Matrix next_hist(env_cfg_.history_dim(), B);
  Matrix next_actions(action_dim, B);
  for (int k = 0; k < n; ++k) {
    for (Index j = 0; j < B; ++j)
      next_hist.col(j) = batch[static_cast<std::size_t>(j)].next_histories[static_cast<std::size_t>(k)];
    next_actions.middleRows(2 * k, 2) = forward(target_actors_[static_cast<std::size_t>(k)], next_hist);
  }

  const Vector rewards = shaped_rewards(batch);
  if (!rewards.allFinite()) {
    ++skipped_batches_;
    std::cerr << "[train] warning: non-finite shaped reward, skipping batch\n";
    return std::nullopt;
  }

  const AdamConfig adam{cfg_.train.critic_lr, cfg_.train.adam_beta1, cfg_.train.adam_beta2,
                        cfg_.train.adam_eps};
  const bool minimax = cfg_.algo() == Algorithm::kM3ddpg;

  Matrix critic_input(state_dim + action_dim, B);
  critic_input.topRows(state_dim) = states;
  critic_input.bottomRows(action_dim) = actions;

  Scalar loss_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    Net& target_critic = target_critics_[static_cast<std::size_t>(i)];
    Matrix next_actions_i = next_actions;
    if (minimax)
      next_actions_i =
          m3ddpg_perturb_batch(target_critic, next_states, next_actions, cfg_.m3ddpg.epsilon, i);

    Matrix target_input(state_dim + action_dim, B);
    target_input.topRows(state_dim) = next_states;
    target_input.bottomRows(action_dim) = next_actions_i;
    const Matrix next_q = forward(target_critic, target_input);

    Vector y(B);
    for (Index j = 0; j < B; ++j)
      y[j] = td_target(rewards[j], cfg_.train.gamma, done[j] != 0.0, next_q(0, j));
    if (!y.allFinite()) {
      ++skipped_batches_;
      std::cerr << "[train] warning: non-finite TD target, skipping batch\n";
      return std::nullopt;
    }

    Net& critic = critics_[static_cast<std::size_t>(i)];
    const Matrix q = forward(critic, critic_input);
    const Matrix diff = q - y.transpose();
    loss_sum += diff.squaredNorm() / static_cast<Scalar>(B);

    zero_grads(critic.params());
    backward(critic, Matrix(2.0 / static_cast<Scalar>(B) * diff));
    clip_grad_norm(critic.params(), cfg_.train.max_grad_norm);
    adam_step(critic.params(), adam);
  }
  return loss_sum / static_cast<Scalar>(n);
}

Scalar Trainer::actor_update(const std::vector<Transition>& batch) {
  const auto B = static_cast<Index>(batch.size());
  if (B == 0) throw std::invalid_argument("actor_update: empty batch");
  const int n = env_cfg_.n_agents;
  const int state_dim = env_cfg_.state_dim();
  const int action_dim = 2 * n;

  Matrix states(state_dim, B), actions(action_dim, B), hist(env_cfg_.history_dim(), B);
  for (Index j = 0; j < B; ++j) {
    const auto& tr = batch[static_cast<std::size_t>(j)];
    states.col(j) = tr.state;
    actions.col(j) = Eigen::Map<const Vector>(tr.actions.data(), tr.actions.size());
  }

  const AdamConfig adam{cfg_.train.actor_lr, cfg_.train.adam_beta1, cfg_.train.adam_beta2,
                        cfg_.train.adam_eps};
  const bool minimax = cfg_.algo() == Algorithm::kM3ddpg;

  Scalar loss_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    Net& actor = actors_[static_cast<std::size_t>(i)];
    Net& critic = critics_[static_cast<std::size_t>(i)];

    for (Index j = 0; j < B; ++j)
      hist.col(j) = batch[static_cast<std::size_t>(j)].histories[static_cast<std::size_t>(i)];
    const Matrix mu = forward(actor, hist);

    Matrix base_actions = actions;
    if (minimax)
      base_actions = m3ddpg_perturb_batch(critic, states, actions, cfg_.m3ddpg.epsilon, i);

    Matrix input(state_dim + action_dim, B);
    input.topRows(state_dim) = states;
    input.bottomRows(action_dim) = base_actions;
    input.middleRows(state_dim + 2 * i, 2) = mu;

    const Matrix q = forward(critic, input);
    loss_sum += -q.mean();

    const Matrix input_grad = backward(
        critic, Matrix(Matrix::Constant(1, B, -1.0 / static_cast<Scalar>(B))), /*accumulate_param_grads=*/false);
    zero_grads(actor.params());
    backward(actor, Matrix(input_grad.middleRows(state_dim + 2 * i, 2)));
    clip_grad_norm(actor.params(), cfg_.train.max_grad_norm);
    adam_step(actor.params(), adam);
  }
  return loss_sum / static_cast<Scalar>(n);
}

void Trainer::soft_update_targets() {
  for (std::size_t i = 0; i < actors_.size(); ++i) {
    soft_update(actors_[i], target_actors_[i], cfg_.train.tau);
    soft_update(critics_[i], target_critics_[i], cfg_.train.tau);
  }
}

EpochMetrics Trainer::train_epoch() {
  const auto start = std::chrono::steady_clock::now();

  EpisodeRecord record = rollout_episode(/*with_exploration_noise=*/true);
  const Scalar episode_return = record.rewards.sum();
  env_steps_ += record.length();
  buffer_.push(std::move(record));

  fit_clubs_from_buffer();

  EpochMetrics metrics;
  metrics.epoch = epoch_;
  metrics.env_steps = env_steps_;
  metrics.episode_return = episode_return;

  const bool can_update = env_steps_ >= cfg_.train.warmup_steps && buffer_.size() >= 1;
  if (can_update) {
    Scalar critic_loss_sum = 0.0, actor_loss_sum = 0.0;
    int critic_updates = 0, actor_updates = 0;
    for (int e = 0; e < cfg_.train.train_epochs; ++e) {
      for (int b = 0; b < cfg_.train.num_batches; ++b) {
        const auto batch =
            buffer_.sample_transitions(sample_rng_, cfg_.train.batch_size, env_cfg_);
        if (const auto loss = critic_update(batch)) {
          critic_loss_sum += *loss;
          ++critic_updates;
        } else {
          continue;  // batch skipped; leave the actors alone as well
        }
        actor_loss_sum += actor_update(batch);
        ++actor_updates;
      }
    }
    if (critic_updates > 0) metrics.critic_loss = critic_loss_sum / critic_updates;
    if (actor_updates > 0) metrics.actor_loss = actor_loss_sum / actor_updates;
    soft_update_targets();
  }
  if (shaping_active()) metrics.mi_total = last_mi_.total;

  if (!std::isfinite(episode_return) ||
      (metrics.critic_loss && !std::isfinite(*metrics.critic_loss)) ||
      (metrics.actor_loss && !std::isfinite(*metrics.actor_loss)))
    throw NumericalError("training produced non-finite metrics at epoch " +
                         std::to_string(epoch_));

  ++epoch_;
  metrics.wall_time_seconds =
      std::chrono::duration<Scalar>(std::chrono::steady_clock::now() - start).count();
  return metrics;
}

CheckpointData Trainer::make_checkpoint() const {
  CheckpointData data;
  for (std::size_t i = 0; i < actors_.size(); ++i)
    collect_params(actors_[i].params(), "actor." + std::to_string(i) + ".", data);
  for (std::size_t i = 0; i < critics_.size(); ++i)
    collect_params(critics_[i].params(), "critic." + std::to_string(i) + ".", data);
  for (std::size_t i = 0; i < clubs_.size(); ++i) {
    collect_params(clubs_[i].mean_net().params(), "club." + std::to_string(i) + ".mean.", data);
    collect_params(clubs_[i].logvar_net().params(), "club." + std::to_string(i) + ".logvar.",
                   data);
  }
  return data;
}

void Trainer::restore_checkpoint(const CheckpointData& data) {
  for (std::size_t i = 0; i < actors_.size(); ++i)
    restore_params(data, "actor." + std::to_string(i) + ".", actors_[i].params());
  for (std::size_t i = 0; i < critics_.size(); ++i)
    restore_params(data, "critic." + std::to_string(i) + ".", critics_[i].params());
  for (std::size_t i = 0; i < clubs_.size(); ++i) {
    restore_params(data, "club." + std::to_string(i) + ".mean.", clubs_[i].mean_net().params());
    restore_params(data, "club." + std::to_string(i) + ".logvar.",
                   clubs_[i].logvar_net().params());
  }
  target_actors_ = actors_;
  target_critics_ = critics_;
}

}  // namespace mir3
