#include "mir3/club.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mir3 {

namespace {

constexpr Scalar kLog2Pi = 1.8378770664093453;

struct QForward {
  Matrix mean;     // d x B
  Matrix logvar;   // d x B, clamped
  Matrix clamp_mask;  // 1 where the clamp was inactive (gradient passes)
};

QForward q_forward(ClubNet& club, const Matrix& histories) {
  QForward q;
  q.mean = forward(club.mean_net(), histories);
  const Matrix raw = forward(club.logvar_net(), histories);
  q.logvar = raw.cwiseMax(ClubNet::kLogVarFloor).cwiseMin(ClubNet::kLogVarCeil);
  q.clamp_mask = ((raw.array() > ClubNet::kLogVarFloor) && (raw.array() < ClubNet::kLogVarCeil))
                     .cast<Scalar>()
                     .matrix();
  return q;
}

// log q(a_j|h_j) per column.
Vector paired_log_density(const QForward& q, const Matrix& actions) {
  const Matrix residual_sq = (actions - q.mean).array().square().matrix();
  const Matrix inv_var = (-q.logvar).array().exp().matrix();
  return (-0.5 * (q.logvar.array() + kLog2Pi) - 0.5 * residual_sq.array() * inv_var.array())
      .colwise()
      .sum()
      .transpose();
}

}  // namespace

ClubNet::ClubNet(int history_dim, int action_dim, int hidden_dim, Rng& init)
    : mean_net_({history_dim, hidden_dim, action_dim}, {Activation::kRelu, Activation::kLinear},
                init),
      logvar_net_({history_dim, hidden_dim, action_dim}, {Activation::kRelu, Activation::kLinear},
                  init) {}

void fit_club(ClubNet& club, const Matrix& histories, const Matrix& actions, int epochs, Scalar lr,
              Rng& rng, int minibatch, Scalar max_grad_norm) {
  const Index batch = histories.cols();
  if (batch == 0) throw std::invalid_argument("fit_club: empty batch");
  if (actions.cols() != batch)
    throw std::invalid_argument("fit_club: history/action batch size mismatch");
  if (!actions.allFinite()) throw std::invalid_argument("fit_club: non-finite action components");
  if (minibatch < 1) minibatch = static_cast<int>(batch);

  const AdamConfig adam{lr, 0.9, 0.999, 1e-8};
  std::vector<Index> order(static_cast<std::size_t>(batch));
  std::iota(order.begin(), order.end(), Index{0});

  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (Index start = 0; start < batch; start += minibatch) {
      const Index count = std::min<Index>(minibatch, batch - start);
      Matrix h(histories.rows(), count), a(actions.rows(), count);
      for (Index c = 0; c < count; ++c) {
        h.col(c) = histories.col(order[static_cast<std::size_t>(start + c)]);
        a.col(c) = actions.col(order[static_cast<std::size_t>(start + c)]);
      }

      const QForward q = q_forward(club, h);
      const Scalar loss = -paired_log_density(q, a).mean();
      if (!std::isfinite(loss)) {
        ++club.skipped_updates;
        continue;
      }

      // Gradients of -mean log q.
      const Scalar inv_count = 1.0 / static_cast<Scalar>(count);
      const Matrix inv_var = (-q.logvar).array().exp().matrix();
      const Matrix residual = q.mean - a;
      const Matrix mean_grad = inv_count * residual.cwiseProduct(inv_var);
      const Matrix logvar_grad =
          (inv_count * (0.5 - 0.5 * residual.array().square() * inv_var.array()))
              .matrix()
              .cwiseProduct(q.clamp_mask);

      zero_grads(club.mean_net().params());
      zero_grads(club.logvar_net().params());
      backward(club.mean_net(), mean_grad);
      backward(club.logvar_net(), logvar_grad);

      if (max_grad_norm > 0.0) {
        const Scalar gm = grad_norm(club.mean_net().params());
        const Scalar gl = grad_norm(club.logvar_net().params());
        const Scalar norm = std::sqrt(gm * gm + gl * gl);
        if (norm > max_grad_norm) {
          const Scalar scale = max_grad_norm / norm;
          for (auto& [name, e] : club.mean_net().params()) e.grads *= scale;
          for (auto& [name, e] : club.logvar_net().params()) e.grads *= scale;
        }
      }
      adam_step(club.mean_net().params(), adam);
      adam_step(club.logvar_net().params(), adam);
    }
  }
}

Vector club_scores(ClubNet& club, const Matrix& histories, const Matrix& actions, Rng* rng) {
  const Index batch = histories.cols();
  if (batch < 2) throw std::invalid_argument("club: batch must have at least 2 samples");
  if (actions.cols() != batch)
    throw std::invalid_argument("club: history/action batch size mismatch");

  const QForward q = q_forward(club, histories);
  const Vector positive = paired_log_density(q, actions);
  const Matrix inv_var = (-q.logvar).array().exp().matrix();

  Vector negative(batch);
  if (batch <= 512) {
    // Exact full pairing: for each h_j, average log q(a_k|h_j) over the whole
    // batch, using per-dimension action moments. The moments are accumulated
    // over sorted values so every score is exactly permutation-invariant.
    Vector action_sum(actions.rows()), action_sq_sum(actions.rows());
    {
      std::vector<Scalar> values(static_cast<std::size_t>(batch));
      for (Index d = 0; d < actions.rows(); ++d) {
        for (Index j = 0; j < batch; ++j) values[static_cast<std::size_t>(j)] = actions(d, j);
        std::sort(values.begin(), values.end());
        Scalar sum = 0.0, sq = 0.0;
        for (const Scalar v : values) sum += v;
        for (const Scalar v : values) sq += v * v;
        action_sum[d] = sum;
        action_sq_sum[d] = sq;
      }
    }
    const Scalar inv_batch = 1.0 / static_cast<Scalar>(batch);
    for (Index j = 0; j < batch; ++j) {
      Scalar value = 0.0;
      for (Index d = 0; d < actions.rows(); ++d) {
        const Scalar mu = q.mean(d, j);
        const Scalar mean_residual_sq =
            inv_batch * (action_sq_sum[d] - 2.0 * mu * action_sum[d]) + mu * mu;
        value += -0.5 * (q.logvar(d, j) + kLog2Pi) - 0.5 * mean_residual_sq * inv_var(d, j);
      }
      negative[j] = value;
    }
  } else {
    if (rng == nullptr)
      throw std::invalid_argument("club: batches above 512 need an rng for negative sampling");
    std::vector<Index> perm(static_cast<std::size_t>(batch));
    std::iota(perm.begin(), perm.end(), Index{0});
    rng->shuffle(perm);
    for (Index j = 0; j < batch; ++j) {
      const Index k = perm[static_cast<std::size_t>(j)];
      Scalar value = 0.0;
      for (Index d = 0; d < actions.rows(); ++d) {
        const Scalar r = actions(d, k) - q.mean(d, j);
        value += -0.5 * (q.logvar(d, j) + kLog2Pi) - 0.5 * r * r * inv_var(d, j);
      }
      negative[j] = value;
    }
  }
  return positive - negative;
}

Scalar club_estimate(ClubNet& club, const Matrix& histories, const Matrix& actions, Rng* rng) {
  Vector scores = club_scores(club, histories, actions, rng);
  if (histories.cols() <= 512) {
    // Summation over sorted values makes the full-pairing estimate exactly
    // permutation-invariant (the per-sample scores already are).
    std::sort(scores.data(), scores.data() + scores.size());
  }
  Scalar sum = 0.0;
  for (Index j = 0; j < scores.size(); ++j) sum += scores[j];
  return sum / static_cast<Scalar>(scores.size());
}

MIEstimate joint_mi(std::vector<ClubNet>& clubs, const std::vector<Matrix>& histories,
                    const std::vector<Matrix>& actions, Rng* rng) {
  if (clubs.size() != histories.size() || clubs.size() != actions.size())
    throw std::invalid_argument("joint_mi: one (history, action) batch per agent expected");
  MIEstimate mi;
  mi.per_agent = Vector::Zero(static_cast<Index>(clubs.size()));
  for (std::size_t i = 0; i < clubs.size(); ++i)
    mi.per_agent[static_cast<Index>(i)] = club_estimate(clubs[i], histories[i], actions[i], rng);
  mi.total = mi.per_agent.sum();
  return mi;
}

Scalar club_log_likelihood(ClubNet& club, const Matrix& histories, const Matrix& actions) {
  const QForward q = q_forward(club, histories);
  return paired_log_density(q, actions).mean();
}

}  // namespace mir3
