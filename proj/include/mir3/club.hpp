#pragma once

#include <optional>
#include <vector>

#include "mir3/net.hpp"
#include "mir3/rng.hpp"
#include "mir3/types.hpp"

namespace mir3 {

/// Learned conditional Gaussian q(a|h) with diagonal covariance: one MLP for
/// the means, one for the log-variances. Log-variances are clamped to
/// [-6, 2] after every forward.
class ClubNet {
 public:
  ClubNet(int history_dim, int action_dim, int hidden_dim, Rng& init);

  Net& mean_net() { return mean_net_; }
  Net& logvar_net() { return logvar_net_; }
  const Net& mean_net() const { return mean_net_; }
  const Net& logvar_net() const { return logvar_net_; }

  int history_dim() const { return mean_net_.input_dim(); }
  int action_dim() const { return mean_net_.output_dim(); }

  /// Updates skipped because the likelihood went non-finite.
  std::int64_t skipped_updates = 0;

  static constexpr Scalar kLogVarFloor = -6.0;
  static constexpr Scalar kLogVarCeil = 2.0;

 private:
  Net mean_net_;
  Net logvar_net_;
};

/// Per-agent upper-bound values and their sum.
struct MIEstimate {
  Vector per_agent;
  Scalar total = 0.0;
};

/// Maximizes the mean log-likelihood sum_j log q(a_j|h_j) with Adam.
/// `epochs` are full passes over the batch in shuffled minibatches of
/// `minibatch` samples; columns of h/a are samples. max_grad_norm <= 0
/// disables clipping.
void fit_club(ClubNet& club, const Matrix& histories, const Matrix& actions, int epochs, Scalar lr,
              Rng& rng, int minibatch = 256, Scalar max_grad_norm = 0.0);

/// Per-sample contrastive scores whose mean is the batch estimate:
///   score_j = log q(a_j|h_j) - negative_j
/// with negative_j = (1/B) sum_k log q(a_k|h_j) for B <= 512 (exact pairing)
/// and one uniformly-shuffled negative per positive above (needs `rng`).
Vector club_scores(ClubNet& club, const Matrix& histories, const Matrix& actions,
                   Rng* rng = nullptr);

/// Batch upper-bound estimate; B >= 2 required.
Scalar club_estimate(ClubNet& club, const Matrix& histories, const Matrix& actions,
                     Rng* rng = nullptr);

/// One estimate per agent, summed.
MIEstimate joint_mi(std::vector<ClubNet>& clubs, const std::vector<Matrix>& histories,
                    const std::vector<Matrix>& actions, Rng* rng = nullptr);

/// Mean log-likelihood of the batch under the current q (diagnostic, used by
/// fit quality tests).
Scalar club_log_likelihood(ClubNet& club, const Matrix& histories, const Matrix& actions);

}  // namespace mir3
