#pragma once

#include "hierts/model.hpp"

#include <vector>

namespace hierts {

struct HistoryRecord {
  Index t = 0;
  Vec x;
  Index action = 0;  // 0-based
  double y = 0.0;
};

/// Per-action sufficient statistics: noise-scaled Gram matrix
/// G_i = sigma^-2 sum x x^T, moment B_i = sigma^-2 sum y x, pull count N_i.
class SufficientStats {
 public:
  SufficientStats(Index num_actions, Index dim)
      : grams_(static_cast<std::size_t>(num_actions), Mat::Zero(dim, dim)),
        moments_(static_cast<std::size_t>(num_actions), Vec::Zero(dim)),
        pulls_(static_cast<std::size_t>(num_actions), 0) {}

  void update(const Vec& x, Index action, double y, double sigma);

  const Mat& gram(Index i) const { return grams_.at(static_cast<std::size_t>(i)); }
  const Vec& moment(Index i) const { return moments_.at(static_cast<std::size_t>(i)); }
  Index pulls(Index i) const { return pulls_.at(static_cast<std::size_t>(i)); }
  Index rounds() const { return rounds_; }
  Index num_actions() const { return static_cast<Index>(grams_.size()); }
  Index dim() const { return grams_.empty() ? 0 : grams_.front().rows(); }

 private:
  std::vector<Mat> grams_;
  std::vector<Vec> moments_;
  std::vector<Index> pulls_;
  Index rounds_ = 0;
};

SufficientStats stats_from_history(Index num_actions, Index dim,
                                   const std::vector<HistoryRecord>& history, double sigma);

/// Woodbury form of (Sigma0 + G^-1)^-1: Lambda0 - Lambda0 (G + Lambda0)^-1 Lambda0
/// with Lambda0 = Sigma0^-1. Well defined even when G is singular, which it is
/// until d linearly independent contexts hit the action.
Mat precision_weight(const Mat& sigma0, const Mat& gram);

/// Woodbury form of (Sigma0 + G^-1)^-1 G^-1 B: Lambda0 (G + Lambda0)^-1 B.
Vec mle_weight(const Mat& sigma0, const Mat& gram, const Vec& moment);

/// Hyper-posterior in precision form: precision = SigmaBar_t^-1 and
/// shift = SigmaPsi^-1 mu_psi + sum_i Gamma_i^T mle_weight_i, so that
/// mean = precision^-1 shift. Kept separate so information-monotonicity can be
/// checked without inverting.
struct HyperPrecision {
  Mat precision;  // Ld x Ld
  Vec shift;      // Ld
};

HyperPrecision hyper_precision(const HierModelSpec& spec, const SufficientStats& stats);

/// Exact joint hyper-posterior Q_t over R^{Ld}. Weights specs take the
/// Kronecker fast path b_i b_i^T (x) precision_weight_i.
Gaussian hyper_posterior(const HierModelSpec& spec, const SufficientStats& stats);

/// Reference path that always assembles Gamma_i^T W_i Gamma_i with explicit
/// mixing rows; used to cross-check the Kronecker form.
Gaussian hyper_posterior_general(const HierModelSpec& spec, const SufficientStats& stats);

/// Conditional posterior P_{t,i}(. | Psi) over R^d.
Gaussian conditional_posterior(const HierModelSpec& spec, const SufficientStats& stats,
                               Index i, const Vec& psi);

/// Per-latent factored hyper-posteriors Q_{t,l}. Requires Weights mixing and a
/// hyper-prior that is block-diagonal across latents; coupling latents in
/// sigma_psi with this agent is a config error, not a silent approximation.
std::vector<Gaussian> factored_hyper_posterior(const HierModelSpec& spec,
                                               const SufficientStats& stats);

/// Closed-form multi-armed-bandit hyper-posterior (d = 1, contexts = 1).
Gaussian mab_hyper_posterior(const HierModelSpec& spec, const SufficientStats& stats);

/// Exact joint posterior of all action parameters Theta* | H_t over R^{Kd} by
/// direct Bayesian linear regression on the compact Kd-dimensional model.
/// Verification oracle; not used on any agent path.
Gaussian joint_posterior_oracle(const HierModelSpec& spec,
                                const std::vector<HistoryRecord>& history);

/// The same marginal posterior assembled from the hierarchical pieces via the
/// total covariance decomposition
/// SigmaHat = SigmaTilde + SigmaTilde Sigma0^-1 Gamma SigmaBar Gamma^T Sigma0^-1 SigmaTilde.
Gaussian decomposed_marginal_posterior(const HierModelSpec& spec, const SufficientStats& stats);

/// Stacked Kd x Ld mixing map Gamma = (Gamma_i)_{i in [K]}.
Mat stacked_mixing(const HierModelSpec& spec);

}  // namespace hierts
