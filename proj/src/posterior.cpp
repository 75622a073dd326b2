#include "hierts/posterior.hpp"

#include <Eigen/Cholesky>

namespace hierts {

namespace {

Mat spd_inverse(const Mat& m, const char* what) {
  Eigen::LLT<Mat> llt(symmetrized(m));
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite(what);
  return llt.solve(Mat::Identity(m.rows(), m.cols()));
}

}  // namespace

void SufficientStats::update(const Vec& x, Index action, double y, double sigma) {
  if (action < 0 || action >= num_actions())
    throw DimensionMismatch("stats: action index out of range");
  if (x.size() != dim()) throw DimensionMismatch("stats: context dimension mismatch");
  if (sigma <= 0.0) throw ValidationError("stats: sigma must be positive");
  const double inv_var = 1.0 / (sigma * sigma);
  const auto a = static_cast<std::size_t>(action);
  grams_[a].noalias() += inv_var * x * x.transpose();
  moments_[a].noalias() += inv_var * y * x;
  pulls_[a] += 1;
  rounds_ += 1;
}

SufficientStats stats_from_history(Index num_actions, Index dim,
                                   const std::vector<HistoryRecord>& history, double sigma) {
  SufficientStats stats(num_actions, dim);
  for (const auto& rec : history) stats.update(rec.x, rec.action, rec.y, sigma);
  return stats;
}

Mat precision_weight(const Mat& sigma0, const Mat& gram) {
  const Mat lambda0 = spd_inverse(sigma0, "precision_weight: Sigma0 not positive definite");
  const Mat v = spd_inverse(gram + lambda0, "precision_weight: G + Lambda0 not positive definite");
  return symmetrized(lambda0 - lambda0 * v * lambda0);
}

Vec mle_weight(const Mat& sigma0, const Mat& gram, const Vec& moment) {
  const Mat lambda0 = spd_inverse(sigma0, "mle_weight: Sigma0 not positive definite");
  Eigen::LLT<Mat> llt(symmetrized(gram + lambda0));
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("mle_weight: G + Lambda0 not positive definite");
  return lambda0 * llt.solve(moment);
}

HyperPrecision hyper_precision(const HierModelSpec& spec, const SufficientStats& stats) {
  const Index ld = spec.L * spec.d;
  const Mat prior_prec = spd_inverse(spec.sigma_psi, "hyper: Sigma_Psi not positive definite");
  HyperPrecision out;
  out.precision = prior_prec;
  out.shift = prior_prec * spec.mu_psi;
  if (const auto* w = std::get_if<WeightsMixing>(&spec.mixing)) {
    for (Index i = 0; i < spec.K; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      const Mat weight = precision_weight(spec.sigma0[idx], stats.gram(i));
      const Vec mle = mle_weight(spec.sigma0[idx], stats.gram(i), stats.moment(i));
      const Vec b_i = w->b.row(i).transpose();
      out.precision.noalias() += kron(b_i * b_i.transpose(), weight);
      out.shift.noalias() += kron(b_i, mle);
    }
  } else {
    for (Index i = 0; i < spec.K; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      const Mat row = mixing_row(spec, i);
      const Mat weight = precision_weight(spec.sigma0[idx], stats.gram(i));
      const Vec mle = mle_weight(spec.sigma0[idx], stats.gram(i), stats.moment(i));
      out.precision.noalias() += row.transpose() * weight * row;
      out.shift.noalias() += row.transpose() * mle;
    }
  }
  out.precision = symmetrized(out.precision);
  if (out.precision.rows() != ld) throw DimensionMismatch("hyper: precision dimension");
  return out;
}

namespace {

Gaussian gaussian_from_precision(const HyperPrecision& hp, double jitter) {
  Eigen::LLT<Mat> llt(hp.precision);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("hyper: posterior precision not positive definite");
  const Mat cov = llt.solve(Mat::Identity(hp.precision.rows(), hp.precision.cols()));
  return Gaussian(llt.solve(hp.shift), cov, jitter);
}

}  // namespace

Gaussian hyper_posterior(const HierModelSpec& spec, const SufficientStats& stats) {
  return gaussian_from_precision(hyper_precision(spec, stats), spec.jitter);
}

Gaussian hyper_posterior_general(const HierModelSpec& spec, const SufficientStats& stats) {
  const Mat prior_prec = spd_inverse(spec.sigma_psi, "hyper: Sigma_Psi not positive definite");
  HyperPrecision hp;
  hp.precision = prior_prec;
  hp.shift = prior_prec * spec.mu_psi;
  for (Index i = 0; i < spec.K; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const Mat row = mixing_row(spec, i);
    const Mat weight = precision_weight(spec.sigma0[idx], stats.gram(i));
    const Vec mle = mle_weight(spec.sigma0[idx], stats.gram(i), stats.moment(i));
    hp.precision.noalias() += row.transpose() * weight * row;
    hp.shift.noalias() += row.transpose() * mle;
  }
  hp.precision = symmetrized(hp.precision);
  return gaussian_from_precision(hp, spec.jitter);
}

Gaussian conditional_posterior(const HierModelSpec& spec, const SufficientStats& stats,
                               Index i, const Vec& psi) {
  if (i < 0 || i >= spec.K) throw DimensionMismatch("conditional: action index out of range");
  if (psi.size() != spec.L * spec.d)
    throw DimensionMismatch("conditional: Psi must have length L*d");
  const auto idx = static_cast<std::size_t>(i);
  const Mat lambda0 =
      spd_inverse(spec.sigma0[idx], "conditional: Sigma0 not positive definite");
  Eigen::LLT<Mat> llt(symmetrized(lambda0 + stats.gram(i)));
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("conditional: posterior precision not positive definite");
  const Mat cov = llt.solve(Mat::Identity(spec.d, spec.d));
  const Vec prior_mean = mixing_row(spec, i) * psi;
  const Vec mean = llt.solve(lambda0 * prior_mean + stats.moment(i));
  return Gaussian(mean, cov, spec.jitter);
}

std::vector<Gaussian> factored_hyper_posterior(const HierModelSpec& spec,
                                               const SufficientStats& stats) {
  const auto* w = std::get_if<WeightsMixing>(&spec.mixing);
  if (w == nullptr)
    throw ValidationError("factored hyper-posterior requires weights mixing");
  for (Index a = 0; a < spec.L; ++a) {
    for (Index b = 0; b < spec.L; ++b) {
      if (a == b) continue;
      if (spec.sigma_psi.block(a * spec.d, b * spec.d, spec.d, spec.d).cwiseAbs().maxCoeff() !=
          0.0)
        throw NonBlockDiagonalHyperPrior(
            "factored hyper-posterior: Sigma_Psi couples latents; per-latent prior factors "
            "are undefined");
    }
  }
  // Variational factors for a Gaussian target: factor means are the blocks of
  // the exact mean, factor precisions are the diagonal blocks of the exact
  // precision. The latter are assembled per latent, which keeps each factor's
  // covariance and sampling d-dimensional.
  const HyperPrecision hp = hyper_precision(spec, stats);
  Eigen::LLT<Mat> joint(hp.precision);
  if (joint.info() != Eigen::Success)
    throw NotPositiveDefinite("factored: hyper-posterior precision not positive definite");
  const Vec exact_mean = joint.solve(hp.shift);

  std::vector<Mat> weights(static_cast<std::size_t>(spec.K));
  for (Index i = 0; i < spec.K; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    weights[idx] = precision_weight(spec.sigma0[idx], stats.gram(i));
  }
  std::vector<Gaussian> factors;
  factors.reserve(static_cast<std::size_t>(spec.L));
  for (Index l = 0; l < spec.L; ++l) {
    const Mat prior_block = spec.sigma_psi.block(l * spec.d, l * spec.d, spec.d, spec.d);
    Mat precision = spd_inverse(prior_block, "factored: Sigma_psi_l not positive definite");
    for (Index i = 0; i < spec.K; ++i) {
      const double b_il = w->b(i, l);
      precision.noalias() += (b_il * b_il) * weights[static_cast<std::size_t>(i)];
    }
    Eigen::LLT<Mat> llt(symmetrized(precision));
    if (llt.info() != Eigen::Success)
      throw NotPositiveDefinite("factored: factor precision not positive definite");
    const Mat cov = llt.solve(Mat::Identity(spec.d, spec.d));
    factors.emplace_back(exact_mean.segment(l * spec.d, spec.d), cov, spec.jitter);
  }
  return factors;
}

Gaussian mab_hyper_posterior(const HierModelSpec& spec, const SufficientStats& stats) {
  if (spec.d != 1)
    throw DimensionMismatch("mab hyper-posterior: closed form requires d = 1");
  const auto* w = std::get_if<WeightsMixing>(&spec.mixing);
  if (w == nullptr)
    throw ValidationError("mab hyper-posterior requires weights mixing");
  const double noise_var = spec.sigma * spec.sigma;
  const Mat prior_prec = spd_inverse(spec.sigma_psi, "mab: Sigma_Psi not positive definite");
  Mat precision = prior_prec;
  Vec shift = prior_prec * spec.mu_psi;
  for (Index i = 0; i < spec.K; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const double pulls = static_cast<double>(stats.pulls(i));
    const double var0 = spec.sigma0[idx](0, 0);
    const double total_reward = stats.moment(i)(0) * noise_var;  // stats store B scaled by 1/sigma^2
    const Vec b_i = w->b.row(i).transpose();
    precision.noalias() += pulls / (pulls * var0 + noise_var) * b_i * b_i.transpose();
    shift.noalias() += total_reward / (pulls * var0 + noise_var) * b_i;
  }
  return gaussian_from_precision({symmetrized(precision), shift}, spec.jitter);
}

Mat stacked_mixing(const HierModelSpec& spec) {
  Mat gamma(spec.K * spec.d, spec.L * spec.d);
  for (Index i = 0; i < spec.K; ++i)
    gamma.middleRows(i * spec.d, spec.d) = mixing_row(spec, i);
  return gamma;
}

Gaussian joint_posterior_oracle(const HierModelSpec& spec,
                                const std::vector<HistoryRecord>& history) {
  const Index kd = spec.K * spec.d;
  const Mat gamma = stacked_mixing(spec);
  std::vector<Mat> sigma0_blocks = spec.sigma0;
  const Mat prior_cov =
      symmetrized(block_diag(sigma0_blocks) + gamma * spec.sigma_psi * gamma.transpose());
  const Vec prior_mean = gamma * spec.mu_psi;
  const Mat prior_prec = spd_inverse(prior_cov, "oracle: marginal prior not positive definite");

  const double inv_var = 1.0 / (spec.sigma * spec.sigma);
  Mat precision = prior_prec;
  Vec shift = prior_prec * prior_mean;
  for (const auto& rec : history) {
    if (rec.action < 0 || rec.action >= spec.K)
      throw DimensionMismatch("oracle: action index out of range");
    Vec design = Vec::Zero(kd);
    design.segment(rec.action * spec.d, spec.d) = rec.x;
    precision.noalias() += inv_var * design * design.transpose();
    shift.noalias() += inv_var * rec.y * design;
  }
  return gaussian_from_precision({symmetrized(precision), shift}, spec.jitter);
}

Gaussian decomposed_marginal_posterior(const HierModelSpec& spec,
                                       const SufficientStats& stats) {
  const Index kd = spec.K * spec.d;
  const Gaussian hyper = hyper_posterior(spec, stats);

  // Per-action conditional covariance SigmaTilde_i = (G_i + Lambda0_i)^-1 and
  // the stacked weight W = SigmaTilde Sigma0^-1 Gamma.
  Mat cov = Mat::Zero(kd, kd);
  Vec mean(kd);
  Mat weighted(kd, spec.L * spec.d);
  for (Index i = 0; i < spec.K; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const Mat lambda0 =
        spd_inverse(spec.sigma0[idx], "decomposed: Sigma0 not positive definite");
    const Mat cond_cov = spd_inverse(stats.gram(i) + lambda0,
                                     "decomposed: conditional precision not positive definite");
    const Mat row = mixing_row(spec, i);
    cov.block(i * spec.d, i * spec.d, spec.d, spec.d) = cond_cov;
    weighted.middleRows(i * spec.d, spec.d) = cond_cov * lambda0 * row;
    mean.segment(i * spec.d, spec.d) =
        cond_cov * (stats.moment(i) + lambda0 * row * hyper.mean());
  }
  cov.noalias() += weighted * hyper.cov() * weighted.transpose();
  return Gaussian(mean, symmetrized(cov), spec.jitter);
}

}  // namespace hierts
