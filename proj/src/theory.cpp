#include "hierts/theory.hpp"

#include "hierts/posterior.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

namespace hierts {

namespace {

double max_eigenvalue(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(symmetrized(m));
  return eig.eigenvalues().maxCoeff();
}

double min_eigenvalue(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(symmetrized(m));
  return eig.eigenvalues().minCoeff();
}

}  // namespace

void BoundInputs::validate() const {
  if (n < 1) throw ValidationError("bound inputs: horizon must be positive");
  if (!(delta > 0.0 && delta < 1.0))
    throw ValidationError("bound inputs: delta must lie in (0, 1)");
  if (K < 1 || L < 1 || d < 1) throw ValidationError("bound inputs: dims must be positive");
  if (sigma <= 0.0) throw ValidationError("bound inputs: sigma must be positive");
  if (lambda1_0 <= 0.0 || lambdad_0 <= 0.0 || lambda1_psi <= 0.0)
    throw ValidationError("bound inputs: spectral quantities must be positive");
  if (kappa_x <= 0.0) throw ValidationError("bound inputs: kappa_x must be positive");
}

BoundInputs bound_inputs_from_spec(const HierModelSpec& spec, const ContextSpec& ctx,
                                   Index n, double delta) {
  BoundInputs inputs;
  inputs.n = n;
  inputs.delta = delta;
  inputs.K = spec.K;
  inputs.L = spec.L;
  inputs.d = spec.d;
  inputs.sigma = spec.sigma;

  inputs.lambda1_0 = 0.0;
  inputs.lambdad_0 = std::numeric_limits<double>::infinity();
  for (const auto& block : spec.sigma0) {
    inputs.lambda1_0 = std::max(inputs.lambda1_0, max_eigenvalue(block));
    inputs.lambdad_0 = std::min(inputs.lambdad_0, min_eigenvalue(block));
  }
  inputs.lambda1_psi = max_eigenvalue(spec.sigma_psi);

  if (spec.has_weights()) {
    inputs.kappa_b = spec.weights().rowwise().squaredNorm().maxCoeff();
  } else {
    for (Index i = 0; i < spec.K; ++i) {
      const Mat row = mixing_row(spec, i);
      inputs.kappa_c1 = std::max(inputs.kappa_c1, max_eigenvalue(row.transpose() * row));
    }
    const Mat gamma = stacked_mixing(spec);
    inputs.kappa_c2 = max_eigenvalue(gamma * gamma.transpose());
  }

  inputs.kappa_x = std::visit(
      [](const auto& c) -> double {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, UniformCubeContext>) {
          if (!std::isfinite(c.low) || !std::isfinite(c.high))
            throw UnboundedContext("bound inputs: cube bounds must be finite");
          const double corner = std::max(std::abs(c.low), std::abs(c.high));
          return static_cast<double>(c.d) * corner * corner;
        }
        if constexpr (std::is_same_v<T, FixedPoolContext>) {
          if (c.vectors.empty()) throw EmptyPool("bound inputs: empty context pool");
          double best = 0.0;
          for (const auto& v : c.vectors) best = std::max(best, v.squaredNorm());
          if (!std::isfinite(best))
            throw UnboundedContext("bound inputs: pool vectors must be finite");
          return best;
        }
        if constexpr (std::is_same_v<T, ConstantContext>) {
          return 1.0;
        }
      },
      ctx);
  return inputs;
}

namespace {

RegretBoundTerms bound_with_constants(const BoundInputs& in, double c_psi,
                                      double latent_log_arg) {
  RegretBoundTerms terms;
  const double inv_noise = 1.0 / (in.sigma * in.sigma);
  const double kx_l10 = in.kappa_x * in.lambda1_0;
  terms.c1 = kx_l10 / std::log1p(inv_noise * kx_l10);
  terms.c_psi = c_psi;
  terms.c2 = c_psi * (1.0 + inv_noise * kx_l10) / std::log1p(inv_noise * c_psi);
  const double kd = static_cast<double>(in.K) * static_cast<double>(in.d);
  terms.r_action =
      kd * terms.c1 * std::log1p(static_cast<double>(in.n) * kx_l10 / (in.sigma * in.sigma * kd));
  terms.r_latent = static_cast<double>(in.L) * static_cast<double>(in.d) * terms.c2 *
                   std::log1p(latent_log_arg);
  terms.main_term = std::sqrt(2.0 * static_cast<double>(in.n) * std::log(1.0 / in.delta) *
                              (terms.r_action + terms.r_latent));
  terms.tail_term =
      std::sqrt(2.0 / std::numbers::pi * (in.lambda1_0 + c_psi) * in.kappa_x) *
      static_cast<double>(in.K) * static_cast<double>(in.n) * in.delta;
  terms.total = terms.main_term + terms.tail_term;
  return terms;
}

}  // namespace

RegretBoundTerms regret_bound(const BoundInputs& in) {
  in.validate();
  if (in.kappa_b <= 0.0)
    throw ValidationError("regret_bound: kappa_b required (weights mixing)");
  const double c_psi = static_cast<double>(in.K) * in.kappa_x * in.lambda1_0 * in.lambda1_0 *
                       in.lambda1_psi * in.kappa_b / (in.lambdad_0 * in.lambdad_0);
  const double latent_arg =
      static_cast<double>(in.K) * in.kappa_b * in.lambda1_psi / in.lambdad_0;
  return bound_with_constants(in, c_psi, latent_arg);
}

RegretBoundTerms regret_bound_mixed(const BoundInputs& in) {
  in.validate();
  if (in.kappa_c1 <= 0.0 || in.kappa_c2 <= 0.0)
    throw ValidationError("regret_bound_mixed: kappa_c1/kappa_c2 required (matrices mixing)");
  const double c_psi = in.kappa_x * in.kappa_c2 * in.lambda1_0 * in.lambda1_0 *
                       in.lambda1_psi / (in.lambdad_0 * in.lambdad_0);
  const double latent_arg =
      static_cast<double>(in.K) * in.kappa_c1 * in.lambda1_psi / in.lambdad_0;
  return bound_with_constants(in, c_psi, latent_arg);
}

SpectralReport spectral_checks(const HierModelSpec& spec) {
  if (!spec.has_weights())
    throw ValidationError("spectral_checks: weights mixing required");
  SpectralReport report;
  report.K = spec.K;
  report.kappa_b = spec.weights().rowwise().squaredNorm().maxCoeff();
  const Mat gamma = stacked_mixing(spec);
  const Mat d_gram = spec.weights() * spec.weights().transpose();  // (b_i^T b_j)
  report.lambda1_ggt = max_eigenvalue(gamma * gamma.transpose());
  report.lambda1_gtg = max_eigenvalue(gamma.transpose() * gamma);
  report.lambda1_d = max_eigenvalue(d_gram);
  return report;
}

}  // namespace hierts
