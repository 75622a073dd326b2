#pragma once

#include "hierts/model.hpp"

namespace hierts {

/// Spectral and structural constants feeding the regret bounds.
struct BoundInputs {
  Index n = 0;
  double delta = 0.0;
  Index K = 0, L = 0, d = 0;
  double sigma = 1.0;
  double lambda1_0 = 0.0;    // max_i lambda_1(Sigma_{0,i})
  double lambdad_0 = 0.0;    // min_i lambda_d(Sigma_{0,i})
  double lambda1_psi = 0.0;  // lambda_1(Sigma_Psi)
  double kappa_b = 0.0;      // max_i ||b_i||^2 (weights mixing)
  double kappa_x = 0.0;      // bound on max_t ||X_t||^2
  double kappa_c1 = 0.0;     // max_i lambda_1(C_i^T C_i) (matrices mixing)
  double kappa_c2 = 0.0;     // lambda_1(C C^T)           (matrices mixing)

  void validate() const;
};

/// Derives the inputs from a concrete spec and a bounded context spec.
/// kappa_x is the analytic supremum of the context norm, not a realized max.
BoundInputs bound_inputs_from_spec(const HierModelSpec& spec, const ContextSpec& ctx,
                                   Index n, double delta);

/// Full breakdown of the two-term Bayes-regret bound.
struct RegretBoundTerms {
  double c1 = 0.0;
  double c_psi = 0.0;
  double c2 = 0.0;
  double r_action = 0.0;
  double r_latent = 0.0;
  double main_term = 0.0;  // sqrt(2 n log(1/delta) (r_action + r_latent))
  double tail_term = 0.0;  // sqrt(2/pi (lambda1_0 + c_psi) kappa_x) K n delta
  double total = 0.0;
};

/// Scalar-weights bound.
RegretBoundTerms regret_bound(const BoundInputs& inputs);

/// Mixed-linear (matrices mixing) bound; uses kappa_c1 / kappa_c2.
RegretBoundTerms regret_bound_mixed(const BoundInputs& inputs);

/// Eigenvalue identities behind the latent term: lambda_1(Gamma Gamma^T) equals
/// lambda_1 of the K x K Gram matrix D = (b_i^T b_j) and both lambda_1(Gamma Gamma^T)
/// and lambda_1(Gamma^T Gamma) are at most K kappa_b.
struct SpectralReport {
  double lambda1_ggt = 0.0;
  double lambda1_d = 0.0;
  double lambda1_gtg = 0.0;
  double kappa_b = 0.0;
  Index K = 0;
  bool identity_holds(double tol = 1e-10) const {
    return std::abs(lambda1_ggt - lambda1_d) <= tol * std::max(1.0, lambda1_d);
  }
  bool gershgorin_holds() const {
    const double cap = static_cast<double>(K) * kappa_b;
    return lambda1_ggt <= cap + 1e-10 && lambda1_gtg <= cap + 1e-10;
  }
};

SpectralReport spectral_checks(const HierModelSpec& spec);

}  // namespace hierts
