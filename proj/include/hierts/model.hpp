#pragma once

#include "hierts/gaussian.hpp"

#include <variant>
#include <vector>

namespace hierts {

/// Per-action scalar mixing weights: row i holds b_i in R^L. Zero entries
/// encode sparsity.
struct WeightsMixing {
  Mat b;  // K x L
};

/// Mixed-linear mixing: C[i][l] is the d x d matrix linking latent l to
/// action i. WeightsMixing with weight w is the special case C = w * I_d.
struct MatricesMixing {
  std::vector<std::vector<Mat>> C;  // K rows of L blocks, each d x d
};

using MixingStructure = std::variant<WeightsMixing, MatricesMixing>;

/// Full generative specification of a hierarchical environment:
/// Psi* ~ N(mu_psi, sigma_psi), theta*_i | Psi* ~ N(mixing_row(i) Psi*, sigma0[i]),
/// Y | x, theta ~ N(x^T theta, sigma^2).
struct HierModelSpec {
  Index L = 0;
  Index K = 0;
  Index d = 0;
  Vec mu_psi;               // length L*d
  Mat sigma_psi;            // Ld x Ld, SPD
  std::vector<Mat> sigma0;  // K conditional covariances, each d x d, SPD
  MixingStructure mixing;
  double sigma = 1.0;   // reward noise
  double jitter = 0.0;  // optional relative diagonal regularization, default off

  bool has_weights() const { return std::holds_alternative<WeightsMixing>(mixing); }
  const Mat& weights() const { return std::get<WeightsMixing>(mixing).b; }

  /// Checks mutual dimension consistency and positive definiteness.
  void validate() const;
};

struct UniformCubeContext {
  Index d = 0;
  double low = -1.0;
  double high = 1.0;
};

struct FixedPoolContext {
  std::vector<Vec> vectors;
};

/// Non-contextual reduction: X_t = 1, d = 1.
struct ConstantContext {};

using ContextSpec = std::variant<UniformCubeContext, FixedPoolContext, ConstantContext>;

Index context_dim(const ContextSpec& ctx);
void validate(const ContextSpec& ctx);

/// One draw of the environment's unknowns.
struct EnvDraw {
  Vec psi_star;                // length L*d
  std::vector<Vec> theta_star;  // K vectors of length d
};

/// The d x Ld map sending Psi to action i's conditional prior mean:
/// kron(b_i^T, I_d) for weights, [C_{i,1} ... C_{i,L}] for matrices.
Mat mixing_row(const HierModelSpec& spec, Index i);

/// Hierarchical forward sampling of (Psi*, Theta*). Deterministic given the
/// rng state; Weights and equivalent Matrices specs consume the stream
/// identically and yield the same draw.
EnvDraw sample_environment(const HierModelSpec& spec, Rng& rng);

Vec sample_context(const ContextSpec& ctx, Rng& rng);

double sample_reward(const Vec& theta, const Vec& x, double sigma, Rng& rng);

struct BestAction {
  Index index = 0;  // 0-based; user-facing I/O adds 1 to match [K] notation
  double value = 0.0;
};

/// argmax_i x^T theta_i, ties broken by lowest index.
BestAction best_action(const std::vector<Vec>& theta, const Vec& x);

}  // namespace hierts
