#pragma once

#include "hierts/gaussian.hpp"
#include "hierts/model.hpp"
#include "hierts/posterior.hpp"
#include "hierts/rng.hpp"

#include <vector>

namespace hierts::testutil {

inline Mat random_matrix(Index rows, Index cols, Rng& rng, double low = -1.0,
                         double high = 1.0) {
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(low, high);
  return m;
}

/// Random SPD matrix A A^T + eps I.
inline Mat random_spd(Index dim, Rng& rng, double eps = 0.5) {
  const Mat a = random_matrix(dim, dim, rng);
  return symmetrized(a * a.transpose()) + eps * Mat::Identity(dim, dim);
}

inline Vec random_vector(Index dim, Rng& rng, double low = -1.0, double high = 1.0) {
  Vec v(dim);
  for (Index i = 0; i < dim; ++i) v(i) = rng.uniform(low, high);
  return v;
}

/// Random weights-mixing model spec with fully random SPD covariances.
inline HierModelSpec random_weights_spec(Index L, Index K, Index d, Rng& rng) {
  HierModelSpec spec;
  spec.L = L;
  spec.K = K;
  spec.d = d;
  spec.mu_psi = random_vector(L * d, rng);
  spec.sigma_psi = random_spd(L * d, rng);
  spec.sigma0.reserve(static_cast<std::size_t>(K));
  for (Index i = 0; i < K; ++i) spec.sigma0.push_back(random_spd(d, rng));
  spec.mixing = WeightsMixing{random_matrix(K, L, rng)};
  spec.sigma = rng.uniform(0.5, 1.5);
  return spec;
}

/// The same spec with weights replaced by the equivalent C_{i,l} = b_{i,l} I_d blocks.
inline HierModelSpec to_matrices_variant(const HierModelSpec& spec) {
  HierModelSpec out = spec;
  const Mat& b = spec.weights();
  MatricesMixing mix;
  mix.C.resize(static_cast<std::size_t>(spec.K));
  for (Index i = 0; i < spec.K; ++i) {
    auto& row = mix.C[static_cast<std::size_t>(i)];
    row.reserve(static_cast<std::size_t>(spec.L));
    for (Index l = 0; l < spec.L; ++l)
      row.push_back(b(i, l) * Mat::Identity(spec.d, spec.d));
  }
  out.mixing = std::move(mix);
  return out;
}

/// Generative history: contexts uniform in [-1,1]^d, uniformly random actions,
/// rewards from the model.
inline std::vector<HistoryRecord> random_history(const HierModelSpec& spec, Index t, Rng& rng) {
  const EnvDraw env = sample_environment(spec, rng);
  std::vector<HistoryRecord> history;
  history.reserve(static_cast<std::size_t>(t));
  for (Index round = 1; round <= t; ++round) {
    HistoryRecord rec;
    rec.t = round;
    rec.x = random_vector(spec.d, rng);
    rec.action = static_cast<Index>(rng.uniform_index(static_cast<std::size_t>(spec.K)));
    rec.y = sample_reward(env.theta_star[static_cast<std::size_t>(rec.action)], rec.x,
                          spec.sigma, rng);
    history.push_back(std::move(rec));
  }
  return history;
}

}  // namespace hierts::testutil
