#pragma once

#include "hierts/model.hpp"

#include <string>
#include <utility>
#include <vector>

namespace hierts {

/// Lloyd's algorithm with k-means++ seeding. Points are rows. An emptied
/// cluster is reseeded at the point farthest from its centroid set.
struct KMeansResult {
  Mat centroids;                  // k x d
  std::vector<Index> assignment;  // per point
  std::vector<double> objective;  // sum of squared distances after each iteration
};

KMeansResult kmeans(const Mat& points, Index k, Rng& rng, int max_iters = 100,
                    double tol = 1e-8);

/// Item/user embeddings plus the derived mixing weights and moment scalars.
/// weights(i, l) = exp(-||x_i - c_l||^2), row-normalized to sum to one.
struct MovieLensArtifacts {
  Mat item_vectors;  // n_items x d
  Mat user_vectors;  // n_users x d
  Mat weights;       // n_items x L
  Vec mean;          // per-dimension mean of the item vectors
  Vec variance;      // per-dimension variance of the item vectors
  double scale_hyper = 0.75;
  double scale_cond = 0.25;

  Index d() const { return item_vectors.cols(); }
  Index L() const { return weights.cols(); }
};

MovieLensArtifacts build_movielens_artifacts(const Mat& item_vectors, const Mat& user_vectors,
                                             Index L, double scale_hyper, double scale_cond,
                                             std::uint64_t seed);

/// Environment for one run: K items sampled without replacement become the
/// actions; contexts are drawn from the user-vector pool; theta* is resampled
/// from the hierarchical model, not fixed at the item embeddings.
std::pair<HierModelSpec, ContextSpec> movielens_env(const MovieLensArtifacts& artifacts,
                                                    Index K, Rng& rng, double jitter = 0.0);

/// Convenience wrapper: clustering plus one sampled environment.
std::pair<HierModelSpec, ContextSpec> build_movielens_model(
    const Mat& item_vectors, const Mat& user_vectors, Index L, double scale_hyper,
    double scale_cond, Index K, std::uint64_t seed);

void save_artifacts(const MovieLensArtifacts& artifacts, const std::string& path);
MovieLensArtifacts load_artifacts(const std::string& path);

}  // namespace hierts
