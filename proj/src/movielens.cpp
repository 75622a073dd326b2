#include "hierts/movielens.hpp"

#include "hierts/emit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace hierts {

namespace {

Index nearest_centroid(const Mat& centroids, const Vec& point) {
  Index best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (Index c = 0; c < centroids.rows(); ++c) {
    const double dist = (centroids.row(c).transpose() - point).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = c;
    }
  }
  return best;
}

}  // namespace

KMeansResult kmeans(const Mat& points, Index k, Rng& rng, int max_iters, double tol) {
  const Index n = points.rows();
  const Index d = points.cols();
  if (k < 1 || k > n) throw ValidationError("kmeans: need 1 <= k <= number of points");

  KMeansResult result;
  result.centroids = Mat(k, d);
  result.assignment.assign(static_cast<std::size_t>(n), 0);

  // k-means++ seeding.
  result.centroids.row(0) = points.row(static_cast<Index>(rng.uniform_index(
      static_cast<std::size_t>(n))));
  std::vector<double> dist_sq(static_cast<std::size_t>(n), 0.0);
  for (Index c = 1; c < k; ++c) {
    double total = 0.0;
    for (Index p = 0; p < n; ++p) {
      double best = std::numeric_limits<double>::infinity();
      for (Index existing = 0; existing < c; ++existing)
        best = std::min(best, (points.row(p) - result.centroids.row(existing)).squaredNorm());
      dist_sq[static_cast<std::size_t>(p)] = best;
      total += best;
    }
    if (total <= 0.0) {
      // All remaining points coincide with chosen centroids; reuse any point.
      result.centroids.row(c) = points.row(static_cast<Index>(
          rng.uniform_index(static_cast<std::size_t>(n))));
      continue;
    }
    double target = rng.uniform01() * total;
    Index chosen = n - 1;
    for (Index p = 0; p < n; ++p) {
      target -= dist_sq[static_cast<std::size_t>(p)];
      if (target <= 0.0) {
        chosen = p;
        break;
      }
    }
    result.centroids.row(c) = points.row(chosen);
  }

  double previous = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iters; ++iter) {
    // Assignment step.
    for (Index p = 0; p < n; ++p)
      result.assignment[static_cast<std::size_t>(p)] =
          nearest_centroid(result.centroids, points.row(p).transpose());

    // Update step.
    Mat sums = Mat::Zero(k, d);
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index p = 0; p < n; ++p) {
      const Index c = result.assignment[static_cast<std::size_t>(p)];
      sums.row(c) += points.row(p);
      ++counts[static_cast<std::size_t>(c)];
    }
    for (Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        result.centroids.row(c) =
            sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      } else {
        // Empty cluster: reseed at the point farthest from its own centroid.
        Index farthest = 0;
        double worst = -1.0;
        for (Index p = 0; p < n; ++p) {
          const Index assigned = result.assignment[static_cast<std::size_t>(p)];
          const double dist = (points.row(p) - result.centroids.row(assigned)).squaredNorm();
          if (dist > worst) {
            worst = dist;
            farthest = p;
          }
        }
        result.centroids.row(c) = points.row(farthest);
        result.assignment[static_cast<std::size_t>(farthest)] = c;
      }
    }

    double objective = 0.0;
    for (Index p = 0; p < n; ++p)
      objective += (points.row(p) -
                    result.centroids.row(result.assignment[static_cast<std::size_t>(p)]))
                       .squaredNorm();
    result.objective.push_back(objective);
    if (previous < std::numeric_limits<double>::infinity() &&
        std::abs(previous - objective) <= tol * std::max(1.0, previous))
      break;
    previous = objective;
  }
  // Final assignment against the last centroid update.
  for (Index p = 0; p < n; ++p)
    result.assignment[static_cast<std::size_t>(p)] =
        nearest_centroid(result.centroids, points.row(p).transpose());
  return result;
}

MovieLensArtifacts build_movielens_artifacts(const Mat& item_vectors, const Mat& user_vectors,
                                             Index L, double scale_hyper, double scale_cond,
                                             std::uint64_t seed) {
  if (item_vectors.rows() < 1) throw DegenerateData("movielens: no item vectors");
  if (user_vectors.rows() < 1) throw DegenerateData("movielens: no user vectors");
  if (L > item_vectors.rows())
    throw ValidationError("movielens: L exceeds the number of items");
  if (user_vectors.cols() != item_vectors.cols())
    throw DimensionMismatch("movielens: user/item dimensions differ");

  MovieLensArtifacts artifacts;
  artifacts.item_vectors = item_vectors;
  artifacts.user_vectors = user_vectors;
  artifacts.scale_hyper = scale_hyper;
  artifacts.scale_cond = scale_cond;

  Rng rng(seed);
  const KMeansResult clusters = kmeans(item_vectors, L, rng);

  const Index n = item_vectors.rows();
  artifacts.weights = Mat(n, L);
  for (Index i = 0; i < n; ++i) {
    for (Index l = 0; l < L; ++l) {
      const double dist_sq = (item_vectors.row(i) - clusters.centroids.row(l)).squaredNorm();
      artifacts.weights(i, l) = std::exp(-dist_sq);
    }
    const double row_sum = artifacts.weights.row(i).sum();
    if (row_sum <= 0.0)
      throw NumericalFailure("movielens: weight row underflowed to zero");
    artifacts.weights.row(i) /= row_sum;
  }

  artifacts.mean = item_vectors.colwise().mean().transpose();
  const Index dim = item_vectors.cols();
  artifacts.variance = Vec(dim);
  for (Index c = 0; c < dim; ++c) {
    const double mu = artifacts.mean(c);
    double acc = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double centered = item_vectors(i, c) - mu;
      acc += centered * centered;
    }
    artifacts.variance(c) = acc / static_cast<double>(n);
    if (artifacts.variance(c) <= 0.0)
      throw DegenerateData("movielens: item vectors have zero variance in a dimension");
  }
  return artifacts;
}

std::pair<HierModelSpec, ContextSpec> movielens_env(const MovieLensArtifacts& artifacts,
                                                    Index K, Rng& rng, double jitter) {
  const Index n = artifacts.item_vectors.rows();
  if (K < 1 || K > n) throw ValidationError("movielens: need 1 <= K <= number of items");
  // Sample K distinct items (partial Fisher-Yates on an index array).
  std::vector<Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index j = 0; j < K; ++j) {
    const std::size_t pick = static_cast<std::size_t>(j) +
                             rng.uniform_index(static_cast<std::size_t>(n - j));
    std::swap(pool[static_cast<std::size_t>(j)], pool[pick]);
  }

  const Index L = artifacts.L();
  const Index d = artifacts.d();
  HierModelSpec spec;
  spec.L = L;
  spec.K = K;
  spec.d = d;
  spec.jitter = jitter;
  spec.sigma = 1.0;
  spec.mu_psi = Vec(L * d);
  for (Index l = 0; l < L; ++l) spec.mu_psi.segment(l * d, d) = artifacts.mean;
  const Mat hyper_block = artifacts.scale_hyper * artifacts.variance.asDiagonal();
  std::vector<Mat> blocks(static_cast<std::size_t>(L), hyper_block);
  spec.sigma_psi = block_diag(blocks);
  spec.sigma0.assign(static_cast<std::size_t>(K),
                     Mat(artifacts.scale_cond * artifacts.variance.asDiagonal()));
  Mat b(K, L);
  for (Index j = 0; j < K; ++j) b.row(j) = artifacts.weights.row(pool[static_cast<std::size_t>(j)]);
  spec.mixing = WeightsMixing{std::move(b)};

  FixedPoolContext pool_ctx;
  pool_ctx.vectors.reserve(static_cast<std::size_t>(artifacts.user_vectors.rows()));
  for (Index u = 0; u < artifacts.user_vectors.rows(); ++u)
    pool_ctx.vectors.push_back(artifacts.user_vectors.row(u).transpose());
  return {std::move(spec), ContextSpec{std::move(pool_ctx)}};
}

std::pair<HierModelSpec, ContextSpec> build_movielens_model(
    const Mat& item_vectors, const Mat& user_vectors, Index L, double scale_hyper,
    double scale_cond, Index K, std::uint64_t seed) {
  const MovieLensArtifacts artifacts =
      build_movielens_artifacts(item_vectors, user_vectors, L, scale_hyper, scale_cond, seed);
  Rng rng(splitmix64(seed ^ 0x4D4F5649ULL));  // distinct stream for the subset draw
  return movielens_env(artifacts, K, rng);
}

namespace {

void write_row(std::ostream& out, const char* tag, const Eigen::Ref<const Vec>& values) {
  out << tag;
  for (Index c = 0; c < values.size(); ++c) out << ' ' << format_double(values(c));
  out << '\n';
}

}  // namespace

void save_artifacts(const MovieLensArtifacts& artifacts, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model file: " + path);
  out << "hierts-model 1\n";
  out << "d " << artifacts.d() << "\n";
  out << "L " << artifacts.L() << "\n";
  out << "items " << artifacts.item_vectors.rows() << "\n";
  out << "users " << artifacts.user_vectors.rows() << "\n";
  out << "scale_hyper " << format_double(artifacts.scale_hyper) << "\n";
  out << "scale_cond " << format_double(artifacts.scale_cond) << "\n";
  write_row(out, "mean", artifacts.mean);
  write_row(out, "variance", artifacts.variance);
  for (Index i = 0; i < artifacts.item_vectors.rows(); ++i) {
    out << "item";
    for (Index c = 0; c < artifacts.d(); ++c)
      out << ' ' << format_double(artifacts.item_vectors(i, c));
    for (Index l = 0; l < artifacts.L(); ++l)
      out << ' ' << format_double(artifacts.weights(i, l));
    out << '\n';
  }
  for (Index u = 0; u < artifacts.user_vectors.rows(); ++u) {
    out << "user";
    for (Index c = 0; c < artifacts.d(); ++c)
      out << ' ' << format_double(artifacts.user_vectors(u, c));
    out << '\n';
  }
  if (!out) throw IoError("failed while writing model file: " + path);
}

MovieLensArtifacts load_artifacts(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file: " + path);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "hierts-model" || version != 1)
    throw FormatError(1, "model file: bad header in " + path);

  MovieLensArtifacts artifacts;
  Index d = 0, L = 0, items = 0, users = 0;
  std::string tag;
  in >> tag >> d;
  if (tag != "d") throw FormatError(2, "model file: expected 'd'");
  in >> tag >> L;
  if (tag != "L") throw FormatError(3, "model file: expected 'L'");
  in >> tag >> items;
  if (tag != "items") throw FormatError(4, "model file: expected 'items'");
  in >> tag >> users;
  if (tag != "users") throw FormatError(5, "model file: expected 'users'");
  in >> tag >> artifacts.scale_hyper;
  if (tag != "scale_hyper") throw FormatError(6, "model file: expected 'scale_hyper'");
  in >> tag >> artifacts.scale_cond;
  if (tag != "scale_cond") throw FormatError(7, "model file: expected 'scale_cond'");

  artifacts.mean = Vec(d);
  in >> tag;
  if (tag != "mean") throw FormatError(8, "model file: expected 'mean'");
  for (Index c = 0; c < d; ++c) in >> artifacts.mean(c);
  artifacts.variance = Vec(d);
  in >> tag;
  if (tag != "variance") throw FormatError(9, "model file: expected 'variance'");
  for (Index c = 0; c < d; ++c) in >> artifacts.variance(c);

  artifacts.item_vectors = Mat(items, d);
  artifacts.weights = Mat(items, L);
  for (Index i = 0; i < items; ++i) {
    in >> tag;
    if (tag != "item") throw FormatError(10, "model file: expected 'item' row");
    for (Index c = 0; c < d; ++c) in >> artifacts.item_vectors(i, c);
    for (Index l = 0; l < L; ++l) in >> artifacts.weights(i, l);
  }
  artifacts.user_vectors = Mat(users, d);
  for (Index u = 0; u < users; ++u) {
    in >> tag;
    if (tag != "user") throw FormatError(11, "model file: expected 'user' row");
    for (Index c = 0; c < d; ++c) in >> artifacts.user_vectors(u, c);
  }
  if (!in) throw FormatError(12, "model file: truncated " + path);
  return artifacts;
}

}  // namespace hierts
