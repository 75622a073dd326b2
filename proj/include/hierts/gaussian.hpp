#pragma once

#include "hierts/common.hpp"
#include "hierts/rng.hpp"

#include <Eigen/Cholesky>

#include <utility>
#include <vector>

namespace hierts {

namespace detail {
/// Test instrumentation: when active, records the largest Gaussian dimension
/// constructed on the current thread.
struct GaussianDimTracker {
  static inline thread_local bool active = false;
  static inline thread_local Index max_dim = 0;
  static void note(Index dim) {
    if (active && dim > max_dim) max_dim = dim;
  }
};
}  // namespace detail

/// (M + M^T) / 2. Sums of Woodbury terms accumulate asymmetry at 1e-15 scale;
/// every computed covariance goes through this before factorization.
template <class Derived>
MatrixX<typename Derived::Scalar> symmetrized(const Eigen::MatrixBase<Derived>& m) {
  return (m + m.transpose()) * typename Derived::Scalar(0.5);
}

/// Lower-triangular L with L L^T = m. Throws NotPositiveDefinite when the
/// factorization fails, signalling a degenerate covariance.
template <class Derived>
MatrixX<typename Derived::Scalar> cholesky_lower(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Eigen::LLT<MatrixX<Scalar>> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("cholesky: matrix of dim " + std::to_string(m.rows()) +
                              " is not positive definite");
  }
  return llt.matrixL();
}

/// Kronecker product a (x) b.
template <class DerivedA, class DerivedB>
MatrixX<typename DerivedA::Scalar> kron(const Eigen::MatrixBase<DerivedA>& a,
                                        const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  MatrixX<Scalar> out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Block-diagonal assembly of square blocks.
template <class Scalar>
MatrixX<Scalar> block_diag(const std::vector<MatrixX<Scalar>>& blocks) {
  Index total = 0;
  for (const auto& block : blocks) {
    if (block.rows() != block.cols())
      throw DimensionMismatch("block_diag: blocks must be square");
    total += block.rows();
  }
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(total, total);
  Index offset = 0;
  for (const auto& block : blocks) {
    out.block(offset, offset, block.rows(), block.rows()) = block;
    offset += block.rows();
  }
  return out;
}

/// Symmetric positive definite matrix, validated at construction.
/// jitter_scale > 0 adds jitter_scale * (trace/dim) to the diagonal before
/// factorization (off by default; silent jitter masks bugs in posterior
/// algebra, so callers must opt in).
template <class Scalar>
class SpdMatrixT {
 public:
  explicit SpdMatrixT(MatrixX<Scalar> m, Scalar jitter_scale = Scalar(0))
      : m_(symmetrized(std::move(m))) {
    if (m_.rows() != m_.cols()) throw DimensionMismatch("SpdMatrix: matrix must be square");
    if (jitter_scale > Scalar(0) && m_.rows() > 0) {
      m_.diagonal().array() += jitter_scale * m_.trace() / Scalar(m_.rows());
    }
    chol_ = cholesky_lower(m_);
  }

  const MatrixX<Scalar>& matrix() const { return m_; }
  const MatrixX<Scalar>& chol() const { return chol_; }
  Index dim() const { return m_.rows(); }

  /// Solve m x = rhs through the cached factor.
  MatrixX<Scalar> solve(const MatrixX<Scalar>& rhs) const {
    MatrixX<Scalar> x = chol_.template triangularView<Eigen::Lower>().solve(rhs);
    chol_.template triangularView<Eigen::Lower>().transpose().solveInPlace(x);
    return x;
  }

  MatrixX<Scalar> inverse() const {
    return solve(MatrixX<Scalar>::Identity(dim(), dim()));
  }

 private:
  MatrixX<Scalar> m_;
  MatrixX<Scalar> chol_;
};

/// Multivariate Gaussian with cached Cholesky factor of the covariance.
/// Immutable after construction; safe to share across threads.
template <class Scalar>
class GaussianT {
 public:
  GaussianT(VectorX<Scalar> mean, MatrixX<Scalar> cov, Scalar jitter_scale = Scalar(0))
      : mean_(std::move(mean)), cov_(symmetrized(std::move(cov))) {
    if (cov_.rows() != cov_.cols() || cov_.rows() != mean_.size())
      throw DimensionMismatch("Gaussian: mean/cov dimensions disagree");
    if (jitter_scale > Scalar(0) && cov_.rows() > 0) {
      cov_.diagonal().array() += jitter_scale * cov_.trace() / Scalar(cov_.rows());
    }
    chol_ = cholesky_lower(cov_);
    detail::GaussianDimTracker::note(dim());
  }

  const VectorX<Scalar>& mean() const { return mean_; }
  const MatrixX<Scalar>& cov() const { return cov_; }
  const MatrixX<Scalar>& chol() const { return chol_; }
  Index dim() const { return mean_.size(); }

 private:
  VectorX<Scalar> mean_;
  MatrixX<Scalar> cov_;
  MatrixX<Scalar> chol_;
};

using SpdMatrix = SpdMatrixT<double>;
using Gaussian = GaussianT<double>;

/// mean + chol * z with z a vector of independent standard normals from rng.
template <class Scalar>
VectorX<Scalar> sample_gaussian(const GaussianT<Scalar>& dist, Rng& rng) {
  VectorX<Scalar> z(dist.dim());
  for (Index i = 0; i < z.size(); ++i) z(i) = static_cast<Scalar>(rng.normal());
  return dist.mean() + dist.chol().template triangularView<Eigen::Lower>() * z;
}

}  // namespace hierts
