#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hierts {

using Index = Eigen::Index;

template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Mat = MatrixX<double>;
using Vec = VectorX<double>;

/// Base class of all errors thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A covariance (or other symmetric matrix) failed its Cholesky factorization.
struct NotPositiveDefinite : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

/// Sampling from an empty fixed context pool.
struct EmptyPool : Error {
  using Error::Error;
};

/// The factored hyper-posterior was requested with a hyper-prior that couples latents.
struct NonBlockDiagonalHyperPrior : Error {
  using Error::Error;
};

/// A context specification without a finite norm bound was passed to the bound calculator.
struct UnboundedContext : Error {
  using Error::Error;
};

struct ParseError : Error {
  ParseError(int line_number, std::string offending_key, const std::string& what)
      : Error(what), line(line_number), key(std::move(offending_key)) {}
  int line;
  std::string key;
};

struct ValidationError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct FormatError : Error {
  FormatError(int line_number, const std::string& what) : Error(what), line(line_number) {}
  int line;
};

struct DegenerateData : Error {
  using Error::Error;
};

/// Numerical invariant violated at runtime (e.g. a provably monotone objective increased).
struct NumericalFailure : Error {
  using Error::Error;
};

}  // namespace hierts
