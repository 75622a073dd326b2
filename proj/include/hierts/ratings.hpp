#pragma once

#include "hierts/common.hpp"

#include <string>
#include <vector>

namespace hierts {

/// Ratings triples with user/item ids densely reindexed to [0, n).
struct RatingsDataset {
  struct Triple {
    Index user = 0;
    Index item = 0;
    double rating = 0.0;
  };
  std::vector<Triple> triples;
  Index num_users = 0;
  Index num_items = 0;
  int malformed_lines = 0;
  int total_lines = 0;

  bool empty() const { return triples.empty(); }
};

/// Parses `UserID::MovieID::Rating::Timestamp` lines (timestamp ignored).
/// Malformed lines are counted and tolerated up to 1% of the file; beyond
/// that the load aborts with FormatError.
RatingsDataset load_ratings(const std::string& path);
RatingsDataset parse_ratings_text(const std::string& text);

/// Alternating ridge regression on the observed entries:
/// min sum_(u,i) (r_ui - x_u^T y_i)^2 + reg (sum ||x_u||^2 + sum ||y_i||^2).
/// The objective is exactly minimized per coordinate block, so it never
/// increases across half-sweeps; a violation beyond rounding slack raises
/// NumericalFailure.
struct Factorization {
  Mat user_vectors;  // num_users x rank
  Mat item_vectors;  // num_items x rank
  std::vector<double> objective;  // value after each full sweep
};

Factorization factorize(const RatingsDataset& data, Index rank, double reg, int sweeps);

double rmse(const RatingsDataset& data, const Mat& user_vectors, const Mat& item_vectors);

}  // namespace hierts
