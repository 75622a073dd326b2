#include "hierts/ratings.hpp"

#include "hierts/rng.hpp"

#include <Eigen/Cholesky>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace hierts {

namespace {

bool parse_rating_line(const std::string& line, long long& user, long long& item,
                       double& rating) {
  // UserID::MovieID::Rating::Timestamp
  std::size_t pos = 0;
  auto next_field = [&](std::string& out) {
    const auto sep = line.find("::", pos);
    if (sep == std::string::npos) return false;
    out = line.substr(pos, sep - pos);
    pos = sep + 2;
    return true;
  };
  std::string user_s, item_s, rating_s;
  if (!next_field(user_s) || !next_field(item_s) || !next_field(rating_s)) return false;
  if (pos >= line.size()) return false;  // timestamp field must exist (ignored)

  auto to_ll = [](const std::string& s, long long& out) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
  };
  if (!to_ll(user_s, user) || !to_ll(item_s, item)) return false;
  try {
    std::size_t used = 0;
    rating = std::stod(rating_s, &used);
    if (used != rating_s.size()) return false;
  } catch (const std::exception&) {
    return false;
  }
  return user >= 0 && item >= 0 && std::isfinite(rating);
}

}  // namespace

RatingsDataset parse_ratings_text(const std::string& text) {
  RatingsDataset data;
  std::unordered_map<long long, Index> user_ids, item_ids;
  std::istringstream stream(text);
  std::string line;
  int line_number = 0;
  std::vector<std::tuple<long long, long long, double>> raw;
  while (std::getline(stream, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++line_number;
    long long user = 0, item = 0;
    double rating = 0.0;
    if (parse_rating_line(line, user, item, rating)) {
      raw.emplace_back(user, item, rating);
    } else {
      ++data.malformed_lines;
    }
  }
  data.total_lines = line_number;
  if (line_number > 0 &&
      static_cast<double>(data.malformed_lines) > 0.01 * static_cast<double>(line_number)) {
    throw FormatError(line_number, "ratings: more than 1% malformed lines (" +
                                       std::to_string(data.malformed_lines) + " of " +
                                       std::to_string(line_number) + ")");
  }
  for (const auto& [user, item, rating] : raw) {
    const auto u = user_ids.try_emplace(user, static_cast<Index>(user_ids.size()));
    const auto i = item_ids.try_emplace(item, static_cast<Index>(item_ids.size()));
    data.triples.push_back({u.first->second, i.first->second, rating});
  }
  data.num_users = static_cast<Index>(user_ids.size());
  data.num_items = static_cast<Index>(item_ids.size());
  return data;
}

RatingsDataset load_ratings(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open ratings file: " + path);
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return parse_ratings_text(buffer.str());
}

namespace {

double objective_value(const RatingsDataset& data, const Mat& users, const Mat& items,
                       double reg) {
  double value = 0.0;
  for (const auto& t : data.triples) {
    const double err = t.rating - users.row(t.user).dot(items.row(t.item));
    value += err * err;
  }
  value += reg * (users.squaredNorm() + items.squaredNorm());
  return value;
}

/// Ridge solve for every row of `solve_for`, holding `fixed` constant.
/// by_user selects whether rows index users (true) or items (false).
void half_sweep(const RatingsDataset& data, Mat& solve_for, const Mat& fixed, double reg,
                bool by_user) {
  const Index rank = solve_for.cols();
  const Index rows = solve_for.rows();
  std::vector<Mat> gram(static_cast<std::size_t>(rows), reg * Mat::Identity(rank, rank));
  std::vector<Vec> rhs(static_cast<std::size_t>(rows), Vec::Zero(rank));
  for (const auto& t : data.triples) {
    const Index row = by_user ? t.user : t.item;
    const Index other = by_user ? t.item : t.user;
    const Vec v = fixed.row(other).transpose();
    gram[static_cast<std::size_t>(row)].noalias() += v * v.transpose();
    rhs[static_cast<std::size_t>(row)].noalias() += t.rating * v;
  }
  for (Index row = 0; row < rows; ++row) {
    Eigen::LLT<Mat> llt(gram[static_cast<std::size_t>(row)]);
    if (llt.info() != Eigen::Success)
      throw NumericalFailure("factorize: ridge system not positive definite");
    solve_for.row(row) = llt.solve(rhs[static_cast<std::size_t>(row)]).transpose();
  }
}

}  // namespace

Factorization factorize(const RatingsDataset& data, Index rank, double reg, int sweeps) {
  if (data.empty()) throw DegenerateData("factorize: empty dataset");
  if (rank < 1) throw ValidationError("factorize: rank must be positive");
  if (reg <= 0.0) throw ValidationError("factorize: regularization must be positive");
  if (sweeps < 1) throw ValidationError("factorize: need at least one sweep");

  std::vector<int> item_counts(static_cast<std::size_t>(data.num_items), 0);
  std::vector<int> user_counts(static_cast<std::size_t>(data.num_users), 0);
  for (const auto& t : data.triples) {
    ++item_counts[static_cast<std::size_t>(t.item)];
    ++user_counts[static_cast<std::size_t>(t.user)];
  }
  for (int count : item_counts)
    if (count == 0) throw DegenerateData("factorize: item with zero ratings");
  for (int count : user_counts)
    if (count == 0) throw DegenerateData("factorize: user with zero ratings");

  Factorization result;
  // Deterministic init from a fixed stream: small values around the mean scale.
  Rng rng(0x414C53);  // "ALS"
  result.user_vectors = Mat(data.num_users, rank);
  result.item_vectors = Mat(data.num_items, rank);
  for (Index r = 0; r < data.num_users; ++r)
    for (Index c = 0; c < rank; ++c) result.user_vectors(r, c) = rng.uniform(0.1, 1.0);
  for (Index r = 0; r < data.num_items; ++r)
    for (Index c = 0; c < rank; ++c) result.item_vectors(r, c) = rng.uniform(0.1, 1.0);

  double previous = objective_value(data, result.user_vectors, result.item_vectors, reg);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    half_sweep(data, result.user_vectors, result.item_vectors, reg, true);
    half_sweep(data, result.item_vectors, result.user_vectors, reg, false);
    const double current =
        objective_value(data, result.user_vectors, result.item_vectors, reg);
    if (current > previous * (1.0 + 1e-9) + 1e-12)
      throw NumericalFailure("factorize: objective increased from " +
                             std::to_string(previous) + " to " + std::to_string(current));
    result.objective.push_back(current);
    previous = current;
  }
  return result;
}

double rmse(const RatingsDataset& data, const Mat& user_vectors, const Mat& item_vectors) {
  if (data.empty()) throw DegenerateData("rmse: empty dataset");
  double sum_sq = 0.0;
  for (const auto& t : data.triples) {
    const double err = t.rating - user_vectors.row(t.user).dot(item_vectors.row(t.item));
    sum_sq += err * err;
  }
  return std::sqrt(sum_sq / static_cast<double>(data.triples.size()));
}

}  // namespace hierts
