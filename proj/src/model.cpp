#include "hierts/model.hpp"

#include <cmath>

namespace hierts {

namespace {

void check(bool ok, const char* msg) {
  if (!ok) throw ValidationError(msg);
}

}  // namespace

void HierModelSpec::validate() const {
  check(L >= 1 && K >= 1 && d >= 1, "model: L, K, d must be positive");
  check(mu_psi.size() == L * d, "model: mu_psi length must be L*d");
  check(sigma_psi.rows() == L * d && sigma_psi.cols() == L * d,
        "model: sigma_psi must be Ld x Ld");
  check(static_cast<Index>(sigma0.size()) == K, "model: need one sigma0 block per action");
  for (const auto& s : sigma0)
    check(s.rows() == d && s.cols() == d, "model: sigma0 blocks must be d x d");
  check(sigma > 0.0, "model: reward noise sigma must be positive");
  check(jitter >= 0.0, "model: jitter must be nonnegative");
  if (const auto* w = std::get_if<WeightsMixing>(&mixing)) {
    check(w->b.rows() == K && w->b.cols() == L, "model: weights must be K x L");
  } else {
    const auto& C = std::get<MatricesMixing>(mixing).C;
    check(static_cast<Index>(C.size()) == K, "model: mixing matrices need K rows");
    for (const auto& row : C) {
      check(static_cast<Index>(row.size()) == L, "model: mixing matrices need L columns");
      for (const auto& block : row)
        check(block.rows() == d && block.cols() == d, "model: mixing blocks must be d x d");
    }
  }
  // Positive definiteness; throws NotPositiveDefinite on failure.
  SpdMatrix psi_check(sigma_psi, jitter);
  for (const auto& s : sigma0) SpdMatrix s_check(s, jitter);
}

Index context_dim(const ContextSpec& ctx) {
  return std::visit(
      [](const auto& c) -> Index {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, UniformCubeContext>) return c.d;
        if constexpr (std::is_same_v<T, FixedPoolContext>)
          return c.vectors.empty() ? 0 : c.vectors.front().size();
        if constexpr (std::is_same_v<T, ConstantContext>) return 1;
      },
      ctx);
}

void validate(const ContextSpec& ctx) {
  if (const auto* cube = std::get_if<UniformCubeContext>(&ctx)) {
    check(cube->d >= 1, "context: cube dimension must be positive");
    check(std::isfinite(cube->low) && std::isfinite(cube->high),
          "context: cube bounds must be finite");
    check(cube->low < cube->high, "context: cube needs low < high");
  } else if (const auto* pool = std::get_if<FixedPoolContext>(&ctx)) {
    check(!pool->vectors.empty(), "context: pool must not be empty");
    const Index d = pool->vectors.front().size();
    for (const auto& v : pool->vectors)
      check(v.size() == d, "context: pool vectors must share one dimension");
  }
}

Mat mixing_row(const HierModelSpec& spec, Index i) {
  if (const auto* w = std::get_if<WeightsMixing>(&spec.mixing)) {
    return kron(w->b.row(i), Mat::Identity(spec.d, spec.d));
  }
  const auto& row = std::get<MatricesMixing>(spec.mixing).C.at(static_cast<std::size_t>(i));
  Mat out(spec.d, spec.L * spec.d);
  for (Index l = 0; l < spec.L; ++l)
    out.block(0, l * spec.d, spec.d, spec.d) = row[static_cast<std::size_t>(l)];
  return out;
}

EnvDraw sample_environment(const HierModelSpec& spec, Rng& rng) {
  EnvDraw draw;
  Gaussian hyper(spec.mu_psi, spec.sigma_psi, spec.jitter);
  draw.psi_star = sample_gaussian(hyper, rng);
  draw.theta_star.reserve(static_cast<std::size_t>(spec.K));
  for (Index i = 0; i < spec.K; ++i) {
    Gaussian cond(mixing_row(spec, i) * draw.psi_star,
                  spec.sigma0[static_cast<std::size_t>(i)], spec.jitter);
    draw.theta_star.push_back(sample_gaussian(cond, rng));
  }
  return draw;
}

Vec sample_context(const ContextSpec& ctx, Rng& rng) {
  return std::visit(
      [&rng](const auto& c) -> Vec {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, UniformCubeContext>) {
          Vec x(c.d);
          for (Index j = 0; j < c.d; ++j) x(j) = rng.uniform(c.low, c.high);
          return x;
        }
        if constexpr (std::is_same_v<T, FixedPoolContext>) {
          if (c.vectors.empty()) throw EmptyPool("sample_context: empty pool");
          return c.vectors[rng.uniform_index(c.vectors.size())];
        }
        if constexpr (std::is_same_v<T, ConstantContext>) {
          return Vec::Ones(1);
        }
      },
      ctx);
}

double sample_reward(const Vec& theta, const Vec& x, double sigma, Rng& rng) {
  if (theta.size() != x.size())
    throw DimensionMismatch("sample_reward: context/parameter dimensions differ");
  if (sigma <= 0.0) throw ValidationError("sample_reward: sigma must be positive");
  return x.dot(theta) + sigma * rng.normal();
}

BestAction best_action(const std::vector<Vec>& theta, const Vec& x) {
  if (theta.empty()) throw ValidationError("best_action: need at least one action");
  BestAction best{0, x.dot(theta.front())};
  for (Index i = 1; i < static_cast<Index>(theta.size()); ++i) {
    const double value = x.dot(theta[static_cast<std::size_t>(i)]);
    if (value > best.value) best = {i, value};
  }
  return best;
}

}  // namespace hierts
