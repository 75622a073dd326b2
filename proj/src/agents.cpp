#include "hierts/agents.hpp"

#include "hierts/detail/small_spd.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace hierts {

namespace detail {

namespace {

Mat spd_inverse_of(const Mat& m, const char* what) {
  Eigen::LLT<Mat> llt(symmetrized(m));
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite(what);
  return llt.solve(Mat::Identity(m.rows(), m.cols()));
}

Vec standard_normals(Index n, Rng& rng) {
  Vec z(n);
  for (Index i = 0; i < n; ++i) z(i) = rng.normal();
  return z;
}

}  // namespace

HierCache::HierCache(const HierModelSpec& spec)
    : L_(spec.L), K_(spec.K), d_(spec.d), jitter_(spec.jitter) {
  prior_prec_ = spd_inverse_of(spec.sigma_psi, "agent: Sigma_Psi not positive definite");
  prior_shift_ = prior_prec_ * spec.mu_psi;
  const auto k = static_cast<std::size_t>(K_);
  if (spec.has_weights()) {
    b_ = spec.weights();
    b2_ = Mat(K_, L_ * L_);
    for (Index l = 0; l < L_; ++l)
      for (Index m = 0; m < L_; ++m)
        b2_.col(l * L_ + m) = b_.col(l).cwiseProduct(b_.col(m));
    bT_ = b_.transpose();
    wflatT_ = Mat::Zero(d_ * d_, K_);
    mflatT_ = Mat::Zero(d_, K_);
    cond_base_.assign(k, Mat());
    wsum_scratch_ = Mat(d_, K_);
    contrib_scratch_ = Mat(d_ * d_, L_ * L_);
    shift_rows_scratch_ = Mat(L_, d_);
    contrib_sum_ = Mat::Zero(d_ * d_, L_ * L_);
    shift_sum_ = Vec::Zero(L_ * d_);
    delta_w_ = Vec(d_ * d_);
    delta_m_ = Vec(d_);
  } else {
    rows_.reserve(k);
    for (Index i = 0; i < K_; ++i) rows_.push_back(mixing_row(spec, i));
    cond_map_.assign(k, Mat());
    weight_.assign(k, Mat());
    mle_.assign(k, Vec());
  }
  lambda0_.reserve(k);
  for (Index i = 0; i < K_; ++i)
    lambda0_.push_back(spd_inverse_of(spec.sigma0[static_cast<std::size_t>(i)],
                                      "agent: Sigma0 not positive definite"));
  cond_sampler_.assign(k, Mat());
  cond_data_.assign(k, Vec());
  stale_.assign(k, true);
  precision_ = Mat(L_ * d_, L_ * d_);
  joint_chol_ = Mat(L_ * d_, L_ * d_);
  work_dd_ = Mat(d_, d_);
  v_lambda0_ = Mat(d_, d_);
  weight_scratch_ = Mat(d_, d_);
  mle_scratch_ = Vec(d_);
  shift_scratch_ = Vec(L_ * d_);
  z_scratch_ = Vec(d_);
}

void HierCache::refresh_action(Index i, const SufficientStats& stats) {
  const auto idx = static_cast<std::size_t>(i);
  const Mat& lambda0 = lambda0_[idx];
  work_dd_ = lambda0;
  work_dd_ += stats.gram(i);
  if (!cholesky_in_place(work_dd_.data(), d_))
    throw NotPositiveDefinite("agent: conditional precision not positive definite");
  // V Lambda0 and V B feed the sampling map, the data shift, and the Woodbury
  // terms weight = Lambda0 - Lambda0 V Lambda0, mle = Lambda0 V B.
  v_lambda0_ = lambda0;
  for (Index c = 0; c < d_; ++c) spd_solve(work_dd_.data(), d_, v_lambda0_.col(c).data());
  cond_data_[idx] = stats.moment(i);
  spd_solve(work_dd_.data(), d_, cond_data_[idx].data());
  // weight = Lambda0 - Lambda0 (V Lambda0), mle = Lambda0 (V B), raw loops.
  {
    const double* l0 = lambda0.data();
    const double* vl = v_lambda0_.data();
    double* w = weight_scratch_.data();
    for (Index col = 0; col < d_; ++col)
      matvec(l0, d_, d_, vl + col * d_, w + col * d_);
    const Index dd = d_ * d_;
    for (Index r = 0; r < dd; ++r) w[r] = l0[r] - w[r];
    matvec(l0, d_, d_, cond_data_[idx].data(), mle_scratch_.data());
  }
  if (jitter_ > 0.0) {
    // Rescue path: factor the jittered covariance explicitly.
    Mat cond_cov = Mat::Identity(d_, d_);
    for (Index c = 0; c < d_; ++c) spd_solve(work_dd_.data(), d_, cond_cov.col(c).data());
    cond_cov.diagonal().array() += jitter_ * cond_cov.trace() / double(d_);
    Eigen::LLT<Mat> cov_llt(symmetrized(cond_cov));
    if (cov_llt.info() != Eigen::Success)
      throw NotPositiveDefinite("agent: conditional covariance not positive definite");
    cond_sampler_[idx] = cov_llt.matrixL();
    cond_data_[idx] = cond_cov * stats.moment(i);
    if (b_.size() > 0) cond_base_[idx] = cond_cov * lambda0;
    else cond_map_[idx] = cond_cov * lambda0 * rows_[idx];
  } else {
    // S = L^-T satisfies S S^T = (L L^T)^-1, so sampling is a plain multiply.
    cond_sampler_[idx].setIdentity(d_, d_);
    for (Index c = 0; c < d_; ++c)
      backward_solve(work_dd_.data(), d_, cond_sampler_[idx].col(c).data());
    if (b_.size() > 0) cond_base_[idx] = v_lambda0_;
    else cond_map_[idx] = v_lambda0_ * rows_[idx];
  }
  if (b_.size() > 0) {
    // Rank-1 update of the contribution sums; caches are column-contiguous.
    const Index dd = d_ * d_;
    double* wcol = wflatT_.data() + i * dd;
    double* mcol = mflatT_.data() + i * d_;
    const double* wnew = weight_scratch_.data();
    const double* mnew = mle_scratch_.data();
    double* dw = delta_w_.data();
    double* dm = delta_m_.data();
    for (Index r = 0; r < dd; ++r) {
      dw[r] = wnew[r] - wcol[r];
      wcol[r] = wnew[r];
    }
    for (Index r = 0; r < d_; ++r) {
      dm[r] = mnew[r] - mcol[r];
      mcol[r] = mnew[r];
    }
    const double* b2row = b2_.data() + i;  // stride K_ across columns
    double* sums = contrib_sum_.data();
    for (Index j = 0; j < L_ * L_; ++j) {
      const double coef = b2row[j * K_];
      double* out = sums + j * dd;
      for (Index r = 0; r < dd; ++r) out[r] += coef * dw[r];
    }
    const double* brow = bT_.data() + i * L_;  // column i of b^T, contiguous
    double* shift_p = shift_sum_.data();
    for (Index l = 0; l < L_; ++l) {
      const double coef = brow[l];
      double* seg = shift_p + l * d_;
      for (Index r = 0; r < d_; ++r) seg[r] += coef * dm[r];
    }
    ++updates_since_rebuild_;
  } else {
    weight_[idx] = weight_scratch_;
    mle_[idx] = mle_scratch_;
  }
}

void HierCache::assemble() {
  shift_scratch_ = prior_shift_;
  Vec& shift = shift_scratch_;
  precision_ = prior_prec_;
  if (b_.size() > 0) {
    // Exact rebuild of the incremental sums at a fixed cadence keeps the
    // accumulated float drift below ~1e-13 relative.
    if (updates_since_rebuild_ >= 512) {
      contrib_sum_.noalias() = wflatT_ * b2_;  // d^2 x L^2
      shift_sum_.setZero();
      for (Index i = 0; i < K_; ++i) {
        const double* brow = bT_.data() + i * L_;
        const double* mcol = mflatT_.data() + i * d_;
        double* shift_p = shift_sum_.data();
        for (Index l = 0; l < L_; ++l)
          for (Index r = 0; r < d_; ++r) shift_p[l * d_ + r] += brow[l] * mcol[r];
      }
      updates_since_rebuild_ = 0;
    }
    const Index dd = d_ * d_;
    const Index ld = L_ * d_;
    const double* src = contrib_sum_.data();
    double* dst = precision_.data();
    for (Index l = 0; l < L_; ++l)
      for (Index m = 0; m < L_; ++m) {
        const double* block = src + (l * L_ + m) * dd;
        for (Index c = 0; c < d_; ++c) {
          double* column = dst + (m * d_ + c) * ld + l * d_;
          for (Index r = 0; r < d_; ++r) column[r] += block[c * d_ + r];
        }
      }
    shift += shift_sum_;
  } else {
    for (Index i = 0; i < K_; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      precision_.noalias() += rows_[idx].transpose() * weight_[idx] * rows_[idx];
      shift.noalias() += rows_[idx].transpose() * mle_[idx];
    }
  }
  if (jitter_ > 0.0)
    precision_.diagonal().array() += jitter_ * precision_.trace() / double(L_ * d_);
  // The factorization reads the lower triangle only; the assembly's fp
  // asymmetry is 1e-16.
  joint_chol_ = precision_;
  if (!cholesky_in_place(joint_chol_.data(), L_ * d_))
    throw NotPositiveDefinite("agent: hyper precision not positive definite");
  mean_ = shift;
  spd_solve(joint_chol_.data(), L_ * d_, mean_.data());
  factors_ready_ = false;
  assembled_ = true;
}

void HierCache::refresh(const SufficientStats& stats) {
  bool any_stale = false;
  for (Index i = 0; i < K_; ++i) {
    if (!stale_[static_cast<std::size_t>(i)]) continue;
    any_stale = true;
    refresh_action(i, stats);
    stale_[static_cast<std::size_t>(i)] = false;
  }
  if (any_stale || !assembled_) assemble();
}

void HierCache::prepare_factored() {
  if (factors_ready_) return;
  factor_chols_.resize(static_cast<std::size_t>(L_));
  for (Index l = 0; l < L_; ++l) {
    Mat& factor = factor_chols_[static_cast<std::size_t>(l)];
    factor = precision_.block(l * d_, l * d_, d_, d_);
    if (!cholesky_in_place(factor.data(), d_))
      throw NotPositiveDefinite("agent: factor precision not positive definite");
  }
  factors_ready_ = true;
}

Vec HierCache::sample_joint(Rng& rng) {
  // Psi = mean + L^-T z has covariance (L L^T)^-1 = precision^-1.
  Vec z = standard_normals(L_ * d_, rng);
  backward_solve(joint_chol_.data(), L_ * d_, z.data());
  z += mean_;
  return z;
}

Vec HierCache::sample_factored(Rng& rng) {
  Vec psi(L_ * d_);
  for (Index l = 0; l < L_; ++l) {
    for (Index r = 0; r < d_; ++r) z_scratch_(r) = rng.normal();
    backward_solve(factor_chols_[static_cast<std::size_t>(l)].data(), d_, z_scratch_.data());
    psi.segment(l * d_, d_) = mean_.segment(l * d_, d_) + z_scratch_;
  }
  return psi;
}

void HierCache::begin_conditionals(const Vec& psi) {
  if (b_.size() > 0) {
    // Weighted latent sums for every action at once:
    // column i of wsum = sum_l b_il psi_l = (Psi as d x L) b_i.
    const Eigen::Map<const Mat> psi_mat(psi.data(), d_, L_);
    wsum_scratch_.noalias() = psi_mat.lazyProduct(bT_);
  } else {
    psi_scratch_ = psi;
  }
}

Vec HierCache::sample_conditional(Index i, Rng& rng) {
  const auto idx = static_cast<std::size_t>(i);
  Vec theta = cond_data_[idx];
  if (b_.size() > 0) {
    matvec_add(cond_base_[idx].data(), d_, d_, wsum_scratch_.col(i).data(), theta.data());
  } else {
    theta.noalias() += cond_map_[idx] * psi_scratch_;
  }
  for (Index r = 0; r < d_; ++r) z_scratch_(r) = rng.normal();
  matvec_add(cond_sampler_[idx].data(), d_, d_, z_scratch_.data(), theta.data());
  return theta;
}

}  // namespace detail

GHierTSAgent::GHierTSAgent(HierModelSpec spec) : Agent(std::move(spec)), cache_(spec_) {}

ActResult GHierTSAgent::act(const Vec& x, Rng& rng) {
  if (dirty_) {
    cache_.refresh(stats_);
    dirty_ = false;
  }
  const Vec psi = cache_.sample_joint(rng);
  cache_.begin_conditionals(psi);
  ActResult result;
  result.sampled_theta.reserve(static_cast<std::size_t>(spec_.K));
  for (Index i = 0; i < spec_.K; ++i)
    result.sampled_theta.push_back(cache_.sample_conditional(i, rng));
  result.action = best_action(result.sampled_theta, x).index;
  return result;
}

GHierTSFaAgent::GHierTSFaAgent(HierModelSpec spec) : Agent(std::move(spec)), cache_(spec_) {
  // Fail fast on specs the factored posterior cannot represent; reuses the
  // checks of the posterior op.
  factored_hyper_posterior(spec_, stats_);
}

ActResult GHierTSFaAgent::act(const Vec& x, Rng& rng) {
  if (dirty_) {
    cache_.refresh(stats_);
    cache_.prepare_factored();
    dirty_ = false;
  }
  const Vec psi = cache_.sample_factored(rng);
  cache_.begin_conditionals(psi);
  ActResult result;
  result.sampled_theta.reserve(static_cast<std::size_t>(spec_.K));
  for (Index i = 0; i < spec_.K; ++i)
    result.sampled_theta.push_back(cache_.sample_conditional(i, rng));
  result.action = best_action(result.sampled_theta, x).index;
  return result;
}

LinTSAgent::LinTSAgent(HierModelSpec spec) : LinTSAgent(std::move(spec), false) {}

LinTSAgent::LinTSAgent(HierModelSpec spec, bool need_cov)
    : Agent(std::move(spec)), need_cov_(need_cov || spec_.jitter > 0.0) {
  marginal_prec_.reserve(static_cast<std::size_t>(spec_.K));
  marginal_shift_.reserve(static_cast<std::size_t>(spec_.K));
  for (Index i = 0; i < spec_.K; ++i) {
    const Mat row = mixing_row(spec_, i);
    const Mat marginal = symmetrized(spec_.sigma0[static_cast<std::size_t>(i)] +
                                     row * spec_.sigma_psi * row.transpose());
    Eigen::LLT<Mat> llt(marginal);
    if (llt.info() != Eigen::Success)
      throw NotPositiveDefinite("lints: marginal prior not positive definite");
    const Mat prec = llt.solve(Mat::Identity(spec_.d, spec_.d));
    marginal_prec_.push_back(symmetrized(prec));
    marginal_shift_.push_back(prec * (row * spec_.mu_psi));
  }
  post_mean_.assign(static_cast<std::size_t>(spec_.K), Vec());
  if (need_cov_) post_cov_.assign(static_cast<std::size_t>(spec_.K), Mat());
  post_sampler_.assign(static_cast<std::size_t>(spec_.K), Mat());
  stale_.assign(static_cast<std::size_t>(spec_.K), true);
}

void LinTSAgent::refresh() {
  const Index d = spec_.d;
  for (Index i = 0; i < spec_.K; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (!stale_[idx]) continue;
    Mat chol = marginal_prec_[idx] + stats_.gram(i);
    if (!detail::cholesky_in_place(chol.data(), d))
      throw NotPositiveDefinite("lints: action posterior not positive definite");
    post_mean_[idx] = marginal_shift_[idx] + stats_.moment(i);
    detail::spd_solve(chol.data(), d, post_mean_[idx].data());
    if (spec_.jitter > 0.0) {
      Mat cov = Mat::Identity(d, d);
      for (Index c = 0; c < d; ++c) detail::spd_solve(chol.data(), d, cov.col(c).data());
      cov.diagonal().array() += spec_.jitter * cov.trace() / double(d);
      Eigen::LLT<Mat> cov_llt(symmetrized(cov));
      if (cov_llt.info() != Eigen::Success)
        throw NotPositiveDefinite("lints: posterior covariance not positive definite");
      post_sampler_[idx] = cov_llt.matrixL();
      if (need_cov_) post_cov_[idx] = cov;
    } else {
      post_sampler_[idx].setIdentity(d, d);
      for (Index c = 0; c < d; ++c)
        detail::backward_solve(chol.data(), d, post_sampler_[idx].col(c).data());
      if (need_cov_) {
        post_cov_[idx].setIdentity(d, d);
        for (Index c = 0; c < d; ++c)
          detail::spd_solve(chol.data(), d, post_cov_[idx].col(c).data());
      }
    }
    stale_[idx] = false;
  }
}

ActResult LinTSAgent::act(const Vec& x, Rng& rng) {
  refresh();
  const Index d = spec_.d;
  ActResult result;
  result.sampled_theta.reserve(static_cast<std::size_t>(spec_.K));
  Vec z(d);
  for (Index i = 0; i < spec_.K; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    for (Index c = 0; c < d; ++c) z(c) = rng.normal();
    Vec theta = post_mean_[idx];
    detail::matvec_add(post_sampler_[idx].data(), d, d, z.data(), theta.data());
    result.sampled_theta.push_back(std::move(theta));
  }
  result.action = best_action(result.sampled_theta, x).index;
  return result;
}

ActResult LinUCBAgent::act(const Vec& x, Rng&) {
  refresh();
  ActResult result;
  Index best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < spec_.K; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const double width = std::sqrt(std::max(0.0, x.dot(post_cov_[idx] * x)));
    const double score = x.dot(post_mean_[idx]) + alpha() * width;
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  result.action = best;
  return result;
}

HierModelSpec HierTSAgent::reduce_spec(const HierModelSpec& spec) {
  if (!spec.has_weights())
    throw ValidationError("hierts reduction requires weights mixing");
  const Index L = spec.L, d = spec.d;
  HierModelSpec reduced = spec;
  reduced.L = 1;
  // Hyper-prior of the average latent psi_bar = (1/L) sum_l psi_l.
  Vec mean = Vec::Zero(d);
  for (Index l = 0; l < L; ++l) mean += spec.mu_psi.segment(l * d, d);
  mean /= static_cast<double>(L);
  Mat cov = Mat::Zero(d, d);
  for (Index a = 0; a < L; ++a)
    for (Index b = 0; b < L; ++b) cov += spec.sigma_psi.block(a * d, b * d, d, d);
  cov /= static_cast<double>(L * L);
  reduced.mu_psi = mean;
  reduced.sigma_psi = symmetrized(cov);
  // Per-action weight is the row sum, so the prior mean of theta_i is
  // preserved whenever all latent prior means coincide.
  Mat b_reduced(spec.K, 1);
  for (Index i = 0; i < spec.K; ++i) b_reduced(i, 0) = spec.weights().row(i).sum();
  reduced.mixing = WeightsMixing{std::move(b_reduced)};
  return reduced;
}

HierTSAgent::HierTSAgent(HierModelSpec spec) : Agent(spec), inner_(reduce_spec(spec)) {}

ActResult HierTSAgent::act(const Vec& x, Rng& rng) { return inner_.act(x, rng); }

void HierTSAgent::observe(const Vec& x, Index action, double y) {
  Agent::observe(x, action, y);
  inner_.observe(x, action, y);
}

std::string_view agent_kind_name(AgentKind kind) {
  switch (kind) {
    case AgentKind::GHierTS: return "G-HierTS";
    case AgentKind::GHierTSFa: return "G-HierTS-Fa";
    case AgentKind::LinTS: return "LinTS";
    case AgentKind::LinUCB: return "LinUCB";
    case AgentKind::HierTS: return "HierTS";
    case AgentKind::IndTS: return "IndTS";
  }
  throw ValidationError("unknown agent kind");
}

AgentKind agent_kind_from_name(std::string_view name) {
  if (name == "ghierts" || name == "G-HierTS") return AgentKind::GHierTS;
  if (name == "ghierts-fa" || name == "G-HierTS-Fa") return AgentKind::GHierTSFa;
  if (name == "lints" || name == "LinTS") return AgentKind::LinTS;
  if (name == "linucb" || name == "LinUCB") return AgentKind::LinUCB;
  if (name == "hierts" || name == "HierTS") return AgentKind::HierTS;
  if (name == "indts" || name == "IndTS") return AgentKind::IndTS;
  throw ValidationError("unknown agent name: " + std::string(name));
}

std::unique_ptr<Agent> make_agent(AgentKind kind, const HierModelSpec& spec,
                                  const AgentOptions& options) {
  switch (kind) {
    case AgentKind::GHierTS: return std::make_unique<GHierTSAgent>(spec);
    case AgentKind::GHierTSFa: return std::make_unique<GHierTSFaAgent>(spec);
    case AgentKind::LinTS: return std::make_unique<LinTSAgent>(spec);
    case AgentKind::LinUCB:
      return std::make_unique<LinUCBAgent>(spec, options.linucb_alpha);
    case AgentKind::HierTS: return std::make_unique<HierTSAgent>(spec);
    case AgentKind::IndTS: return std::make_unique<IndTSAgent>(spec);
  }
  throw ValidationError("unknown agent kind");
}

}  // namespace hierts
