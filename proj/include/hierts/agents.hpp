#pragma once

#include "hierts/posterior.hpp"

#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace hierts {

struct ActResult {
  Index action = 0;                // 0-based
  std::vector<Vec> sampled_theta;  // per-action samples, empty for LinUCB
};

/// Stateful policy with an act/observe contract. Holds a believed model spec
/// (equal to the environment spec in all presets) and per-action sufficient
/// statistics. One instance per simulation run; never shared across threads.
class Agent {
 public:
  explicit Agent(HierModelSpec spec)
      : spec_(std::move(spec)), stats_(spec_.K, spec_.d) {}
  virtual ~Agent() = default;

  virtual ActResult act(const Vec& x, Rng& rng) = 0;

  virtual void observe(const Vec& x, Index action, double y) {
    stats_.update(x, action, y, spec_.sigma);
    mark_stale(action);
  }

  virtual std::string_view name() const = 0;

  const HierModelSpec& spec() const { return spec_; }
  const SufficientStats& stats() const { return stats_; }

 protected:
  virtual void mark_stale(Index action) { (void)action; }

  HierModelSpec spec_;
  SufficientStats stats_;
};

namespace detail {

/// Shared machinery of the hierarchical samplers: per-action Woodbury terms
/// and conditional factors, refreshed only for actions whose statistics
/// changed (each refresh is a full factorization from the current sufficient
/// statistics, never an incremental factor update), plus the jointly
/// assembled hyper-posterior precision and mean.
class HierCache {
 public:
  explicit HierCache(const HierModelSpec& spec);

  void mark_stale(Index action) { stale_[static_cast<std::size_t>(action)] = true; }

  /// Refreshes stale actions and reassembles the hyper precision/mean.
  void refresh(const SufficientStats& stats);

  const Mat& hyper_precision() const { return precision_; }
  const Vec& hyper_mean() const { return mean_; }

  /// Sample of the joint hyper-posterior Q_t in precision form.
  Vec sample_joint(Rng& rng);

  /// Per-latent factor sample: each block mean is the exact mean block, each
  /// block covariance the inverse of the corresponding precision block.
  Vec sample_factored(Rng& rng);

  /// Computes every action's conditional prior mean map for this latent
  /// sample (one batched product under weights mixing).
  void begin_conditionals(const Vec& psi);

  /// Conditional-posterior sample for action i at the latent sample passed to
  /// begin_conditionals.
  Vec sample_conditional(Index i, Rng& rng);

  bool factored_ready() const { return factors_ready_; }
  void prepare_factored();  // lazily factorizes the per-latent precision blocks

 private:
  void refresh_action(Index i, const SufficientStats& stats);
  void assemble();

  Index L_, K_, d_;
  double jitter_;
  Mat prior_prec_;
  Vec prior_shift_;

  // Weights mixing: the Kronecker structure reduces the precision assembly to
  // coefficient products against b2_, fixed at construction.
  Mat b_;       // K x L
  Mat bT_;      // L x K
  Mat b2_;      // K x L^2, column l*L+m holds b.col(l) .* b.col(m)
  Mat wflatT_;  // d^2 x K, column i = vec(precision_weight_i)
  Mat mflatT_;  // d x K,   column i = mle_weight_i

  std::vector<Mat> rows_;      // mixing_row(i), d x Ld (matrices mixing only)
  std::vector<Mat> cond_map_;  // cond_cov * Lambda0 * row (matrices mixing only)

  std::vector<Mat> lambda0_;    // Sigma0_i^-1
  std::vector<Mat> weight_;     // precision_weight_i (matrices mixing only)
  std::vector<Vec> mle_;        // mle_weight_i       (matrices mixing only)
  std::vector<Mat> cond_base_;  // cond_cov * Lambda0 (weights mixing)
  std::vector<Vec> cond_data_;  // cond_cov * B_i
  std::vector<Mat> cond_sampler_;  // S with S S^T = conditional covariance
  std::vector<bool> stale_;
  bool assembled_ = false;

  // Sampling runs in precision form: Psi = mean + L^-T z with L L^T the
  // precision, so no per-round covariance inversion happens. Factors live in
  // preallocated buffers driven by the detail::small_spd kernels.
  Mat precision_;   // Ld x Ld hyper precision
  Vec mean_;        // exact hyper mean
  Mat joint_chol_;  // lower factor of the hyper precision
  std::vector<Mat> factor_chols_;  // per-latent precision-block factors
  bool factors_ready_ = false;
  Mat contrib_scratch_;  // d^2 x L^2 assembly buffer (weights mixing)

  // Per-act scratch for the batched conditional prior means and normals.
  Mat wsum_scratch_;  // d x K (weights mixing)
  Vec psi_scratch_;   // Ld    (matrices mixing)
  Vec z_scratch_;     // d

  // Steady-state refresh runs without heap allocation through these buffers.
  Mat work_dd_, v_lambda0_, weight_scratch_;
  Vec mle_scratch_, shift_scratch_;
  Mat shift_rows_scratch_;  // L x d

  // The per-action contributions to the hyper precision and shift are summed
  // incrementally (rank-1 delta per refreshed action) with a periodic exact
  // rebuild that bounds float drift; the factorization downstream is always
  // recomputed from the assembled matrix.
  Mat contrib_sum_;   // d^2 x L^2
  Vec shift_sum_;     // Ld
  Vec delta_w_;       // d^2
  Vec delta_m_;       // d
  int updates_since_rebuild_ = 0;
};

}  // namespace detail

/// Hierarchical Thompson sampling: sample Psi_t from the joint hyper-posterior,
/// then each theta_{t,i} from its conditional posterior, act greedily.
class GHierTSAgent : public Agent {
 public:
  explicit GHierTSAgent(HierModelSpec spec);
  ActResult act(const Vec& x, Rng& rng) override;
  std::string_view name() const override { return "G-HierTS"; }

 protected:
  void mark_stale(Index action) override {
    cache_.mark_stale(action);
    dirty_ = true;
  }

  detail::HierCache cache_;
  bool dirty_ = true;
};

/// Factored variant: samples each latent independently from its per-latent
/// factor. Requires weights mixing and a block-diagonal hyper-prior.
class GHierTSFaAgent : public Agent {
 public:
  explicit GHierTSFaAgent(HierModelSpec spec);
  ActResult act(const Vec& x, Rng& rng) override;
  std::string_view name() const override { return "G-HierTS-Fa"; }

 protected:
  void mark_stale(Index action) override {
    cache_.mark_stale(action);
    dirty_ = true;
  }

 private:
  detail::HierCache cache_;
  bool dirty_ = true;
};

/// Linear Thompson sampling on K independent per-action regressions with the
/// marginal prior N(Gamma_i mu_psi, Sigma_{0,i} + Gamma_i Sigma_Psi Gamma_i^T).
class LinTSAgent : public Agent {
 public:
  explicit LinTSAgent(HierModelSpec spec);
  ActResult act(const Vec& x, Rng& rng) override;
  std::string_view name() const override { return "LinTS"; }

 protected:
  LinTSAgent(HierModelSpec spec, bool need_cov);
  void mark_stale(Index action) override { stale_[static_cast<std::size_t>(action)] = true; }
  void refresh();

  std::vector<Mat> marginal_prec_;   // inverse marginal prior covariance
  std::vector<Vec> marginal_shift_;  // prec * prior mean
  std::vector<Vec> post_mean_;
  std::vector<Mat> post_cov_;      // filled only when need_cov_ (LinUCB width)
  std::vector<Mat> post_sampler_;  // S with S S^T = posterior covariance
  std::vector<bool> stale_;
  bool need_cov_ = false;
};

/// Deterministic optimism: argmax of x^T mean + alpha * sqrt(x^T cov x) on the
/// same per-action posteriors as LinTS.
class LinUCBAgent : public LinTSAgent {
 public:
  explicit LinUCBAgent(HierModelSpec spec, double alpha = 1.0)
      : LinTSAgent(std::move(spec), /*need_cov=*/true), alpha_(alpha) {}
  ActResult act(const Vec& x, Rng& rng) override;
  std::string_view name() const override { return "LinUCB"; }
  double alpha() const { return alpha_; }

 private:
  double alpha_;
};

/// Per-action posteriors that ignore the latent structure entirely. Same
/// update rule as LinTS; kept as a separately named agent.
class IndTSAgent : public LinTSAgent {
 public:
  using LinTSAgent::LinTSAgent;
  std::string_view name() const override { return "IndTS"; }
};

/// Single-latent reduction: runs hierarchical sampling on a collapsed spec
/// whose latent is the average of the original latents and whose per-action
/// weight is the row sum of the original weights.
class HierTSAgent : public Agent {
 public:
  explicit HierTSAgent(HierModelSpec spec);
  ActResult act(const Vec& x, Rng& rng) override;
  void observe(const Vec& x, Index action, double y) override;
  std::string_view name() const override { return "HierTS"; }

  static HierModelSpec reduce_spec(const HierModelSpec& spec);

 private:
  GHierTSAgent inner_;
};

enum class AgentKind { GHierTS, GHierTSFa, LinTS, LinUCB, HierTS, IndTS };

struct AgentOptions {
  double linucb_alpha = 1.0;
};

std::string_view agent_kind_name(AgentKind kind);
AgentKind agent_kind_from_name(std::string_view name);  // throws ValidationError
std::unique_ptr<Agent> make_agent(AgentKind kind, const HierModelSpec& spec,
                                  const AgentOptions& options = {});

}  // namespace hierts
