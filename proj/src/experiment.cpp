#include "hierts/experiment.hpp"

#include "hierts/emit.hpp"
#include "hierts/posterior.hpp"

#include <cmath>
#include <memory>
#include <ostream>
#include <sstream>

namespace hierts {

namespace {

HierModelSpec scalar_prior_spec(const ExperimentConfig& config, Index K, Index d) {
  HierModelSpec spec;
  spec.L = config.L;
  spec.K = K;
  spec.d = d;
  spec.sigma = config.sigma;
  spec.jitter = config.jitter;
  spec.mu_psi = Vec::Constant(config.L * d, config.hyper_mean);
  spec.sigma_psi = config.hyper_var * Mat::Identity(config.L * d, config.L * d);
  spec.sigma0.assign(static_cast<std::size_t>(K), config.cond_var * Mat::Identity(d, d));
  return spec;
}

Mat sample_uniform_weights(Index K, Index L, Rng& rng) {
  Mat b(K, L);
  for (Index i = 0; i < K; ++i)
    for (Index l = 0; l < L; ++l) b(i, l) = rng.uniform(-1.0, 1.0);
  return b;
}

ExperimentSetup synthetic_setup(const ExperimentConfig& config, Index K, Index d) {
  ExperimentSetup setup;
  const bool resample = config.mixing == "uniform";
  const HierModelSpec base = scalar_prior_spec(config, K, d);
  setup.provider = [base, resample](Index, Rng& weights_rng) {
    HierModelSpec spec = base;
    if (resample) {
      spec.mixing = WeightsMixing{sample_uniform_weights(spec.K, spec.L, weights_rng)};
    } else {
      spec.mixing = WeightsMixing{Mat::Ones(spec.K, spec.L)};
    }
    return spec;
  };
  if (config.context_type == "constant") {
    setup.context = ConstantContext{};
  } else {
    setup.context = UniformCubeContext{d, config.ctx_low, config.ctx_high};
  }
  return setup;
}

ExperimentSetup movielens_setup(const ExperimentConfig& config) {
  auto artifacts = std::make_shared<MovieLensArtifacts>(load_artifacts(config.model_file));
  ExperimentSetup setup;
  const Index K = config.K;
  const double jitter = config.jitter;
  FixedPoolContext pool;
  pool.vectors.reserve(static_cast<std::size_t>(artifacts->user_vectors.rows()));
  for (Index u = 0; u < artifacts->user_vectors.rows(); ++u)
    pool.vectors.push_back(artifacts->user_vectors.row(u).transpose());
  setup.context = std::move(pool);
  setup.provider = [artifacts, K, jitter](Index, Rng& weights_rng) {
    // The per-run instance stream picks the K-item subset; weights themselves
    // are data-derived and fixed.
    auto [spec, ctx] = movielens_env(*artifacts, K, weights_rng, jitter);
    return spec;
  };
  return setup;
}

}  // namespace

ExperimentSetup make_setup(const ExperimentConfig& config) {
  if (config.preset == ExperimentConfig::Preset::MovieLens) return movielens_setup(config);
  return synthetic_setup(config, config.K, config.d);
}

std::vector<AggregateCurve> run_experiment(const ExperimentConfig& config) {
  const ExperimentSetup setup = make_setup(config);
  std::vector<SweepJob> jobs;
  jobs.reserve(config.agents.size());
  for (const AgentSpec& agent_spec : config.agents) {
    jobs.push_back([&config, &setup, agent_spec]() {
      const AgentFactory factory = [agent_spec](const HierModelSpec& spec) {
        return make_agent(agent_spec.kind, spec, agent_spec.options);
      };
      return std::vector<AggregateCurve>{bayes_regret(setup.provider, setup.context, factory,
                                                      config.horizon, config.runs,
                                                      config.base_seed)};
    });
  }
  const std::vector<SweepOutcome> outcomes = sweep(jobs, config.parallelism);
  std::vector<AggregateCurve> curves;
  curves.reserve(outcomes.size());
  for (const auto& outcome : outcomes) {
    if (!outcome.ok()) throw NumericalFailure("experiment: " + outcome.error);
    curves.push_back(outcome.curves.front());
  }
  return curves;
}

std::vector<SweepCell> sweep_experiment(const ExperimentConfig& config) {
  std::vector<Index> k_values = config.sweep_K.empty() ? std::vector<Index>{config.K}
                                                       : config.sweep_K;
  std::vector<Index> d_values = config.sweep_d.empty() ? std::vector<Index>{config.d}
                                                       : config.sweep_d;
  if (config.preset == ExperimentConfig::Preset::MovieLens && !config.sweep_d.empty())
    throw ValidationError("sweep: movielens dimension is fixed by the model file");

  std::vector<SweepCell> cells;
  std::vector<SweepJob> jobs;
  for (Index k : k_values) {
    for (Index d : d_values) {
      cells.push_back(SweepCell{k, d, {}});
      ExperimentConfig cell_config = config;
      cell_config.K = k;
      cell_config.d = d;
      cell_config.sweep_K.clear();
      cell_config.sweep_d.clear();
      cell_config.parallelism = 1;  // each cell is one work unit
      jobs.push_back([cell_config]() { return run_experiment(cell_config); });
    }
  }
  const std::vector<SweepOutcome> outcomes = sweep(jobs, config.parallelism);
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i].outcome = outcomes[i];
  return cells;
}

BoundInputs preset_bound_inputs(const ExperimentConfig& config, double delta) {
  BoundInputs inputs;
  inputs.n = config.horizon;
  inputs.delta = delta;
  inputs.sigma = config.sigma;
  if (config.preset == ExperimentConfig::Preset::MovieLens) {
    const MovieLensArtifacts artifacts = load_artifacts(config.model_file);
    inputs.K = config.K;
    inputs.L = artifacts.L();
    inputs.d = artifacts.d();
    inputs.lambda1_0 = config.scale_cond * artifacts.variance.maxCoeff();
    inputs.lambdad_0 = config.scale_cond * artifacts.variance.minCoeff();
    inputs.lambda1_psi = config.scale_hyper * artifacts.variance.maxCoeff();
    inputs.kappa_b = artifacts.weights.rowwise().squaredNorm().maxCoeff();
    double kappa_x = 0.0;
    for (Index u = 0; u < artifacts.user_vectors.rows(); ++u)
      kappa_x = std::max(kappa_x, artifacts.user_vectors.row(u).squaredNorm());
    inputs.kappa_x = kappa_x;
    return inputs;
  }
  inputs.K = config.K;
  inputs.L = config.L;
  inputs.d = config.d;
  inputs.lambda1_0 = config.cond_var;
  inputs.lambdad_0 = config.cond_var;
  inputs.lambda1_psi = config.hyper_var;
  // Analytic supremum of ||b_i||^2: both uniform [-1,1]^L draws and all-ones
  // rows are bounded by L.
  inputs.kappa_b = static_cast<double>(config.L);
  if (config.context_type == "constant") {
    inputs.kappa_x = 1.0;
  } else {
    const double corner = std::max(std::abs(config.ctx_low), std::abs(config.ctx_high));
    inputs.kappa_x = static_cast<double>(config.d) * corner * corner;
  }
  return inputs;
}

std::string bound_report(const ExperimentConfig& config, double delta, bool csv_row) {
  const BoundInputs inputs = preset_bound_inputs(config, delta);
  const RegretBoundTerms terms = regret_bound(inputs);
  std::ostringstream out;
  auto kv = [&out](const char* key, double value) {
    out << key << " = " << format_double(value) << "\n";
  };
  out << "n = " << inputs.n << "\n";
  kv("delta", inputs.delta);
  out << "K = " << inputs.K << "\nL = " << inputs.L << "\nd = " << inputs.d << "\n";
  kv("sigma", inputs.sigma);
  kv("lambda1_0", inputs.lambda1_0);
  kv("lambdad_0", inputs.lambdad_0);
  kv("lambda1_psi", inputs.lambda1_psi);
  kv("kappa_b", inputs.kappa_b);
  kv("kappa_x", inputs.kappa_x);
  kv("c1", terms.c1);
  kv("c_psi", terms.c_psi);
  kv("c2", terms.c2);
  kv("r_action", terms.r_action);
  kv("r_latent", terms.r_latent);
  kv("main_term", terms.main_term);
  kv("tail_term", terms.tail_term);
  kv("bound", terms.total);
  if (csv_row) {
    out << "csv: n,delta,K,L,d,c1,c_psi,c2,r_action,r_latent,bound\n";
    out << "csv: " << inputs.n << ',' << format_double(inputs.delta) << ',' << inputs.K << ','
        << inputs.L << ',' << inputs.d << ',' << format_double(terms.c1) << ','
        << format_double(terms.c_psi) << ',' << format_double(terms.c2) << ','
        << format_double(terms.r_action) << ',' << format_double(terms.r_latent) << ','
        << format_double(terms.total) << "\n";
  }
  return out.str();
}

bool oracle_selftest(std::ostream& out, int instances) {
  Rng rng(0x07ACF3ULL);
  double worst_mean = 0.0, worst_cov = 0.0;
  int failures = 0;
  for (int rep = 0; rep < instances; ++rep) {
    const Index L = 1 + static_cast<Index>(rng.uniform_index(3));
    const Index K = 1 + static_cast<Index>(rng.uniform_index(5));
    const Index d = 1 + static_cast<Index>(rng.uniform_index(3));
    const Index t = static_cast<Index>(rng.uniform_index(21));

    HierModelSpec spec;
    spec.L = L;
    spec.K = K;
    spec.d = d;
    spec.sigma = rng.uniform(0.5, 1.5);
    spec.mu_psi = Vec(L * d);
    for (Index j = 0; j < L * d; ++j) spec.mu_psi(j) = rng.uniform(-1.0, 1.0);
    Mat a(L * d, L * d);
    for (Index r = 0; r < L * d; ++r)
      for (Index c = 0; c < L * d; ++c) a(r, c) = rng.uniform(-1.0, 1.0);
    spec.sigma_psi = symmetrized(a * a.transpose()) + 0.5 * Mat::Identity(L * d, L * d);
    for (Index i = 0; i < K; ++i) {
      Mat s(d, d);
      for (Index r = 0; r < d; ++r)
        for (Index c = 0; c < d; ++c) s(r, c) = rng.uniform(-1.0, 1.0);
      spec.sigma0.push_back(symmetrized(s * s.transpose()) + 0.5 * Mat::Identity(d, d));
    }
    Mat b(K, L);
    for (Index i = 0; i < K; ++i)
      for (Index l = 0; l < L; ++l) b(i, l) = rng.uniform(-1.0, 1.0);
    if (rep % 2 == 0) {
      spec.mixing = WeightsMixing{b};
    } else {
      MatricesMixing mix;
      mix.C.resize(static_cast<std::size_t>(K));
      for (Index i = 0; i < K; ++i)
        for (Index l = 0; l < L; ++l)
          mix.C[static_cast<std::size_t>(i)].push_back(b(i, l) * Mat::Identity(d, d));
      spec.mixing = mix;
    }

    const EnvDraw env = sample_environment(spec, rng);
    std::vector<HistoryRecord> history;
    for (Index round = 1; round <= t; ++round) {
      Vec x(d);
      for (Index c = 0; c < d; ++c) x(c) = rng.uniform(-1.0, 1.0);
      const Index action = static_cast<Index>(rng.uniform_index(static_cast<std::size_t>(K)));
      const double y = sample_reward(env.theta_star[static_cast<std::size_t>(action)], x,
                                     spec.sigma, rng);
      history.push_back({round, x, action, y});
    }
    const SufficientStats stats = stats_from_history(K, d, history, spec.sigma);
    const Gaussian dec = decomposed_marginal_posterior(spec, stats);
    const Gaussian oracle = joint_posterior_oracle(spec, history);
    const double mean_err = (dec.mean() - oracle.mean()).cwiseAbs().maxCoeff() /
                            (1.0 + oracle.mean().cwiseAbs().maxCoeff());
    const double cov_err = (dec.cov() - oracle.cov()).norm() / oracle.cov().norm();
    worst_mean = std::max(worst_mean, mean_err);
    worst_cov = std::max(worst_cov, cov_err);
    if (mean_err > 1e-8 || cov_err > 1e-8) ++failures;
  }
  out << "oracle-equivalence: " << instances - failures << "/" << instances
      << " instances within 1e-8 (worst mean " << format_double(worst_mean)
      << ", worst cov " << format_double(worst_cov) << ")\n";
  return failures == 0;
}

}  // namespace hierts
