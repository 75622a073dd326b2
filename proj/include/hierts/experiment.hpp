#pragma once

#include "hierts/config.hpp"
#include "hierts/movielens.hpp"
#include "hierts/sim.hpp"
#include "hierts/theory.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace hierts {

/// Environment provider and context for a config: synthetic/custom presets
/// rebuild the spec per run (resampling weights from the run's weights stream
/// when mixing = uniform); the movielens preset resamples the K-item subset
/// per run from the shared artifacts.
struct ExperimentSetup {
  EnvProvider provider;
  ContextSpec context;
};

ExperimentSetup make_setup(const ExperimentConfig& config);

/// Runs every configured agent on shared per-run streams and returns one
/// curve per agent, ordered as configured. Parallelism spreads agents across
/// threads; the output is identical for any parallelism level.
std::vector<AggregateCurve> run_experiment(const ExperimentConfig& config);

/// Sweep over the cartesian grid of [sweep] K x d values (falling back to the
/// config's own K/d when a list is empty). Returns one outcome per grid cell,
/// each holding the per-agent curves.
struct SweepCell {
  Index K = 0;
  Index d = 0;
  SweepOutcome outcome;
};

std::vector<SweepCell> sweep_experiment(const ExperimentConfig& config);

/// Bound inputs for the config's model at delta = 1/horizon. For presets with
/// per-run random weights, kappa_b is the analytic supremum of ||b_i||^2 over
/// the sampling distribution (L for both uniform [-1,1] weights and all-ones
/// weights); for movielens it is the max over all catalog items.
BoundInputs preset_bound_inputs(const ExperimentConfig& config, double delta);

/// Labeled key-value bound report; optionally also a one-line CSV row.
std::string bound_report(const ExperimentConfig& config, double delta, bool csv_row);

/// Oracle-equivalence suite (the repo's central correctness check): random
/// instances across both mixing variants, decomposed marginal posterior
/// against the joint oracle. Prints a summary line; returns true when every
/// instance is within tolerance.
bool oracle_selftest(std::ostream& out, int instances = 200);

}  // namespace hierts
