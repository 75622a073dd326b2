#pragma once

#include "hierts/agents.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace hierts {

/// Per-round and cumulative instantaneous regret of one run, measured on mean
/// rewards x^T theta*, not realized rewards.
struct RegretTrace {
  std::vector<double> per_round;
  std::vector<double> cumulative;
  std::uint64_t seed = 0;
};

/// Mean and standard error of cumulative regret across runs.
struct AggregateCurve {
  std::string agent;
  std::vector<double> mean;
  std::vector<double> stderr_;
  int runs = 0;
  double wall_seconds = 0.0;  // wall time of this agent's runs (env + decisions)
};

/// The four per-run random streams; see StreamRole for the derivation scheme.
struct StreamSet {
  Rng env;
  Rng context;
  Rng reward;
  Rng agent;
};

StreamSet make_streams(std::uint64_t base_seed, std::uint64_t run_index);

/// One episode: draw the environment from the env stream, then for each round
/// sample a context, let the agent act, record mean-reward regret, sample the
/// realized reward, and let the agent observe. Fully deterministic given the
/// streams. The reward stream advances once per round whether or not an agent
/// uses the draw, so every agent in a comparison faces identical noise.
RegretTrace run_episode(const HierModelSpec& env_spec, const ContextSpec& ctx_spec,
                        Agent& agent, Index horizon, StreamSet streams);

/// Convenience overload deriving streams from a single seed (run index 0).
RegretTrace run_episode(const HierModelSpec& env_spec, const ContextSpec& ctx_spec,
                        Agent& agent, Index horizon, std::uint64_t seed);

/// Per-run environment provider: receives the run index and the run's weights
/// stream, so presets may resample mixing weights (or action subsets) per run.
using EnvProvider = std::function<HierModelSpec(Index run, Rng& weights_rng)>;

using AgentFactory = std::function<std::unique_ptr<Agent>(const HierModelSpec& believed_spec)>;

/// Multi-run Bayes-regret estimate for one agent. Run r uses streams derived
/// from (base_seed, r); the provider sees the same weights stream regardless
/// of the agent, so comparisons share environments, contexts, and rewards.
AggregateCurve bayes_regret(const EnvProvider& env_provider, const ContextSpec& ctx_spec,
                            const AgentFactory& agent_factory, Index horizon, int runs,
                            std::uint64_t base_seed);

/// Fixed-environment overload.
AggregateCurve bayes_regret(const HierModelSpec& env_spec, const ContextSpec& ctx_spec,
                            const AgentFactory& agent_factory, Index horizon, int runs,
                            std::uint64_t base_seed);

/// One sweep work unit producing the curves of one experiment configuration.
using SweepJob = std::function<std::vector<AggregateCurve>()>;

struct SweepOutcome {
  std::vector<AggregateCurve> curves;
  std::string error;  // empty on success
  bool ok() const { return error.empty(); }
};

/// Runs independent jobs on up to `parallelism` threads. Results are ordered
/// as the input regardless of completion order, and a failing job is reported
/// in its slot without aborting siblings.
std::vector<SweepOutcome> sweep(const std::vector<SweepJob>& jobs, int parallelism);

}  // namespace hierts
