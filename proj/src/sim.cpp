#include "hierts/sim.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

namespace hierts {

StreamSet make_streams(std::uint64_t base_seed, std::uint64_t run_index) {
  return StreamSet{derive_stream(base_seed, run_index, StreamRole::Env),
                   derive_stream(base_seed, run_index, StreamRole::Context),
                   derive_stream(base_seed, run_index, StreamRole::Reward),
                   derive_stream(base_seed, run_index, StreamRole::Agent)};
}

RegretTrace run_episode(const HierModelSpec& env_spec, const ContextSpec& ctx_spec,
                        Agent& agent, Index horizon, StreamSet streams) {
  if (horizon < 1) throw ValidationError("run_episode: horizon must be positive");
  const EnvDraw env = sample_environment(env_spec, streams.env);
  RegretTrace trace;
  trace.per_round.reserve(static_cast<std::size_t>(horizon));
  trace.cumulative.reserve(static_cast<std::size_t>(horizon));
  double cumulative = 0.0;
  for (Index t = 1; t <= horizon; ++t) {
    const Vec x = sample_context(ctx_spec, streams.context);
    const double noise = streams.reward.normal();  // advances even for no-op agents
    const ActResult act = agent.act(x, streams.agent);
    const BestAction best = best_action(env.theta_star, x);
    const double chosen_mean = x.dot(env.theta_star[static_cast<std::size_t>(act.action)]);
    const double regret = best.value - chosen_mean;
    const double reward = chosen_mean + env_spec.sigma * noise;
    agent.observe(x, act.action, reward);
    cumulative += regret;
    trace.per_round.push_back(regret);
    trace.cumulative.push_back(cumulative);
  }
  return trace;
}

RegretTrace run_episode(const HierModelSpec& env_spec, const ContextSpec& ctx_spec,
                        Agent& agent, Index horizon, std::uint64_t seed) {
  RegretTrace trace = run_episode(env_spec, ctx_spec, agent, horizon, make_streams(seed, 0));
  trace.seed = seed;
  return trace;
}

AggregateCurve bayes_regret(const EnvProvider& env_provider, const ContextSpec& ctx_spec,
                            const AgentFactory& agent_factory, Index horizon, int runs,
                            std::uint64_t base_seed) {
  if (runs < 1) throw ValidationError("bayes_regret: need at least one run");
  AggregateCurve curve;
  curve.runs = runs;
  const auto n = static_cast<std::size_t>(horizon);
  std::vector<double> sum(n, 0.0), sum_sq(n, 0.0);
  using Clock = std::chrono::steady_clock;
  for (int run = 0; run < runs; ++run) {
    Rng weights_rng =
        derive_stream(base_seed, static_cast<std::uint64_t>(run), StreamRole::Weights);
    const HierModelSpec env_spec = env_provider(run, weights_rng);
    // The timed block covers the agent's whole run: construction, posterior
    // updates, sampling, and the shared environment mechanics.
    const auto t0 = Clock::now();
    std::unique_ptr<Agent> agent = agent_factory(env_spec);
    if (curve.agent.empty()) curve.agent = std::string(agent->name());
    RegretTrace trace =
        run_episode(env_spec, ctx_spec, *agent, horizon,
                    make_streams(base_seed, static_cast<std::uint64_t>(run)));
    trace.seed = base_seed + static_cast<std::uint64_t>(run);
    curve.wall_seconds += std::chrono::duration<double>(Clock::now() - t0).count();
    for (std::size_t t = 0; t < n; ++t) {
      sum[t] += trace.cumulative[t];
      sum_sq[t] += trace.cumulative[t] * trace.cumulative[t];
    }
  }
  curve.mean.resize(n);
  curve.stderr_.assign(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    curve.mean[t] = sum[t] / runs;
    if (runs >= 2) {
      const double var =
          std::max(0.0, (sum_sq[t] - runs * curve.mean[t] * curve.mean[t]) / (runs - 1));
      curve.stderr_[t] = std::sqrt(var / runs);
    }
  }
  return curve;
}

AggregateCurve bayes_regret(const HierModelSpec& env_spec, const ContextSpec& ctx_spec,
                            const AgentFactory& agent_factory, Index horizon, int runs,
                            std::uint64_t base_seed) {
  return bayes_regret([&env_spec](Index, Rng&) { return env_spec; }, ctx_spec, agent_factory,
                      horizon, runs, base_seed);
}

std::vector<SweepOutcome> sweep(const std::vector<SweepJob>& jobs, int parallelism) {
  std::vector<SweepOutcome> results(jobs.size());
  if (jobs.empty()) return results;
  const int workers =
      std::max(1, std::min<int>(parallelism, static_cast<int>(jobs.size())));
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= jobs.size()) return;
      try {
        results[idx].curves = jobs[idx]();
      } catch (const std::exception& e) {
        results[idx].error = e.what();
      } catch (...) {
        results[idx].error = "unknown error";
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  return results;
}

}  // namespace hierts
