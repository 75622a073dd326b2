#include "hierts/emit.hpp"
#include "hierts/experiment.hpp"
#include "hierts/ratings.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>

namespace {

using namespace hierts;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitIo = 3;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::optional<long long> horizon;
  std::optional<int> parallelism;
  std::optional<std::string> out;
  std::optional<double> alpha;
  std::optional<double> jitter;
  bool svg = false;
};

void apply(const Overrides& overrides, ExperimentConfig& config) {
  if (overrides.seed) config.base_seed = *overrides.seed;
  if (overrides.runs) config.runs = *overrides.runs;
  if (overrides.horizon) config.horizon = static_cast<Index>(*overrides.horizon);
  if (overrides.parallelism) config.parallelism = *overrides.parallelism;
  if (overrides.out) config.out_prefix = *overrides.out;
  if (overrides.jitter) config.jitter = *overrides.jitter;
  if (overrides.svg) config.svg = true;
  if (overrides.alpha) {
    for (auto& agent : config.agents)
      if (agent.kind == AgentKind::LinUCB) agent.options.linucb_alpha = *overrides.alpha;
  }
  config.validate();
}

int command_run(const std::string& config_path, const Overrides& overrides) {
  ExperimentConfig config = parse_config(config_path);
  apply(overrides, config);
  const std::vector<AggregateCurve> curves = run_experiment(config);
  const auto written = emit_results(curves, config, config.out_prefix);
  for (const auto& path : written) std::cout << "wrote " << path << "\n";
  for (const auto& curve : curves)
    std::cout << curve.agent << ": mean cumulative regret at n=" << config.horizon << " is "
              << format_double(curve.mean.back()) << " (stderr "
              << format_double(curve.stderr_.back()) << ", wall time "
              << format_double(curve.wall_seconds) << "s)\n";
  return kExitOk;
}

int command_sweep(const std::string& config_path, const Overrides& overrides) {
  ExperimentConfig config = parse_config(config_path);
  apply(overrides, config);
  const std::vector<SweepCell> cells = sweep_experiment(config);
  bool any_failed = false;
  for (const auto& cell : cells) {
    const std::string label =
        "K" + std::to_string(cell.K) + "_d" + std::to_string(cell.d);
    if (!cell.outcome.ok()) {
      any_failed = true;
      std::cerr << "cell " << label << " failed: " << cell.outcome.error << "\n";
      continue;
    }
    ExperimentConfig cell_config = config;
    cell_config.K = cell.K;
    cell_config.d = cell.d;
    const auto written =
        emit_results(cell.outcome.curves, cell_config, config.out_prefix + "_" + label);
    for (const auto& path : written) std::cout << "wrote " << path << "\n";
  }
  return any_failed ? kExitNumerical : kExitOk;
}

int command_bound(const std::string& config_path, const Overrides& overrides, bool csv,
                  std::optional<double> delta) {
  ExperimentConfig config = parse_config(config_path);
  apply(overrides, config);
  const double effective_delta =
      delta.value_or(1.0 / static_cast<double>(config.horizon));
  std::cout << bound_report(config, effective_delta, csv);
  return kExitOk;
}

int command_ingest(const std::string& ratings_path, Index rank, Index clusters, double reg,
                   int sweeps, double scale_hyper, double scale_cond, std::uint64_t seed,
                   const std::string& out_prefix) {
  const RatingsDataset data = load_ratings(ratings_path);
  if (data.empty()) throw DegenerateData("ingest: ratings file holds no valid triples");
  std::cout << "parsed " << data.triples.size() << " ratings from " << data.num_users
            << " users and " << data.num_items << " items";
  if (data.malformed_lines > 0)
    std::cout << " (" << data.malformed_lines << " malformed lines skipped)";
  std::cout << "\n";

  const Factorization fact = factorize(data, rank, reg, sweeps);
  std::cout << "factorized at rank " << rank << ", training RMSE "
            << format_double(rmse(data, fact.user_vectors, fact.item_vectors)) << "\n";

  const MovieLensArtifacts artifacts = build_movielens_artifacts(
      fact.item_vectors, fact.user_vectors, clusters, scale_hyper, scale_cond, seed);
  const std::filesystem::path prefix(out_prefix);
  if (prefix.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(prefix.parent_path(), ec);
    if (ec) throw IoError("ingest: cannot create output directory: " + ec.message());
  }
  const std::string model_path = out_prefix + "_model.txt";
  save_artifacts(artifacts, model_path);
  std::cout << "wrote " << model_path << " (L=" << clusters << ", d=" << rank << ")\n";
  return kExitOk;
}

int command_selftest() {
  return oracle_selftest(std::cout) ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical Thompson sampling for contextual bandits with shared latent "
               "parameters: simulator, baselines, regret bounds, and a MovieLens-style "
               "ingestion pipeline."};
  app.require_subcommand(1);

  Overrides overrides;
  std::string config_path;

  auto add_common = [&](CLI::App* cmd, bool with_config = true) {
    if (with_config)
      cmd->add_option("config", config_path, "experiment config file")->required();
    cmd->add_option("--seed", overrides.seed, "override base seed");
    cmd->add_option("--runs", overrides.runs, "override run count");
    cmd->add_option("--horizon", overrides.horizon, "override horizon");
    cmd->add_option("--parallelism", overrides.parallelism, "override worker count");
    cmd->add_option("--out", overrides.out, "override output path prefix");
    cmd->add_option("--alpha", overrides.alpha, "override LinUCB width");
    cmd->add_option("--jitter", overrides.jitter,
                    "relative diagonal jitter for ill-conditioned covariances");
    cmd->add_flag("--svg", overrides.svg, "also render a static SVG chart");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "run one experiment and emit CSV results");
  add_common(run_cmd);

  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "run the [sweep] K x d grid of experiments");
  add_common(sweep_cmd);

  bool bound_csv = false;
  std::optional<double> bound_delta;
  CLI::App* bound_cmd =
      app.add_subcommand("bound", "print the Bayes-regret bound and its constants");
  add_common(bound_cmd);
  bound_cmd->add_flag("--csv", bound_csv, "also print a CSV row");
  bound_cmd->add_option("--delta", bound_delta, "confidence level (default 1/horizon)");

  std::string ratings_path, ingest_out = "movielens";
  long long rank = 5, clusters = 5;
  double reg = 0.1, scale_hyper = 0.75, scale_cond = 0.25;
  int sweeps = 20;
  std::uint64_t ingest_seed = 1;
  CLI::App* ingest_cmd = app.add_subcommand(
      "ingest", "factorize a ::-delimited ratings file and build the latent model");
  ingest_cmd->add_option("ratings", ratings_path, "ratings file (UserID::MovieID::Rating::Timestamp)")
      ->required();
  ingest_cmd->add_option("--rank", rank, "embedding dimension d");
  ingest_cmd->add_option("--clusters", clusters, "latent cluster count L");
  ingest_cmd->add_option("--reg", reg, "ALS ridge regularization");
  ingest_cmd->add_option("--sweeps", sweeps, "ALS sweep count");
  ingest_cmd->add_option("--scale-hyper", scale_hyper, "hyper-prior variance scale");
  ingest_cmd->add_option("--scale-cond", scale_cond, "conditional variance scale");
  ingest_cmd->add_option("--seed", ingest_seed, "k-means seed");
  ingest_cmd->add_option("--out", ingest_out, "output path prefix");

  CLI::App* selftest_cmd =
      app.add_subcommand("selftest", "run the oracle-equivalence suite");
  (void)selftest_cmd;

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return command_run(config_path, overrides);
    if (sweep_cmd->parsed()) return command_sweep(config_path, overrides);
    if (bound_cmd->parsed())
      return command_bound(config_path, overrides, bound_csv, bound_delta);
    if (ingest_cmd->parsed())
      return command_ingest(ratings_path, static_cast<hierts::Index>(rank),
                            static_cast<hierts::Index>(clusters), reg, sweeps, scale_hyper,
                            scale_cond, ingest_seed, ingest_out);
    return command_selftest();
  } catch (const hierts::ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const hierts::ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const hierts::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const hierts::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitIo;
  } catch (const hierts::Error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}
