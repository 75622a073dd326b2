#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hierts/config.hpp"
#include "hierts/emit.hpp"
#include "hierts/experiment.hpp"
#include "hierts/movielens.hpp"
#include "hierts/ratings.hpp"
#include "test_util.hpp"

#include <filesystem>
#include <fstream>

using namespace hierts;

TEST_CASE("minimal synthetic config fills the standard defaults") {
  const ExperimentConfig config = parse_config_text("[experiment]\npreset = synthetic\n");
  CHECK(config.horizon == 2000);
  CHECK(config.runs == 20);
  CHECK(config.K == 20);
  CHECK(config.d == 2);
  CHECK(config.L == 5);
  CHECK(config.sigma == 1.0);
  CHECK(config.hyper_var == 3.0);
  CHECK(config.cond_var == 1.0);
  REQUIRE(config.agents.size() == 5);
  CHECK(config.agents[0].kind == AgentKind::GHierTS);
  CHECK(config.agents[1].kind == AgentKind::GHierTSFa);
}

TEST_CASE("runs = 0 is a validation error") {
  CHECK_THROWS_AS(parse_config_text("[experiment]\npreset = synthetic\nruns = 0\n"),
                  ValidationError);
}

TEST_CASE("unknown keys are rejected by name") {
  try {
    parse_config_text("[experiment]\npreset = synthetic\nfoo = 1\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.key == "foo");
    CHECK(e.line == 3);
    CHECK(std::string(e.what()).find("foo") != std::string::npos);
  }
}

TEST_CASE("agent options parse and unknown agent options fail") {
  const ExperimentConfig config = parse_config_text(
      "[experiment]\npreset = synthetic\n[agents]\nagent = linucb alpha=0.25\n");
  REQUIRE(config.agents.size() == 1);
  CHECK(config.agents[0].kind == AgentKind::LinUCB);
  CHECK(config.agents[0].options.linucb_alpha == 0.25);
  CHECK_THROWS_AS(parse_config_text(
                      "[experiment]\npreset = synthetic\n[agents]\nagent = lints beta=1\n"),
                  ParseError);
}

TEST_CASE("movielens preset demands a model file and sets its defaults") {
  CHECK_THROWS_AS(parse_config_text("[experiment]\npreset = movielens\n"), ValidationError);
  const ExperimentConfig config = parse_config_text(
      "[experiment]\npreset = movielens\n[movielens]\nmodel_file = m.txt\n");
  CHECK(config.horizon == 5000);
  CHECK(config.K == 100);
  REQUIRE(config.agents.size() == 3);
}

TEST_CASE("sweep lists parse") {
  const ExperimentConfig config = parse_config_text(
      "[experiment]\npreset = synthetic\n[sweep]\nK = 20, 50,100\nd = 2\n");
  CHECK(config.sweep_K == std::vector<Index>{20, 50, 100});
  CHECK(config.sweep_d == std::vector<Index>{2});
}

TEST_CASE("ratings: single line, empty file, malformed counting") {
  const RatingsDataset one = parse_ratings_text("1::10::5::978300760\n");
  REQUIRE(one.triples.size() == 1);
  CHECK(one.triples[0].rating == 5.0);
  CHECK(one.num_users == 1);
  CHECK(one.num_items == 1);

  const RatingsDataset empty = parse_ratings_text("");
  CHECK(empty.empty());
  CHECK_THROWS_AS(factorize(empty, 1, 0.1, 5), DegenerateData);

  // 3 lines with one malformed is over the 1% budget and must abort.
  CHECK_THROWS_AS(parse_ratings_text("1::10::5::1\nbroken line\n2::11::3::1\n"),
                  FormatError);

  // 1 malformed out of 200 lines stays under the budget and is reported.
  std::string text;
  for (int i = 0; i < 199; ++i)
    text += std::to_string(i % 7) + "::" + std::to_string(i % 11) + "::4::1\n";
  text += "oops\n";
  const RatingsDataset tolerated = parse_ratings_text(text);
  CHECK(tolerated.malformed_lines == 1);
  CHECK(tolerated.triples.size() == 199);
}

TEST_CASE("factorize recovers a planted rank-1 matrix") {
  Rng rng(130);
  const Index users = 12, items = 9;
  Vec u(users), v(items);
  for (Index i = 0; i < users; ++i) u(i) = rng.uniform(0.5, 2.0);
  for (Index j = 0; j < items; ++j) v(j) = rng.uniform(0.5, 2.0);
  RatingsDataset data;
  data.num_users = users;
  data.num_items = items;
  for (Index i = 0; i < users; ++i)
    for (Index j = 0; j < items; ++j) data.triples.push_back({i, j, u(i) * v(j)});
  const Factorization fact = factorize(data, 1, 1e-8, 30);
  CHECK(rmse(data, fact.user_vectors, fact.item_vectors) < 1e-3);
}

TEST_CASE("overparameterized fit drives training error to zero") {
  Rng rng(131);
  const Index users = 5, items = 4;
  RatingsDataset data;
  data.num_users = users;
  data.num_items = items;
  for (Index i = 0; i < users; ++i)
    for (Index j = 0; j < items; ++j)
      data.triples.push_back({i, j, rng.uniform(1.0, 5.0)});
  const Factorization fact = factorize(data, 4, 1e-10, 60);
  CHECK(rmse(data, fact.user_vectors, fact.item_vectors) < 1e-4);
}

TEST_CASE("factorize objective is monotone nonincreasing") {
  Rng rng(132);
  RatingsDataset data;
  data.num_users = 50;
  data.num_items = 80;
  for (int n = 0; n < 1200; ++n) {
    data.triples.push_back({static_cast<Index>(rng.uniform_index(50)),
                            static_cast<Index>(rng.uniform_index(80)),
                            rng.uniform(1.0, 5.0)});
  }
  // Dense reindex guarantee: give every user/item at least one rating.
  for (Index i = 0; i < 50; ++i)
    data.triples.push_back({i, static_cast<Index>(i % 80), 3.0});
  for (Index j = 0; j < 80; ++j)
    data.triples.push_back({static_cast<Index>(j % 50), j, 3.0});
  const Factorization fact = factorize(data, 3, 0.1, 15);
  for (std::size_t k = 1; k < fact.objective.size(); ++k)
    CHECK(fact.objective[k] <= fact.objective[k - 1] * (1.0 + 1e-9) + 1e-12);
}

TEST_CASE("kmeans objective is monotone and separates planted clusters") {
  Rng rng(133);
  const Index per_cluster = 30, d = 3;
  Mat points(2 * per_cluster, d);
  Vec center_a = Vec::Zero(d), center_b = Vec::Constant(d, 10.0);
  for (Index p = 0; p < per_cluster; ++p)
    for (Index c = 0; c < d; ++c) {
      points(p, c) = center_a(c) + 0.1 * rng.normal();
      points(per_cluster + p, c) = center_b(c) + 0.1 * rng.normal();
    }
  Rng seed_rng(7);
  const KMeansResult result = kmeans(points, 2, seed_rng);
  for (std::size_t k = 1; k < result.objective.size(); ++k)
    CHECK(result.objective[k] <= result.objective[k - 1] * (1.0 + 1e-9) + 1e-12);
  // Points of one planted cluster share an assignment.
  for (Index p = 1; p < per_cluster; ++p) {
    CHECK(result.assignment[static_cast<std::size_t>(p)] == result.assignment[0]);
    CHECK(result.assignment[static_cast<std::size_t>(per_cluster + p)] ==
          result.assignment[static_cast<std::size_t>(per_cluster)]);
  }
  CHECK(result.assignment[0] !=
        result.assignment[static_cast<std::size_t>(per_cluster)]);
}

TEST_CASE("movielens weights: single cluster gives weight one") {
  Rng rng(134);
  const Mat items = testutil::random_matrix(10, 3, rng);
  const Mat users = testutil::random_matrix(5, 3, rng);
  const MovieLensArtifacts artifacts =
      build_movielens_artifacts(items, users, 1, 0.75, 0.25, 3);
  for (Index i = 0; i < items.rows(); ++i)
    CHECK(artifacts.weights(i, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("movielens weights: planted far clusters give majority weights") {
  Rng rng(135);
  const Index per_cluster = 15, d = 2;
  Mat items(2 * per_cluster, d);
  for (Index p = 0; p < per_cluster; ++p)
    for (Index c = 0; c < d; ++c) {
      items(p, c) = 0.1 * rng.normal();
      items(per_cluster + p, c) = 10.0 + 0.1 * rng.normal();
    }
  const Mat users = testutil::random_matrix(6, d, rng);
  const MovieLensArtifacts artifacts =
      build_movielens_artifacts(items, users, 2, 0.75, 0.25, 11);
  for (Index i = 0; i < items.rows(); ++i) {
    CHECK(artifacts.weights.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(artifacts.weights.row(i).maxCoeff() > 0.5);
    CHECK(artifacts.weights.row(i).minCoeff() > 0.0);
  }
}

TEST_CASE("movielens env resamples theta and pools user contexts") {
  Rng rng(136);
  const Mat items = testutil::random_matrix(30, 2, rng);
  const Mat users = testutil::random_matrix(8, 2, rng);
  const auto [spec, ctx] = build_movielens_model(items, users, 3, 0.75, 0.25, 10, 99);
  CHECK(spec.K == 10);
  CHECK(spec.L == 3);
  CHECK(spec.d == 2);
  spec.validate();
  CHECK(std::holds_alternative<FixedPoolContext>(ctx));
  CHECK(std::get<FixedPoolContext>(ctx).vectors.size() == 8);
  // Weight rows of the sampled actions sum to one.
  for (Index i = 0; i < spec.K; ++i)
    CHECK(spec.weights().row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("artifacts round-trip through the model file") {
  Rng rng(137);
  const Mat items = testutil::random_matrix(12, 2, rng);
  const Mat users = testutil::random_matrix(7, 2, rng);
  const MovieLensArtifacts artifacts =
      build_movielens_artifacts(items, users, 2, 0.75, 0.25, 5);
  const std::string path =
      (std::filesystem::temp_directory_path() / "hierts_model_roundtrip.txt").string();
  save_artifacts(artifacts, path);
  const MovieLensArtifacts loaded = load_artifacts(path);
  CHECK((loaded.item_vectors - artifacts.item_vectors).norm() == 0.0);
  CHECK((loaded.user_vectors - artifacts.user_vectors).norm() == 0.0);
  CHECK((loaded.weights - artifacts.weights).norm() == 0.0);
  CHECK((loaded.mean - artifacts.mean).norm() == 0.0);
  CHECK((loaded.variance - artifacts.variance).norm() == 0.0);
  std::filesystem::remove(path);
}

TEST_CASE("csv: header, row counts, round-major interleaving, round trip") {
  AggregateCurve a{"A", {1.0, 2.0, 3.0}, {0.1, 0.2, 0.3}, 2, 0.0};
  AggregateCurve b{"B", {0.5, 1.5, 2.5}, {0.0, 0.0, 0.0}, 2, 0.0};
  const std::string csv = curves_to_csv({a});
  const auto lines = [](const std::string& s) {
    std::vector<std::string> out;
    std::istringstream stream(s);
    std::string line;
    while (std::getline(stream, line)) out.push_back(line);
    return out;
  };
  const auto single = lines(csv);
  REQUIRE(single.size() == 4);  // header + 3 rows
  CHECK(single[0] == "round,agent,mean_cum_regret,stderr");
  CHECK(single[1] == "1,A,1,0.1");

  const auto both = lines(curves_to_csv({a, b}));
  REQUIRE(both.size() == 7);
  CHECK(both[1].substr(0, 3) == "1,A");
  CHECK(both[2].substr(0, 3) == "1,B");
  CHECK(both[3].substr(0, 3) == "2,A");

  const auto parsed = curves_from_csv(curves_to_csv({a, b}));
  REQUIRE(parsed.size() == 2);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(parsed[0].mean[t] == a.mean[t]);
    CHECK(parsed[0].stderr_[t] == a.stderr_[t]);
    CHECK(parsed[1].mean[t] == b.mean[t]);
  }
}

TEST_CASE("format_double round-trips exactly") {
  Rng rng(138);
  for (int rep = 0; rep < 200; ++rep) {
    const double value = (rng.uniform01() - 0.5) * std::pow(10.0, rng.uniform(-8, 8));
    CHECK(std::stod(format_double(value)) == value);
  }
  CHECK(format_double(0.1) == "0.1");
}

TEST_CASE("svg chart contains polylines, bands, and the legend") {
  AggregateCurve a{"G-HierTS", {1.0, 2.0}, {0.1, 0.1}, 2, 0.0};
  AggregateCurve b{"LinTS", {2.0, 4.0}, {0.2, 0.2}, 2, 0.0};
  const std::string svg = curves_to_svg({a, b});
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);
  CHECK(svg.find("polygon") != std::string::npos);
  CHECK(svg.find("G-HierTS") != std::string::npos);
  CHECK(svg.find("LinTS") != std::string::npos);
}

TEST_CASE("emit writes csv and manifest, reruns are byte-identical") {
  ExperimentConfig config = parse_config_text(
      "[experiment]\npreset = synthetic\nhorizon = 30\nruns = 2\nseed = 5\n"
      "[model]\nK = 4\nL = 2\nd = 2\n"
      "[agents]\nagent = ghierts\nagent = lints\n");
  const auto dir = std::filesystem::temp_directory_path() / "hierts_emit_test";
  std::filesystem::remove_all(dir);
  config.out_prefix = (dir / "out").string();

  const auto curves1 = run_experiment(config);
  const auto written1 = emit_results(curves1, config, config.out_prefix + "_a");
  const auto curves2 = run_experiment(config);
  const auto written2 = emit_results(curves2, config, config.out_prefix + "_b");

  auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
  };
  CHECK(slurp(written1[0]) == slurp(written2[0]));  // identical CSV bytes
  const std::string manifest = slurp(written1[1]);
  CHECK(manifest.find("config_hash") != std::string::npos);
  CHECK(manifest.find("code_version") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("run_experiment output is invariant to parallelism") {
  ExperimentConfig config = parse_config_text(
      "[experiment]\npreset = synthetic\nhorizon = 25\nruns = 3\nseed = 9\n"
      "[model]\nK = 3\nL = 2\nd = 2\n"
      "[agents]\nagent = ghierts\nagent = lints\nagent = linucb\n");
  ExperimentConfig parallel_config = config;
  parallel_config.parallelism = 4;
  const auto serial = run_experiment(config);
  const auto parallel = run_experiment(parallel_config);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t a = 0; a < serial.size(); ++a) {
    CHECK(serial[a].agent == parallel[a].agent);
    for (std::size_t t = 0; t < serial[a].mean.size(); ++t) {
      CHECK(serial[a].mean[t] == parallel[a].mean[t]);
      CHECK(serial[a].stderr_[t] == parallel[a].stderr_[t]);
    }
  }
}

TEST_CASE("sweep_experiment emits one cell per grid point") {
  ExperimentConfig config = parse_config_text(
      "[experiment]\npreset = synthetic\nhorizon = 10\nruns = 1\n"
      "[model]\nK = 3\nL = 2\nd = 2\n"
      "[sweep]\nK = 2,3\nd = 1,2\n"
      "[agents]\nagent = lints\n");
  const auto cells = sweep_experiment(config);
  REQUIRE(cells.size() == 4);
  for (const auto& cell : cells) {
    REQUIRE(cell.outcome.ok());
    REQUIRE(cell.outcome.curves.size() == 1);
    CHECK(cell.outcome.curves[0].mean.size() == 10);
  }
}

TEST_CASE("preset bound inputs use analytic suprema") {
  const ExperimentConfig config = parse_config_text("[experiment]\npreset = synthetic\n");
  const BoundInputs inputs = preset_bound_inputs(config, 1.0 / 2000.0);
  CHECK(inputs.kappa_b == doctest::Approx(5.0));  // L = 5
  CHECK(inputs.kappa_x == doctest::Approx(2.0));  // d * max(|low|,|high|)^2
  CHECK(inputs.lambda1_psi == doctest::Approx(3.0));
  const RegretBoundTerms terms = regret_bound(inputs);
  CHECK(terms.total > 0.0);
  const std::string report = bound_report(config, 1.0 / 2000.0, true);
  CHECK(report.find("bound = ") != std::string::npos);
  CHECK(report.find("csv: ") != std::string::npos);
}

TEST_CASE("missing files raise io errors") {
  CHECK_THROWS_AS(load_ratings("/definitely/not/here.dat"), IoError);
  CHECK_THROWS_AS(parse_config("/definitely/not/here.cfg"), IoError);
  CHECK_THROWS_AS(load_artifacts("/definitely/not/here.txt"), IoError);
}
