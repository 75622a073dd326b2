#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hierts/agents.hpp"
#include "test_util.hpp"

#include <map>

using namespace hierts;
using testutil::random_history;
using testutil::random_vector;
using testutil::random_weights_spec;

namespace {

HierModelSpec degenerate_spec(Index K, Index d, const std::vector<Vec>& means) {
  // Near-zero covariances everywhere; the conditional prior means are pinned
  // through unit single-latent weights by aligning mu_psi blocks per action.
  HierModelSpec spec;
  spec.L = K;  // one latent per action so each mean can be set independently
  spec.K = K;
  spec.d = d;
  spec.mu_psi = Vec::Zero(K * d);
  for (Index i = 0; i < K; ++i)
    spec.mu_psi.segment(i * d, d) = means[static_cast<std::size_t>(i)];
  spec.sigma_psi = 1e-30 * Mat::Identity(K * d, K * d);
  spec.sigma0.assign(static_cast<std::size_t>(K), 1e-30 * Mat::Identity(d, d));
  spec.mixing = WeightsMixing{Mat::Identity(K, K)};
  spec.sigma = 1.0;
  return spec;
}

}  // namespace

TEST_CASE("g-hierts in the degenerate limit is greedy on prior means") {
  std::vector<Vec> means{Vec::Zero(1), Vec::Zero(1), Vec::Ones(1)};
  means[2](0) = 2.0;  // action 3 best under x = 1
  const HierModelSpec spec = degenerate_spec(3, 1, means);
  GHierTSAgent agent(spec);
  Rng rng(80);
  for (int rep = 0; rep < 20; ++rep) CHECK(agent.act(Vec::Ones(1), rng).action == 2);
}

TEST_CASE("g-hierts act is deterministic given the seed") {
  Rng rng(81);
  const HierModelSpec spec = random_weights_spec(2, 4, 2, rng);
  GHierTSAgent agent(spec);
  const Vec x = random_vector(2, rng);
  Rng a(7), b(7);
  const ActResult ra = agent.act(x, a);
  const ActResult rb = agent.act(x, b);
  CHECK(ra.action == rb.action);
  for (std::size_t i = 0; i < ra.sampled_theta.size(); ++i)
    CHECK((ra.sampled_theta[i] - rb.sampled_theta[i]).norm() == 0.0);
}

TEST_CASE("g-hierts action law matches oracle sampling at a fixed state") {
  Rng rng(82);
  const HierModelSpec spec = random_weights_spec(2, 3, 2, rng);
  const auto history = random_history(spec, 15, rng);

  GHierTSAgent agent(spec);
  for (const auto& rec : history) agent.observe(rec.x, rec.action, rec.y);
  const Vec x = random_vector(spec.d, rng);

  const int n = 100000;
  std::vector<int> hier_counts(static_cast<std::size_t>(spec.K), 0);
  Rng act_rng(83);
  for (int rep = 0; rep < n; ++rep)
    ++hier_counts[static_cast<std::size_t>(agent.act(x, act_rng).action)];

  const Gaussian oracle = joint_posterior_oracle(spec, history);
  std::vector<int> oracle_counts(static_cast<std::size_t>(spec.K), 0);
  Rng oracle_rng(84);
  for (int rep = 0; rep < n; ++rep) {
    const Vec theta = sample_gaussian(oracle, oracle_rng);
    Index best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < spec.K; ++i) {
      const double value = x.dot(theta.segment(i * spec.d, spec.d));
      if (value > best_value) {
        best_value = value;
        best = i;
      }
    }
    ++oracle_counts[static_cast<std::size_t>(best)];
  }

  for (Index i = 0; i < spec.K; ++i) {
    const double p = static_cast<double>(hier_counts[static_cast<std::size_t>(i)]) / n;
    const double q = static_cast<double>(oracle_counts[static_cast<std::size_t>(i)]) / n;
    const double se = std::sqrt(p * (1 - p) / n + q * (1 - q) / n);
    CHECK(std::abs(p - q) <= 3.0 * se + 1e-9);
  }
}

TEST_CASE("factored agent equals g-hierts exactly at L = 1") {
  Rng rng(85);
  HierModelSpec spec = random_weights_spec(1, 4, 2, rng);
  GHierTSAgent exact(spec);
  GHierTSFaAgent factored(spec);
  const auto history = random_history(spec, 12, rng);
  for (const auto& rec : history) {
    exact.observe(rec.x, rec.action, rec.y);
    factored.observe(rec.x, rec.action, rec.y);
  }
  const Vec x = random_vector(2, rng);
  Rng a(9), b(9);
  const ActResult re = exact.act(x, a);
  const ActResult rf = factored.act(x, b);
  CHECK(re.action == rf.action);
  for (std::size_t i = 0; i < re.sampled_theta.size(); ++i)
    CHECK((re.sampled_theta[i] - rf.sampled_theta[i]).norm() == 0.0);
}

TEST_CASE("factored agent is greedy in the degenerate limit too") {
  std::vector<Vec> means{Vec::Zero(1), 2.0 * Vec::Ones(1)};
  const HierModelSpec spec = degenerate_spec(2, 1, means);
  GHierTSFaAgent agent(spec);
  Rng rng(86);
  CHECK(agent.act(Vec::Ones(1), rng).action == 1);
}

TEST_CASE("factored agent rejects coupled hyper-priors at construction") {
  Rng rng(87);
  const HierModelSpec spec = random_weights_spec(2, 3, 2, rng);  // dense SigmaPsi
  CHECK_THROWS_AS(GHierTSFaAgent{spec}, NonBlockDiagonalHyperPrior);
}

TEST_CASE("lints with no data and degenerate marginals is greedy on prior means") {
  std::vector<Vec> means{Vec::Ones(1), 3.0 * Vec::Ones(1), 2.0 * Vec::Ones(1)};
  const HierModelSpec spec = degenerate_spec(3, 1, means);
  LinTSAgent agent(spec);
  Rng rng(88);
  CHECK(agent.act(Vec::Ones(1), rng).action == 1);
}

TEST_CASE("lints with one action always picks it") {
  Rng rng(89);
  const HierModelSpec spec = random_weights_spec(2, 1, 2, rng);
  LinTSAgent agent(spec);
  CHECK(agent.act(random_vector(2, rng), rng).action == 0);
}

TEST_CASE("lints sampling distribution matches the conjugate posterior") {
  // Single-action scalar chain: prior variance over theta is
  // Sigma0 + b SigmaPsi b = 2, one observation (x = 1, y = 1) with sigma = 1,
  // so theta | data ~ N(2/3, 2/3).
  HierModelSpec spec;
  spec.L = spec.K = spec.d = 1;
  spec.mu_psi = Vec::Zero(1);
  spec.sigma_psi = Mat::Identity(1, 1);
  spec.sigma0 = {Mat::Identity(1, 1)};
  spec.mixing = WeightsMixing{Mat::Ones(1, 1)};
  spec.sigma = 1.0;
  LinTSAgent agent(spec);
  agent.observe(Vec::Ones(1), 0, 1.0);
  Rng rng(90);
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int rep = 0; rep < n; ++rep) {
    const double theta = agent.act(Vec::Ones(1), rng).sampled_theta[0](0);
    sum += theta;
    sum_sq += theta * theta;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean - 2.0 / 3.0) < 3.0 * std::sqrt(2.0 / 3.0 / n));
  CHECK(std::abs(var - 2.0 / 3.0) < 0.02);
}

TEST_CASE("linucb with alpha 0 and degenerate priors is greedy") {
  std::vector<Vec> means{2.0 * Vec::Ones(1), Vec::Ones(1)};
  const HierModelSpec spec = degenerate_spec(2, 1, means);
  LinUCBAgent agent(spec, 0.0);
  Rng rng(91);
  CHECK(agent.act(Vec::Ones(1), rng).action == 0);
}

TEST_CASE("linucb optimism prefers the wider posterior at equal means") {
  // Two actions with identical prior means but wider prior for action 2.
  HierModelSpec spec;
  spec.L = 2;
  spec.K = 2;
  spec.d = 1;
  spec.mu_psi = Vec::Ones(2);
  spec.sigma_psi = 1e-30 * Mat::Identity(2, 2);
  spec.sigma0.push_back(0.01 * Mat::Identity(1, 1));
  spec.sigma0.push_back(0.5 * Mat::Identity(1, 1));
  spec.mixing = WeightsMixing{Mat::Identity(2, 2)};
  spec.sigma = 1.0;
  LinUCBAgent agent(spec, 1.0);
  Rng rng(92);
  CHECK(agent.act(Vec::Ones(1), rng).action == 1);
}

TEST_CASE("linucb hand-built scores: 1 + 0.1 vs 0.8 + sqrt(0.5)") {
  // Prior means 1 and 0.8, posterior variances 0.01 and 0.5, alpha = 1:
  // UCB_1 = 1.1, UCB_2 ~ 1.507, so action 2 wins.
  HierModelSpec spec;
  spec.L = 2;
  spec.K = 2;
  spec.d = 1;
  spec.mu_psi = Vec(2);
  spec.mu_psi << 1.0, 0.8;
  spec.sigma_psi = 1e-30 * Mat::Identity(2, 2);
  spec.sigma0.push_back(0.01 * Mat::Identity(1, 1));
  spec.sigma0.push_back(0.5 * Mat::Identity(1, 1));
  spec.mixing = WeightsMixing{Mat::Identity(2, 2)};
  spec.sigma = 1.0;
  LinUCBAgent agent(spec, 1.0);
  Rng rng(93);
  CHECK(agent.act(Vec::Ones(1), rng).action == 1);
}

TEST_CASE("hierts reduction is the identity at L = 1") {
  Rng rng(94);
  const HierModelSpec spec = random_weights_spec(1, 4, 2, rng);
  const HierModelSpec reduced = HierTSAgent::reduce_spec(spec);
  CHECK(reduced.L == 1);
  CHECK((reduced.mu_psi - spec.mu_psi).norm() < 1e-15);
  CHECK((reduced.sigma_psi - spec.sigma_psi).norm() < 1e-15);
  CHECK((reduced.weights() - spec.weights()).norm() < 1e-15);

  HierTSAgent h(spec);
  GHierTSAgent g(spec);
  const auto history = random_history(spec, 10, rng);
  for (const auto& rec : history) {
    h.observe(rec.x, rec.action, rec.y);
    g.observe(rec.x, rec.action, rec.y);
  }
  const Vec x = random_vector(2, rng);
  Rng a(17), b(17);
  CHECK(h.act(x, a).action == g.act(x, b).action);
}

TEST_CASE("hierts reduction preserves the prior mean of every action") {
  Rng rng(95);
  HierModelSpec spec = random_weights_spec(3, 5, 2, rng);
  // Identical latent prior means and uniform weights.
  const Vec shared = random_vector(spec.d, rng);
  for (Index l = 0; l < spec.L; ++l) spec.mu_psi.segment(l * spec.d, spec.d) = shared;
  std::get<WeightsMixing>(spec.mixing).b.setConstant(1.0 / static_cast<double>(spec.L));
  const HierModelSpec reduced = HierTSAgent::reduce_spec(spec);
  for (Index i = 0; i < spec.K; ++i) {
    const Vec original = mixing_row(spec, i) * spec.mu_psi;
    const Vec collapsed = mixing_row(reduced, i) * reduced.mu_psi;
    CHECK((original - collapsed).norm() < 1e-12);
  }
}

TEST_CASE("indts shares the lints decision rule") {
  Rng rng(96);
  const HierModelSpec spec = random_weights_spec(2, 3, 2, rng);
  LinTSAgent lin(spec);
  IndTSAgent ind(spec);
  const auto history = random_history(spec, 8, rng);
  for (const auto& rec : history) {
    lin.observe(rec.x, rec.action, rec.y);
    ind.observe(rec.x, rec.action, rec.y);
  }
  const Vec x = random_vector(2, rng);
  Rng a(21), b(21);
  CHECK(lin.act(x, a).action == ind.act(x, b).action);
  CHECK(ind.name() == "IndTS");
}

TEST_CASE("observe order across distinct actions does not matter") {
  Rng rng(97);
  const HierModelSpec spec = random_weights_spec(2, 3, 2, rng);
  GHierTSAgent a(spec), b(spec);
  const Vec x1 = random_vector(2, rng), x2 = random_vector(2, rng);
  a.observe(x1, 0, 1.0);
  a.observe(x2, 1, -1.0);
  b.observe(x2, 1, -1.0);
  b.observe(x1, 0, 1.0);
  for (Index i = 0; i < spec.K; ++i) {
    CHECK((a.stats().gram(i) - b.stats().gram(i)).norm() == 0.0);
    CHECK((a.stats().moment(i) - b.stats().moment(i)).norm() == 0.0);
  }
}

TEST_CASE("replayed history equals batch-constructed stats") {
  Rng rng(98);
  const HierModelSpec spec = random_weights_spec(2, 4, 2, rng);
  const auto history = random_history(spec, 100, rng);
  GHierTSAgent agent(spec);
  for (const auto& rec : history) agent.observe(rec.x, rec.action, rec.y);
  const SufficientStats batch =
      stats_from_history(spec.K, spec.d, history, spec.sigma);
  for (Index i = 0; i < spec.K; ++i) {
    CHECK((agent.stats().gram(i) - batch.gram(i)).norm() < 1e-14);
    CHECK((agent.stats().moment(i) - batch.moment(i)).norm() < 1e-14);
    CHECK(agent.stats().pulls(i) == batch.pulls(i));
  }
}

TEST_CASE("observe then act with zeroed covariances reflects the data") {
  // One latent, one action, near-zero noise: after observing y = 5 at x = 1
  // the sampled parameter concentrates on the ridge estimate.
  HierModelSpec spec;
  spec.L = spec.K = spec.d = 1;
  spec.mu_psi = Vec::Zero(1);
  spec.sigma_psi = Mat::Identity(1, 1) * 100.0;  // diffuse prior
  spec.sigma0 = {1e-8 * Mat::Identity(1, 1)};
  spec.mixing = WeightsMixing{Mat::Ones(1, 1)};
  spec.sigma = 0.01;
  GHierTSAgent agent(spec);
  for (int rep = 0; rep < 50; ++rep) agent.observe(Vec::Ones(1), 0, 5.0);
  Rng rng(99);
  const ActResult act = agent.act(Vec::Ones(1), rng);
  CHECK(act.sampled_theta[0](0) == doctest::Approx(5.0).epsilon(0.01));
}

TEST_CASE("agent path never allocates a Kd-dimensional gaussian") {
  Rng rng(100);
  const HierModelSpec spec = random_weights_spec(2, 8, 2, rng);  // Kd = 16 > Ld = 4
  std::vector<std::unique_ptr<Agent>> agents;
  agents.push_back(std::make_unique<GHierTSAgent>(spec));
  agents.push_back(std::make_unique<LinTSAgent>(spec));
  agents.push_back(std::make_unique<LinUCBAgent>(spec, 1.0));
  agents.push_back(std::make_unique<HierTSAgent>(spec));
  HierModelSpec diag_spec = spec;
  diag_spec.sigma_psi = 2.0 * Mat::Identity(spec.L * spec.d, spec.L * spec.d);
  agents.push_back(std::make_unique<GHierTSFaAgent>(diag_spec));

  for (auto& agent : agents) {
    detail::GaussianDimTracker::active = true;
    detail::GaussianDimTracker::max_dim = 0;
    for (int t = 0; t < 5; ++t) {
      const Vec x = random_vector(spec.d, rng);
      const ActResult act = agent->act(x, rng);
      agent->observe(x, act.action, rng.uniform(-1.0, 1.0));
    }
    detail::GaussianDimTracker::active = false;
    CHECK(detail::GaussianDimTracker::max_dim <= spec.L * spec.d);
  }
}

TEST_CASE("agent registry round-trips names") {
  for (AgentKind kind : {AgentKind::GHierTS, AgentKind::GHierTSFa, AgentKind::LinTS,
                         AgentKind::LinUCB, AgentKind::HierTS, AgentKind::IndTS}) {
    CHECK(agent_kind_from_name(agent_kind_name(kind)) == kind);
  }
  Rng rng(101);
  const HierModelSpec spec = random_weights_spec(1, 2, 1, rng);
  AgentOptions options;
  options.linucb_alpha = 0.5;
  auto agent = make_agent(AgentKind::LinUCB, spec, options);
  CHECK(dynamic_cast<LinUCBAgent*>(agent.get())->alpha() == 0.5);
  CHECK_THROWS_AS(agent_kind_from_name("nope"), ValidationError);
}

TEST_CASE("g-hierts runs on matrices mixing and tracks the weights route") {
  Rng rng(102);
  const HierModelSpec wspec = random_weights_spec(2, 4, 2, rng);
  const HierModelSpec mspec = testutil::to_matrices_variant(wspec);
  GHierTSAgent wagent(wspec), magent(mspec);
  const auto history = random_history(wspec, 12, rng);
  for (const auto& rec : history) {
    wagent.observe(rec.x, rec.action, rec.y);
    magent.observe(rec.x, rec.action, rec.y);
  }
  // The two assembly routes agree to rounding; with a shared seed the sampled
  // parameters coincide far below any decision margin.
  for (int round = 0; round < 20; ++round) {
    const Vec x = random_vector(2, rng);
    Rng a(500 + round), b(500 + round);
    const ActResult rw = wagent.act(x, a);
    const ActResult rm = magent.act(x, b);
    CHECK(rw.action == rm.action);
    for (std::size_t i = 0; i < rw.sampled_theta.size(); ++i)
      CHECK((rw.sampled_theta[i] - rm.sampled_theta[i]).norm() < 1e-9);
  }
}

TEST_CASE("observe rejects out-of-range actions") {
  Rng rng(103);
  const HierModelSpec spec = random_weights_spec(1, 3, 2, rng);
  GHierTSAgent agent(spec);
  CHECK_THROWS_AS(agent.observe(random_vector(2, rng), 3, 0.0), DimensionMismatch);
  CHECK_THROWS_AS(agent.observe(random_vector(2, rng), -1, 0.0), DimensionMismatch);
}
