#include "oracles.hpp"
#include "treefx/sampler.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace treefx;

namespace {

SplitCandidates unit_cuts(int vars, int count) {
  std::vector<std::vector<double>> cuts(static_cast<std::size_t>(vars));
  for (auto& c : cuts) {
    for (int k = 0; k < count; ++k) c.push_back((k + 1.0) / (count + 1.0));
  }
  return SplitCandidates(cuts);
}

}  // namespace

TEST_CASE("integrated leaf likelihood matches quadrature") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng.index(30));
    const double sigma = 0.05 + rng.uniform();
    const double tau = 0.02 + rng.uniform() * 0.5;
    const double m0 = rng.normal(0.0, 0.3);
    std::vector<double> r(static_cast<std::size_t>(n));
    LeafStats stats;
    for (double& v : r) {
      v = rng.normal(0.2, 0.7);
      stats.add(v);
    }
    const double expected = testing::quadrature_leaf_log_likelihood(r, sigma, tau, m0);
    CHECK(leaf_log_likelihood(stats, sigma, tau, m0) == doctest::Approx(expected).epsilon(1e-10));
  }
  CHECK_THROWS(leaf_log_likelihood(LeafStats{}, 1.0, 1.0, 0.0));
}

TEST_CASE("leaf draw moments") {
  Rng rng(9);
  LeafStats stats;
  for (double v : {0.3, 0.5, 0.1, 0.4}) stats.add(v);
  const double sigma = 0.2;
  const double tau = 0.1;
  const double post_var = 1.0 / (4.0 / (sigma * sigma) + 1.0 / (tau * tau));
  const double post_mean = post_var * (stats.sum / (sigma * sigma));
  const int N = 100000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < N; ++i) {
    const double d = draw_leaf_value(stats, sigma, tau, 0.0, rng);
    sum += d;
    sq += d * d;
  }
  const double mean = sum / N;
  CHECK(mean == doctest::Approx(post_mean).epsilon(0.01));
  CHECK(sq / N - mean * mean == doctest::Approx(post_var).epsilon(0.02));
  // an empty leaf draws from the prior
  double prior_sum = 0.0;
  for (int i = 0; i < N; ++i) prior_sum += draw_leaf_value(LeafStats{}, sigma, tau, 0.7, rng);
  CHECK(prior_sum / N == doctest::Approx(0.7).epsilon(0.01));
}

TEST_CASE("sigma draw matches the scaled inverse chi-square mean") {
  Rng rng(13);
  const std::vector<double> e = {0.3, -0.2, 0.5, 0.1, -0.4, 0.05};
  const double nu = 3.0;
  const double lambda = 0.04;
  double ss = 0.0;
  for (double v : e) ss += v * v;
  const double expected = (nu * lambda + ss) / (nu + 6.0 - 2.0);
  double acc = 0.0;
  const int N = 200000;
  for (int i = 0; i < N; ++i) {
    const double s = draw_sigma(e, nu, lambda, rng);
    acc += s * s;
  }
  CHECK(acc / N == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("move mixture is renormalized over feasible moves") {
  const MoveProbabilities base;
  const auto root = feasible_moves(Tree{}, base);
  CHECK(root.grow == 1.0);
  CHECK(root.prune == 0.0);
  Tree t;
  t.grow(0, 0, 0, 0.5);
  const auto full = feasible_moves(t, base);
  CHECK(full.grow == doctest::Approx(0.5));
  CHECK(full.change == doctest::Approx(0.2));
}

TEST_CASE("grow proposal from a root-only tree has the expected transition ratio") {
  Rng rng(1);
  const SplitCandidates c = unit_cuts(3, 4);
  const std::vector<double> s = {0.2, 0.3, 0.5};
  for (int trial = 0; trial < 20; ++trial) {
    const Proposal p = propose_move(Tree{}, c, s, MoveProbabilities{}, rng);
    REQUIRE(p.valid);
    CHECK(p.kind == MoveKind::Grow);
    const int var = p.tree.node(0).var;
    const double forward = std::log(1.0) - std::log(1.0) + std::log(s[static_cast<std::size_t>(var)]) - std::log(4.0);
    const double backward = std::log(0.3) - std::log(1.0);
    CHECK(p.log_transition_ratio == doctest::Approx(backward - forward));
  }
}

TEST_CASE("grow then prune ratios cancel") {
  Rng rng(2);
  const SplitCandidates c = unit_cuts(2, 5);
  const std::vector<double> s = {0.4, 0.6};
  Tree t;
  t.grow(0, 0, 2, c.cut(0, 2));
  int checked = 0;
  for (int trial = 0; trial < 200 && checked < 20; ++trial) {
    const Proposal grow = propose_move(t, c, s, MoveProbabilities{}, rng);
    if (!grow.valid || grow.kind != MoveKind::Grow) continue;
    // the reverse move prunes the node just grown
    const MoveProbabilities fwd = feasible_moves(grow.tree, MoveProbabilities{});
    const MoveProbabilities rev = feasible_moves(t, MoveProbabilities{});
    std::vector<CutRange> ranges;
    available_ranges(t, grow.node, c, ranges);
    double mass = 0.0;
    for (std::size_t v = 0; v < ranges.size(); ++v) mass += ranges[v].empty() ? 0.0 : s[v];
    const auto var = static_cast<std::size_t>(grow.tree.node(grow.node).var);
    const double rule = std::log(s[var] / mass) - std::log(static_cast<double>(ranges[var].size()));
    const double expected = (std::log(fwd.prune) - std::log(static_cast<double>(grow.tree.num_prunable()))) -
                            (std::log(rev.grow) - std::log(static_cast<double>(t.num_leaves())) + rule);
    CHECK(grow.log_transition_ratio == doctest::Approx(expected));
    ++checked;
  }
  CHECK(checked == 20);
}

TEST_CASE("change proposals keep the tree shape") {
  Rng rng(4);
  const SplitCandidates c = unit_cuts(2, 5);
  const std::vector<double> s = {0.5, 0.5};
  Tree t;
  const int l = t.grow(0, 0, 2, c.cut(0, 2));
  t.grow(l, 1, 1, c.cut(1, 1));
  int seen = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Proposal p = propose_move(t, c, s, MoveProbabilities{}, rng);
    if (p.kind != MoveKind::Change) continue;
    ++seen;
    CHECK(p.valid);
    CHECK(p.tree.num_leaves() == t.num_leaves());
  }
  CHECK(seen > 10);
}

TEST_CASE("forest sampler keeps its bookkeeping consistent") {
  Rng rng(21);
  const int n = 120;
  Eigen::MatrixXd X(n, 3);
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) X(i, j) = rng.uniform();
    y[static_cast<std::size_t>(i)] = (X(i, 0) > 0.5 ? 0.3 : -0.3) + 0.2 * X(i, 1) + rng.normal(0.0, 0.05);
  }
  ForestPrior prior;
  prior.sigma_mu = compute_sigma_mu(2.0, 20);
  ForestSampler sampler(X, build_split_candidates(X), 20, prior);
  const std::vector<double> s(3, 1.0 / 3.0);
  for (int sweep = 0; sweep < 150; ++sweep) {
    sampler.sweep(y, 0.1, s, rng);
    if (sweep % 10 == 0) {
      CHECK(sampler.cache_consistent());
      CHECK(sampler.fit_discrepancy() < 1e-10);
    }
  }
  const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  const std::vector<double> incremental = sampler.partial_residual(3, y);
  const Eigen::VectorXd direct = partial_residual(yv, sampler.forest(), 3, X);
  for (int i = 0; i < n; ++i) CHECK(incremental[static_cast<std::size_t>(i)] == doctest::Approx(direct(i)).epsilon(1e-10));
  // some structure was learned
  const auto counts = split_counts(sampler.forest(), 3);
  CHECK(counts[0] > 0);
  CHECK(sampler.move_counts().accepted[0] > 0);
}

TEST_CASE("fixed seed reproduces the chain exactly") {
  auto run = [](std::uint64_t seed) {
    Rng data_rng(3);
    Eigen::MatrixXd X(60, 2);
    std::vector<double> y(60);
    for (int i = 0; i < 60; ++i) {
      X(i, 0) = data_rng.uniform();
      X(i, 1) = data_rng.uniform();
      y[static_cast<std::size_t>(i)] = X(i, 0) - 0.5;
    }
    ForestSampler sampler(X, build_split_candidates(X), 10, ForestPrior{});
    Rng rng(seed);
    const std::vector<double> s = {0.5, 0.5};
    for (int k = 0; k < 30; ++k) sampler.sweep(y, 0.1, s, rng);
    return sampler.leaf_values();
  };
  CHECK(run(99) == run(99));
  CHECK(run(99) != run(100));
}

TEST_CASE("inactive rows do not enter leaf statistics") {
  Rng rng(8);
  const int n = 40;
  Eigen::MatrixXd X(n, 1);
  std::vector<double> target(n);
  std::vector<std::uint8_t> active(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = i / static_cast<double>(n);
    active[static_cast<std::size_t>(i)] = i % 2;
    // inactive rows carry an absurd target that would dominate if counted
    target[static_cast<std::size_t>(i)] = (i % 2) ? 0.2 : 1e6;
  }
  ForestPrior prior;
  prior.sigma_mu = 0.5;
  ForestSampler sampler(X, build_split_candidates(X), 1, prior, active);
  const std::vector<double> s = {1.0};
  for (int k = 0; k < 50; ++k) sampler.sweep(target, 0.01, s, rng);
  for (double mu : sampler.leaf_values()) CHECK(std::abs(mu - 0.2) < 0.1);
}

TEST_CASE("split probability update stays on the simplex") {
  Rng rng(17);
  const std::vector<int> counts = {10, 0, 0, 3};
  const auto log_s = update_split_probabilities(counts, 0.01, rng);
  double total = 0.0;
  for (double v : log_s) total += std::exp(v);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::exp(log_s[0]) > std::exp(log_s[1]));
}

TEST_CASE("theta update stays on the grid image") {
  Rng rng(19);
  const auto grid = theta_lambda_grid(1000);
  CHECK(grid.front() == doctest::Approx(1.0 / 1001.0));
  CHECK(grid.back() == doctest::Approx(1000.0 / 1001.0));
  const std::vector<double> log_s = {std::log(0.97), std::log(0.01), std::log(0.01), std::log(0.01)};
  for (int k = 0; k < 50; ++k) {
    const double theta = update_theta(log_s, 0.5, 1.0, 4.0, grid, rng);
    CHECK(theta > 0.0);
    CHECK(theta <= 4.0 * 1000.0);
  }
}

TEST_CASE("probit latent draws respect the labels") {
  Rng rng(23);
  const std::vector<double> fit = {-2.0, 0.0, 3.0, 0.5, -0.7};
  const std::vector<int> z = {1, 0, 0, 1, 1};
  std::vector<double> latent(5);
  for (int k = 0; k < 1000; ++k) {
    probit_latent_draw(fit, z, latent, rng);
    for (std::size_t i = 0; i < 5; ++i) CHECK((z[i] == 1 ? latent[i] > 0.0 : latent[i] < 0.0));
  }
}

TEST_CASE("sampler configuration validation") {
  SamplerConfig c;
  CHECK_NOTHROW(c.validate());
  c.thinning = 0;
  CHECK_THROWS(c.validate());
  c = SamplerConfig::sparse_preset();
  CHECK(c.kept_draws() == 1000);
  CHECK(c.burn_in == 5000);
  c.moves = {0.5, 0.5, 0.5};
  CHECK_THROWS(c.validate());
}
