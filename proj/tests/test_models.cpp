#include "test_util.hpp"
#include "treefx/effects.hpp"
#include "treefx/models.hpp"
#include "treefx/selection.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <numbers>

using namespace treefx;

namespace {

double phi(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

Dataset noise_dataset(int n, int p, std::uint64_t seed, double (*signal)(const Eigen::RowVectorXd&), double noise) {
  Rng rng(seed);
  Dataset d;
  d.X.resize(n, p);
  d.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) d.X(i, j) = rng.uniform();
    d.y(i) = signal(d.X.row(i)) + rng.normal(0.0, noise);
  }
  for (int j = 0; j < p; ++j) d.column_names.push_back("x" + std::to_string(j + 1));
  return d;
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  return (da * db).sum() / std::sqrt((da * da).sum() * (db * db).sum());
}

}  // namespace

TEST_CASE("constant-plus-noise regression is calibrated") {
  const Dataset d = noise_dataset(150, 2, 31, [](const Eigen::RowVectorXd&) { return 4.0; }, 0.5);
  BartOptions opt;
  opt.sampler = testing::short_chain(50, 300, 400);
  const FitResult fit = fit_bart(make_design(d, std::nullopt, false), d.y, opt);
  REQUIRE(fit.num_draws() == 400);
  int covered = 0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const Eigen::VectorXd col = fit.train_fit.col(i);
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().sum() / (col.size() - 1));
    covered += std::abs(mean - 4.0) <= 2.0 * sd ? 1 : 0;
  }
  CHECK(covered >= static_cast<int>(0.95 * d.rows()));
  const double sigma_mean = std::accumulate(fit.sigma.begin(), fit.sigma.end(), 0.0) / fit.sigma.size();
  CHECK(sigma_mean == doctest::Approx(0.5).epsilon(0.2));
}

TEST_CASE("stored forests reproduce the cached training fit") {
  const Dataset d = noise_dataset(80, 3, 2, [](const Eigen::RowVectorXd& x) { return 3.0 * x(0) + (x(1) > 0.5 ? 1.0 : 0.0); }, 0.1);
  BartOptions opt;
  opt.sampler = testing::short_chain(20, 100, 60);
  opt.sampler.thinning = 3;
  const Design design = make_design(d, std::nullopt, false);
  const FitResult fit = fit_bart(design, d.y, opt);
  CHECK(fit.num_draws() == 20);
  CHECK(fit.usage.rows() == 20);
  const Eigen::MatrixXd again = fit.predict_draws(design.X);
  CHECK((again - fit.train_fit).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("model input validation") {
  Dataset d = noise_dataset(10, 1, 3, [](const Eigen::RowVectorXd&) { return 0.0; }, 1.0);
  BartOptions opt;
  opt.sampler = testing::short_chain(5, 5, 5);
  Design empty;
  empty.X.resize(10, 0);
  CHECK_THROWS_AS(fit_bart(empty, d.y, opt), DataError);
  CHECK_THROWS_WITH_AS(fit_bart(make_design(d, std::nullopt, false), Eigen::VectorXd::Ones(10), opt),
                       "degenerate response", DataError);
  Eigen::VectorXi one_arm = Eigen::VectorXi::Ones(10);
  CHECK_THROWS_AS(fit_probit(make_design(d, std::nullopt, false), one_arm, opt), DataError);
  CHECK_THROWS_AS(make_design(d, std::nullopt, true), DataError);
}

TEST_CASE("Dirichlet prior picks out the signal variable") {
  const Dataset d = noise_dataset(300, 20, 41, [](const Eigen::RowVectorXd& x) { return 2.0 * x(4); }, 0.1);
  BartOptions opt;
  opt.sampler = testing::short_chain(50, 400, 300);
  opt.split_prior = SplitPriorKind::Dirichlet;
  const FitResult fit = fit_bart(make_design(d, std::nullopt, false), d.y, opt);
  const Eigen::VectorXd pip = compute_pip(fit.usage);
  CHECK(pip(4) > 0.5);
  std::vector<double> noise;
  for (int j = 0; j < 20; ++j) {
    if (j != 4) noise.push_back(pip(j));
  }
  std::nth_element(noise.begin(), noise.begin() + noise.size() / 2, noise.end());
  CHECK(noise[noise.size() / 2] < 0.5);
  // theta moved off its starting value and s concentrates on the signal
  const auto summary = dirichlet_summary(fit.s);
  CHECK(summary.mean(4) > 0.3);
}

TEST_CASE("uniform-prior regression uses nearly every variable") {
  const Dataset d = noise_dataset(200, 30, 43, [](const Eigen::RowVectorXd& x) { return 2.0 * x(0) + x(1); }, 0.2);
  BartOptions opt;
  opt.sampler = testing::short_chain(200, 200, 100);
  const FitResult fit = fit_bart(make_design(d, std::nullopt, false), d.y, opt);
  const Eigen::VectorXd pip = compute_pip(fit.usage);
  CHECK(pip.minCoeff() > 0.5);
}

TEST_CASE("probit propensity tracks the true assignment probability") {
  Rng rng(47);
  const int n = 1000;
  Dataset d;
  d.X.resize(n, 2);
  d.y = Eigen::VectorXd::Zero(n);
  Eigen::VectorXi z(n);
  Eigen::VectorXd truth(n);
  for (int i = 0; i < n; ++i) {
    d.X(i, 0) = rng.normal();
    d.X(i, 1) = rng.normal();
    truth(i) = phi(d.X(i, 0) < d.X(i, 1) ? 1.0 : -1.0);
    z(i) = rng.uniform() < truth(i) ? 1 : 0;
  }
  d.column_names = {"x1", "x2"};
  BartOptions opt;
  opt.sampler = testing::short_chain(50, 300, 300);
  const ProbitFit pf = fit_probit(make_design(d, std::nullopt, false), z, opt);
  CHECK(pf.pihat.minCoeff() > 0.0);
  CHECK(pf.pihat.maxCoeff() < 1.0);
  CHECK(pearson(pf.pihat, truth) > 0.8);
  for (double sigma : pf.fit.sigma) CHECK(sigma == 1.0);

  // flipping the labels mirrors the estimate
  const Eigen::VectorXi flipped = (1 - z.array()).matrix();
  const ProbitFit pf2 = fit_probit(make_design(d, std::nullopt, false), flipped, opt);
  const double gap = (pf2.pihat - (1.0 - pf.pihat.array()).matrix()).cwiseAbs().mean();
  CHECK(gap < 0.05);
}

TEST_CASE("probit with an empty forest gives one half") {
  FitResult fit;
  fit.kind = ModelKind::Probit;
  fit.names = {"x"};
  Forest f;
  f.trees = {Tree(0.0), Tree(0.0)};
  fit.forests = {f, f};
  const Eigen::VectorXd p = fit.predict_probability(Eigen::MatrixXd::Random(4, 1));
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(p(i) == 0.5);
}

TEST_CASE("logistic regression by IRLS") {
  SUBCASE("intercept-only model returns the sample rate") {
    Eigen::MatrixXd X(8, 0);
    Eigen::VectorXi z(8);
    z << 1, 0, 0, 1, 1, 0, 1, 1;
    const GlmResult r = fit_glm_propensity(X, z);
    CHECK(r.converged);
    for (Eigen::Index i = 0; i < 8; ++i) CHECK(r.probability(i) == doctest::Approx(5.0 / 8.0));
  }
  SUBCASE("separable data falls back to a ridge penalty") {
    Eigen::MatrixXd X(6, 1);
    X << -3, -2, -1, 1, 2, 3;
    Eigen::VectorXi z(6);
    z << 0, 0, 0, 1, 1, 1;
    const GlmResult r = fit_glm_propensity(X, z);
    CHECK(r.ridge > 0.0);
    CHECK(r.coefficients.allFinite());
    CHECK_FALSE(r.warning.empty());
    CHECK(r.probability(5) > 0.5);
  }
  SUBCASE("coefficients are recovered on a large sample") {
    Rng rng(53);
    const int n = 100000;
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXi z(n);
    for (int i = 0; i < n; ++i) {
      X(i, 0) = rng.normal();
      X(i, 1) = rng.normal();
      const double eta = -0.5 + 1.0 * X(i, 0) - 0.8 * X(i, 1);
      z(i) = rng.uniform() < 1.0 / (1.0 + std::exp(-eta)) ? 1 : 0;
    }
    const GlmResult r = fit_glm_propensity(X, z);
    CHECK(r.converged);
    CHECK(r.coefficients(0) == doctest::Approx(-0.5).epsilon(0.05));
    CHECK(r.coefficients(1) == doctest::Approx(1.0).epsilon(0.05));
    CHECK(r.coefficients(2) == doctest::Approx(-0.8).epsilon(0.05));
  }
}

TEST_CASE("BCF recovers a homogeneous effect") {
  Rng rng(59);
  const int n = 1000;
  Dataset d;
  d.X.resize(n, 3);
  d.y.resize(n);
  Eigen::VectorXi z(n);
  Eigen::VectorXd pi(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) d.X(i, j) = rng.normal();
    pi(i) = phi(0.5 * d.X(i, 0));
    z(i) = rng.uniform() < pi(i) ? 1 : 0;
    d.y(i) = d.X(i, 0) + 0.5 * z(i) + rng.normal(0.0, 0.1);
  }
  d.column_names = {"x1", "x2", "x3"};
  BcfOptions opt;
  opt.sampler = testing::short_chain(100, 300, 300);
  const Design design = make_design(d, pi, false);
  const BcfFitResult fit = fit_bcf(design, d.y, z, opt);
  const Eigen::VectorXd c = cate(estimate_ite_bcf(fit, design.X));
  CHECK(std::abs(c.mean() - 0.5) < 0.1);

  // total fit decomposes into prognostic and effect parts
  for (int k = 0; k < fit.num_draws(); k += 37) {
    for (Eigen::Index i = 0; i < n; i += 11) {
      CHECK(std::abs(fit.m_fit(k, i) + fit.alpha_fit(k, i) * z(i) - fit.total_fit(k, i)) < 1e-10);
    }
  }
  // forest snapshots reproduce the cached effect draws
  CHECK((fit.effect_draws(design.X) - fit.alpha_fit).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((fit.prognostic_draws(design.X) - fit.m_fit).cwiseAbs().maxCoeff() < 1e-9);
  for (double v : fit.nu_alpha) CHECK(v > 0.0);

  Dataset with_z = d;
  with_z.z = z;
  CHECK_THROWS_AS(fit_bcf(make_design(with_z, pi, true), d.y, z, opt), DataError);
  CHECK_THROWS_AS(fit_bcf(design, d.y, Eigen::VectorXi::Zero(n), opt), DataError);
}
