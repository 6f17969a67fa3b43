#include "treefx/simulation.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace treefx;

namespace {

BenchmarkSpec tiny_spec(int jobs) {
  BenchmarkSpec spec = BenchmarkSpec::desk(DgpKind::Hahn);
  spec.n = 60;
  spec.p = 5;
  spec.replications = 2;
  spec.sampler.num_trees = 10;
  spec.sampler.burn_in = 10;
  spec.sampler.num_draws = 10;
  spec.sampler.thinning = 1;
  spec.propensity_sampler = spec.sampler;
  spec.bcf_alpha_trees = 5;
  spec.seed = 99;
  spec.jobs = jobs;
  return spec;
}

}  // namespace

TEST_CASE("effect step functions") {
  CHECK(hahn_alpha(0.5) == 0.75);
  CHECK(hahn_alpha(-1.0) == 0.0);
  CHECK(hahn_alpha(1.0) == 1.0);
  CHECK(hahn_alpha(-0.75) == 0.0);  // indicators are strict
  CHECK(friedman_alpha(0.3) == 0.5);
  CHECK(friedman_alpha(0.9) == 1.0);
  CHECK(friedman_alpha(0.6) == 0.75);
}

TEST_CASE("Friedman surface at the centre") {
  const double expected = 10.0 * std::sin(std::numbers::pi / 4.0) + 0.0 + 5.0 + 2.5;
  CHECK(friedman_surface(0.5, 0.5, 0.5, 0.5, 0.5) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(friedman_surface(0.5, 0.5, 0.5, 0.5, 0.5) == doctest::Approx(14.571).epsilon(1e-4));
}

TEST_CASE("assignment rule and noise scale") {
  CHECK(mu_rule(0.1, 0.2) == 1.0);
  CHECK(mu_rule(0.2, 0.2) == -1.0);
  Eigen::VectorXd theta(3);
  theta << -1.0, 0.4, 1.8;
  CHECK(sigma_rule(theta) == doctest::Approx(0.35));

  Rng rng(4);
  const DgpSample s = gen_hahn(20000, 4, rng);
  for (Eigen::Index i = 0; i < 50; ++i) {
    if (s.X(i, 0) < s.X(i, 1)) {
      CHECK(s.pi_true(i) == doctest::Approx(0.8413447460685429));
    } else {
      CHECK(s.pi_true(i) == doctest::Approx(1.0 - 0.8413447460685429));
    }
  }
  // y minus its systematic part has sd sigma_used
  const Eigen::VectorXd resid = s.y - s.prognostic - s.mu_true - (s.z.cast<double>().array() * s.alpha_true.array()).matrix();
  const double sd = std::sqrt((resid.array() - resid.mean()).square().sum() / (resid.size() - 1));
  CHECK(sd == doctest::Approx(s.sigma_used).epsilon(0.03));
  CHECK(s.sigma_used == doctest::Approx(sigma_rule(s.theta_true)));
  // treated share tracks the propensity
  CHECK(s.z.cast<double>().mean() == doctest::Approx(s.pi_true.mean()).epsilon(0.03));
}

TEST_CASE("true CATE is the mean of the true effects") {
  for (DgpKind kind : {DgpKind::Hahn, DgpKind::Friedman, DgpKind::Hill}) {
    Rng rng(8);
    const DgpSample s = generate(kind, 333, 7, rng);
    CHECK(s.cate_true == s.alpha_true.mean());
    CHECK(s.y.size() == 333);
  }
}

TEST_CASE("Hill-style coefficients") {
  Rng rng(12);
  double total = 0.0;
  const int reps = 20000;
  for (int r = 0; r < reps; ++r) {
    const DgpSample s = gen_hill_synthetic(2, rng);
    REQUIRE(s.beta.size() == 6);
    total += s.beta.sum();
  }
  CHECK(total / (6.0 * reps) == doctest::Approx(3.0).epsilon(0.01));

  Rng rng2(13);
  const DgpSample s = gen_hill_synthetic(5000, rng2);
  CHECK(s.sigma_used == 0.5);
  CHECK(s.X.cols() == 6);
  for (int l = 0; l < 3; ++l) CHECK(std::find(s.relevant.begin(), s.relevant.end(), l) != s.relevant.end());
}

TEST_CASE("generators are reproducible and validate their shape") {
  Rng a(21);
  Rng b(21);
  const DgpSample s1 = gen_friedman(50, 6, a);
  const DgpSample s2 = gen_friedman(50, 6, b);
  CHECK(s1.X == s2.X);
  CHECK(s1.y == s2.y);
  CHECK(s1.z == s2.z);
  CHECK(s1.X.minCoeff() >= 0.0);
  CHECK(s1.X.maxCoeff() <= 1.0);
  Rng c(1);
  CHECK_THROWS(gen_hahn(10, 2, c));
  CHECK_THROWS(gen_friedman(10, 4, c));
}

TEST_CASE("model labels") {
  CHECK(parse_model("Oracle-BART").id() == ModelConfig{PropensityMode::Oracle, ModelFamily::Bart}.id());
  CHECK(parse_model("ps-dart").label() == "PS-DART");
  CHECK(parse_model("Rand-BCF").family == ModelFamily::Bcf);
  CHECK_THROWS(parse_model("Oracle-XYZ"));
  CHECK(all_models().size() == 15);
  CHECK(parse_dgp("friedman") == DgpKind::Friedman);
  CHECK_THROWS(parse_dgp("nope"));
}

TEST_CASE("relevant columns include propensity and treatment") {
  Rng rng(2);
  const DgpSample s = gen_hahn(20, 5, rng);
  const Design d = make_design(s.dataset(), s.pi_true, true);
  const auto rel = relevant_columns(s, d);
  CHECK(rel == std::vector<bool>{true, true, true, false, false, true, true});
}

TEST_CASE("metric summaries") {
  const MetricSummary m = summarize({1.0, 2.0, 3.0, 4.0});
  CHECK(m.mean == 2.5);
  CHECK(m.sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(m.count == 4);
  CHECK(summarize({}).count == 0);
  CHECK(summarize({7.0}).sd == 0.0);
}

TEST_CASE("benchmark output does not depend on the worker count") {
  const BenchmarkReport serial = run_benchmark(tiny_spec(1));
  const BenchmarkReport parallel = run_benchmark(tiny_spec(4));
  REQUIRE(serial.cells.size() == 30);
  CHECK(report_csv(serial) == report_csv(parallel));
  CHECK(report_json(serial) == report_json(parallel));
  for (const CellResult& c : serial.cells) {
    CHECK_MESSAGE(c.ok, c.error);
    if (c.model.propensity == PropensityMode::Vanilla) {
      CHECK(c.ps_selected == -1);
    } else {
      CHECK(c.ps_selected >= 0);
    }
  }
  const auto agg = serial.aggregate();
  CHECK(agg.size() == 15);
  const ModelAggregate* oracle = serial.find(agg, "Oracle-BCF");
  REQUIRE(oracle != nullptr);
  CHECK(oracle->succeeded == 2);
  CHECK(oracle->has_propensity);

  const std::string csv = report_csv(serial);
  CHECK(csv.rfind("# treefx ", 0) == 0);
  CHECK(csv.find("# seed: 99") != std::string::npos);
}
