#include "test_util.hpp"
#include "treefx/effects.hpp"
#include "treefx/ice_pdp.hpp"
#include "treefx/simulation.hpp"

#include <doctest.h>

#include <cmath>

using namespace treefx;

namespace {

Eigen::MatrixXd random_matrix(int n, int p, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd X(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) X(i, j) = rng.normal();
  }
  return X;
}

BatchPredictor rowwise(double (*f)(const Eigen::RowVectorXd&)) {
  return [f](const Eigen::MatrixXd& X) {
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = f(X.row(i));
    return out;
  };
}

double additive(const Eigen::RowVectorXd& x) { return std::sin(x(0)) + x(1) * x(2) - 3.0 * x(2); }
double interacting(const Eigen::RowVectorXd& x) { return x(0) * x(1) + std::exp(0.3 * x(0)); }

}  // namespace

TEST_CASE("observed grid is sorted and distinct") {
  Eigen::MatrixXd X(5, 1);
  X << 3, 1, 3, 2, 1;
  const Eigen::VectorXd g = observed_grid(X, 0);
  REQUIRE(g.size() == 3);
  CHECK(g(0) == 1.0);
  CHECK(g(1) == 2.0);
  CHECK(g(2) == 3.0);
  CHECK_THROWS(observed_grid(X, 1));
}

TEST_CASE("constant and identity predictors") {
  const Eigen::MatrixXd X = random_matrix(30, 3, 1);
  const CurveSet c = ice_curves([](const Eigen::MatrixXd& M) { return Eigen::VectorXd::Constant(M.rows(), 2.5); }, X, 1);
  CHECK(c.ice.rows() == 30);
  CHECK(c.ice.cols() == 30);
  CHECK((c.ice.array() - 2.5).abs().maxCoeff() < 1e-10);
  CHECK((c.pdp.array() - 2.5).abs().maxCoeff() < 1e-10);

  const CurveSet id = ice_curves([](const Eigen::MatrixXd& M) -> Eigen::VectorXd { return M.col(1); }, X, 1);
  for (Eigen::Index g = 0; g < id.grid.size(); ++g) {
    CHECK(std::abs(id.pdp(g) - id.grid(g)) < 1e-10);
    CHECK((id.ice.col(g).array() - id.grid(g)).abs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("ICE curves of an additive function are parallel") {
  const Eigen::MatrixXd X = random_matrix(25, 3, 2);
  const CurveSet c = ice_curves(rowwise(additive), X, 0);
  for (Eigen::Index i = 1; i < c.ice.rows(); ++i) {
    const Eigen::VectorXd diff = c.ice.row(i) - c.ice.row(0);
    CHECK((diff.array() - diff(0)).abs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("PDP equals the mean of the ICE curves") {
  const Eigen::MatrixXd X = random_matrix(40, 2, 3);
  const BatchPredictor f = rowwise(interacting);
  const CurveSet c = ice_curves(f, X, 0);
  const Eigen::VectorXd direct = pdp_curve(f, X, 0);
  CHECK((direct - c.pdp).cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::VectorXd means = c.ice.colwise().mean().transpose();
  CHECK((means - c.pdp).cwiseAbs().maxCoeff() < 1e-12);

  // the observed grid reproduces the n x n evaluation
  for (Eigen::Index g = 0; g < c.grid.size(); g += 7) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < X.rows(); ++j) {
      Eigen::RowVectorXd x = X.row(j);
      x(0) = c.grid(g);
      acc += interacting(x);
    }
    CHECK(std::abs(acc / static_cast<double>(X.rows()) - c.pdp(g)) < 1e-12);
  }
}

TEST_CASE("single individual") {
  Eigen::MatrixXd X(1, 2);
  X << 0.3, -1.0;
  const CurveSet c = ice_curves(rowwise(interacting), X, 0);
  REQUIRE(c.grid.size() == 1);
  CHECK(c.pdp(0) == doctest::Approx(interacting(X.row(0))));
  CHECK(c.ice(0, 0) == c.pdp(0));
}

TEST_CASE("custom grid and validation") {
  const Eigen::MatrixXd X = random_matrix(10, 2, 4);
  Eigen::VectorXd grid(3);
  grid << -1, 0, 1;
  const CurveSet c = ice_curves(rowwise(interacting), X, 0, grid);
  CHECK(c.grid == grid);
  CHECK(c.ice.cols() == 3);
  CHECK_THROWS(ice_curves(rowwise(interacting), X, 5));
  CHECK_THROWS(ice_curves(rowwise(interacting), X, 0, Eigen::VectorXd(0)));
}

TEST_CASE("grid and individual subsampling") {
  const Eigen::MatrixXd X = random_matrix(200, 2, 5);
  const CurveSet full = ice_curves(rowwise(interacting), X, 1);

  Rng a(9);
  const CurveSet same = subsample_grid(full, 1000, 1000, a);
  CHECK(same.grid == full.grid);
  CHECK(same.ice == full.ice);
  CHECK(same.pdp == full.pdp);

  Rng r1(11);
  Rng r2(11);
  const CurveSet s1 = subsample_grid(full, 10, 20, r1);
  const CurveSet s2 = subsample_grid(full, 10, 20, r2);
  CHECK(s1.grid.size() == 10);
  CHECK(s1.ice.rows() == 20);
  CHECK(s1.ice.cols() == 10);
  CHECK(s1.rows == s2.rows);
  CHECK(s1.ice == s2.ice);
  CHECK(s1.grid(0) == full.grid(0));
  CHECK(s1.grid(9) == full.grid(full.grid.size() - 1));
  for (std::size_t k = 1; k < s1.rows.size(); ++k) CHECK(s1.rows[k] > s1.rows[k - 1]);
  // the curve average still covers every individual
  for (Eigen::Index g = 0; g < s1.grid.size(); ++g) {
    Eigen::Index pos = 0;
    while (full.grid(pos) != s1.grid(g)) ++pos;
    CHECK(s1.pdp(g) == full.pdp(pos));
  }

  const Eigen::VectorXd thin = thin_grid(full.grid, 10);
  CHECK(thin == s1.grid);
}

TEST_CASE("treatment-effect curves of fitted models") {
  SUBCASE("no dependence on z gives flat zero curves") {
    FitResult fit;
    fit.names = {"x1", "x2", "z"};
    fit.treatment_col = 2;
    Tree t;
    const int l = t.grow(0, 0, 0, 0.0);
    t.node(l).mu = -0.2;
    t.node(t.node(0).right).mu = 0.3;
    Forest f;
    f.trees = {t};
    fit.forests = {f, f};
    Eigen::MatrixXd X = random_matrix(15, 3, 6);
    for (Eigen::Index i = 0; i < 15; ++i) X(i, 2) = i % 2;
    const CurveSet c = ice_ite_curves(fit, X, 0);
    CHECK(c.ice.cwiseAbs().maxCoeff() == 0.0);
    CHECK(pdp_cate_curve(fit, X, 0).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("constant effect forest gives flat curves at the effect") {
    BcfFitResult fit;
    fit.names = {"x1", "x2"};
    Forest f;
    f.trees = {Tree(0.1)};
    fit.alpha_forests = {f};
    fit.m_forests = {f};
    fit.scaler = ResponseScaler(0.0, 5.0);
    const Eigen::MatrixXd X = random_matrix(12, 2, 7);
    const CurveSet c = ice_ite_curves(fit, X, 1);
    CHECK((c.ice.array() - 0.5).abs().maxCoeff() < 1e-12);
    const Eigen::VectorXd pdp = pdp_cate_curve(fit, X, 1);
    CHECK((pdp.array() - 0.5).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("treatment-effect PDP of a fitted BCF model") {
  Rng rng(3);
  const DgpSample s = gen_hahn(300, 5, rng);
  BcfOptions opt;
  opt.sampler = testing::short_chain(50, 100, 60);
  const Design design = make_design(s.dataset(), s.pi_true, false);
  const BcfFitResult fit = fit_bcf(design, s.y, s.z, opt);

  const CurveSet c = ice_ite_curves(fit, design.X, 2);
  const Eigen::VectorXd mean_of_ice = c.ice.colwise().mean().transpose();
  CHECK((pdp_cate_curve(fit, design.X, 2) - mean_of_ice).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((c.pdp - mean_of_ice).cwiseAbs().maxCoeff() < 1e-12);

  CurveSet banded = subsample_grid(c, 15, 300, rng);
  add_pdp_bands(banded, ite_draw_predictor(fit), design.X, 0.9);
  REQUIRE(banded.pdp_lo.has_value());
  for (Eigen::Index g = 0; g < banded.grid.size(); ++g) {
    CHECK((*banded.pdp_lo)(g) <= banded.pdp(g) + 1e-12);
    CHECK((*banded.pdp_hi)(g) >= banded.pdp(g) - 1e-12);
  }
}
