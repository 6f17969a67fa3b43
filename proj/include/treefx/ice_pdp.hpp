#pragma once

#include "treefx/models.hpp"
#include "treefx/random.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <vector>

namespace treefx {

/// Predictions for every row of a covariate matrix.
using BatchPredictor = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;
/// Per-draw predictions (draws x rows) for every row of a covariate matrix.
using DrawPredictor = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

/// ICE curves of one variable and their average.
struct CurveSet {
  int var = 0;
  Eigen::VectorXd grid;             // ascending
  Eigen::MatrixXd ice;              // individuals x grid
  std::vector<Eigen::Index> rows;   // individual ids of the rows of `ice`
  Eigen::VectorXd pdp;              // over all individuals
  std::optional<Eigen::VectorXd> pdp_lo;
  std::optional<Eigen::VectorXd> pdp_hi;
};

/// Sorted distinct observed values of column `var`.
Eigen::VectorXd observed_grid(const Eigen::MatrixXd& X, int var);

/// ice(i, g) = f(x_i with column `var` set to grid[g]); pdp is the column mean.
/// The grid defaults to the observed values of the variable.
CurveSet ice_curves(const BatchPredictor& predict, const Eigen::MatrixXd& X, int var,
                    const std::optional<Eigen::VectorXd>& grid = std::nullopt);

/// Partial dependence evaluated one (grid point, individual) pair at a time.
Eigen::VectorXd pdp_curve(const BatchPredictor& predict, const Eigen::MatrixXd& X, int var,
                          const std::optional<Eigen::VectorXd>& grid = std::nullopt);

/// Posterior-mean prediction function of a fitted model.
BatchPredictor mean_predictor(const FitResult& fit);
/// Posterior-mean counterfactual difference f(x, 1) - f(x, 0).
BatchPredictor ite_predictor(const FitResult& fit);
/// Posterior-mean alpha(x).
BatchPredictor ite_predictor(const BcfFitResult& fit);
DrawPredictor ite_draw_predictor(const FitResult& fit);
DrawPredictor ite_draw_predictor(const BcfFitResult& fit);

/// ICE curves of the individual treatment effect.
CurveSet ice_ite_curves(const FitResult& fit, const Eigen::MatrixXd& X, int var,
                        const std::optional<Eigen::VectorXd>& grid = std::nullopt);
CurveSet ice_ite_curves(const BcfFitResult& fit, const Eigen::MatrixXd& X, int var,
                        const std::optional<Eigen::VectorXd>& grid = std::nullopt);

/// Average counterfactual difference at each grid value.
Eigen::VectorXd pdp_cate_curve(const FitResult& fit, const Eigen::MatrixXd& X, int var,
                               const std::optional<Eigen::VectorXd>& grid = std::nullopt);
Eigen::VectorXd pdp_cate_curve(const BcfFitResult& fit, const Eigen::MatrixXd& X, int var,
                               const std::optional<Eigen::VectorXd>& grid = std::nullopt);

/// Adds per-grid-point credible bands to `curves.pdp` from per-draw
/// partial dependence.
void add_pdp_bands(CurveSet& curves, const DrawPredictor& predict, const Eigen::MatrixXd& X,
                   double level = 0.95);

/// Evenly spaced quantile indices of the sorted grid.
Eigen::VectorXd thin_grid(const Eigen::VectorXd& grid, int max_grid);

/// Keeps at most `max_grid` grid points (evenly spaced quantile indices) and
/// at most `max_individuals` displayed curves (a seeded random subset, kept in
/// row order). The PDP stays the average over every individual.
CurveSet subsample_grid(const CurveSet& curves, int max_grid, int max_individuals, Rng& rng);

}  // namespace treefx
