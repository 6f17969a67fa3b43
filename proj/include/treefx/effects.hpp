#pragma once

#include "treefx/models.hpp"

#include <Eigen/Dense>

#include <utility>

namespace treefx {

/// Per-draw individual treatment effects (draws x n).
struct EffectDraws {
  Eigen::MatrixXd ite;

  Eigen::Index num_draws() const { return ite.rows(); }
  Eigen::Index num_individuals() const { return ite.cols(); }
  Eigen::VectorXd ite_mean() const { return ite.colwise().mean().transpose(); }
};

/// f(x, z = 1) - f(x, z = 0) per draw; every other column, including the
/// propensity, keeps its value. X uses the fit's design column layout.
EffectDraws estimate_ite_bart(const FitResult& fit, const Eigen::MatrixXd& X);

/// alpha(x) per draw.
EffectDraws estimate_ite_bcf(const BcfFitResult& fit, const Eigen::MatrixXd& X);

/// Per-draw mean over individuals.
Eigen::VectorXd cate(const EffectDraws& effects);

/// Empirical quantiles ((1 - level) / 2, (1 + level) / 2) with linear
/// interpolation between order statistics.
std::pair<double, double> credible_interval(const Eigen::VectorXd& draws, double level);

/// Linearly interpolated empirical quantile, prob in [0, 1].
double quantile(const Eigen::VectorXd& draws, double prob);

double rmse(const Eigen::VectorXd& estimates, const Eigen::VectorXd& truth);

}  // namespace treefx
