#include "treefx/effects.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace treefx {

EffectDraws estimate_ite_bart(const FitResult& fit, const Eigen::MatrixXd& X) {
  if (fit.treatment_col < 0) throw DataError("model was not fit with a treatment column");
  if (fit.kind != ModelKind::Regression) throw DataError("treatment effects need a regression fit");
  if (X.cols() != fit.num_vars()) throw DataError("covariate matrix has the wrong number of columns");
  Eigen::MatrixXd treated = X;
  Eigen::MatrixXd control = X;
  treated.col(fit.treatment_col).setOnes();
  control.col(fit.treatment_col).setZero();
  // The scaler is affine, so the difference is range() times the scaled difference.
  EffectDraws out;
  out.ite.resize(fit.num_draws(), X.rows());
  const double range = fit.scaler.range();
  for (int d = 0; d < fit.num_draws(); ++d) {
    const Forest& forest = fit.forests[static_cast<std::size_t>(d)];
    out.ite.row(d) = ((forest.predict(treated) - forest.predict(control)) * range).transpose();
  }
  return out;
}

EffectDraws estimate_ite_bcf(const BcfFitResult& fit, const Eigen::MatrixXd& X) {
  return EffectDraws{fit.effect_draws(X)};
}

Eigen::VectorXd cate(const EffectDraws& effects) {
  const Eigen::Index n = effects.ite.cols();
  Eigen::VectorXd out(effects.ite.rows());
  for (Eigen::Index d = 0; d < effects.ite.rows(); ++d) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) sum += effects.ite(d, i);
    out(d) = sum / static_cast<double>(n);
  }
  return out;
}

double quantile(const Eigen::VectorXd& draws, double prob) {
  if (draws.size() == 0) throw std::invalid_argument("quantile of empty draws");
  if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("quantile probability outside [0, 1]");
  std::vector<double> sorted(draws.data(), draws.data() + draws.size());
  std::sort(sorted.begin(), sorted.end());
  const double h = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::pair<double, double> credible_interval(const Eigen::VectorXd& draws, double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("credible level must lie in (0, 1)");
  if (draws.size() == 0) throw std::invalid_argument("credible interval of empty draws");
  const double tail = (1.0 - level) / 2.0;
  return {quantile(draws, tail), quantile(draws, 1.0 - tail)};
}

double rmse(const Eigen::VectorXd& estimates, const Eigen::VectorXd& truth) {
  if (estimates.size() != truth.size()) throw std::invalid_argument("rmse: length mismatch");
  if (estimates.size() == 0) throw std::invalid_argument("rmse: empty input");
  return std::sqrt((estimates - truth).squaredNorm() / static_cast<double>(estimates.size()));
}

}  // namespace treefx
