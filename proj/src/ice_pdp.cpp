#include "treefx/ice_pdp.hpp"

#include "treefx/effects.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace treefx {

namespace {

void check_var(const Eigen::MatrixXd& X, int var) {
  if (var < 0 || var >= X.cols()) throw std::out_of_range("variable index out of range");
  if (X.rows() == 0) throw std::invalid_argument("no individuals");
}

Eigen::VectorXd resolve_grid(const Eigen::MatrixXd& X, int var, const std::optional<Eigen::VectorXd>& grid) {
  if (!grid) return observed_grid(X, var);
  Eigen::VectorXd g = *grid;
  if (g.size() == 0) throw std::invalid_argument("empty grid");
  std::sort(g.data(), g.data() + g.size());
  return g;
}

Eigen::VectorXd column_means(const Eigen::MatrixXd& ice) {
  Eigen::VectorXd out(ice.cols());
  for (Eigen::Index g = 0; g < ice.cols(); ++g) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < ice.rows(); ++i) sum += ice(i, g);
    out(g) = sum / static_cast<double>(ice.rows());
  }
  return out;
}

// Evenly spaced indices into a sorted sequence of length n.
std::vector<Eigen::Index> spread_indices(Eigen::Index n, int count) {
  std::vector<Eigen::Index> idx;
  if (count >= n) {
    idx.resize(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    return idx;
  }
  for (int k = 0; k < count; ++k) {
    idx.push_back(count == 1 ? 0
                             : static_cast<Eigen::Index>(std::llround(static_cast<double>(k) * (n - 1) / (count - 1))));
  }
  return idx;
}

}  // namespace

Eigen::VectorXd observed_grid(const Eigen::MatrixXd& X, int var) {
  check_var(X, var);
  std::vector<double> values(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) values[static_cast<std::size_t>(i)] = X(i, var);
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

CurveSet ice_curves(const BatchPredictor& predict, const Eigen::MatrixXd& X, int var,
                    const std::optional<Eigen::VectorXd>& grid) {
  check_var(X, var);
  CurveSet out;
  out.var = var;
  out.grid = resolve_grid(X, var, grid);
  out.ice.resize(X.rows(), out.grid.size());
  out.rows.resize(static_cast<std::size_t>(X.rows()));
  std::iota(out.rows.begin(), out.rows.end(), Eigen::Index{0});
  Eigen::MatrixXd shifted = X;
  for (Eigen::Index g = 0; g < out.grid.size(); ++g) {
    shifted.col(var).setConstant(out.grid(g));
    out.ice.col(g) = predict(shifted);
  }
  out.pdp = column_means(out.ice);
  return out;
}

Eigen::VectorXd pdp_curve(const BatchPredictor& predict, const Eigen::MatrixXd& X, int var,
                          const std::optional<Eigen::VectorXd>& grid) {
  check_var(X, var);
  const Eigen::VectorXd g = resolve_grid(X, var, grid);
  Eigen::VectorXd out(g.size());
  Eigen::MatrixXd row(1, X.cols());
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < X.rows(); ++j) {
      row = X.row(j);
      row(0, var) = g(k);
      sum += predict(row)(0);
    }
    out(k) = sum / static_cast<double>(X.rows());
  }
  return out;
}

BatchPredictor mean_predictor(const FitResult& fit) {
  return [&fit](const Eigen::MatrixXd& X) -> Eigen::VectorXd { return fit.predict_mean(X); };
}

DrawPredictor ite_draw_predictor(const FitResult& fit) {
  if (fit.treatment_col < 0) throw DataError("model was not fit with a treatment column");
  return [&fit](const Eigen::MatrixXd& X) -> Eigen::MatrixXd { return estimate_ite_bart(fit, X).ite; };
}

DrawPredictor ite_draw_predictor(const BcfFitResult& fit) {
  return [&fit](const Eigen::MatrixXd& X) -> Eigen::MatrixXd { return fit.effect_draws(X); };
}

BatchPredictor ite_predictor(const FitResult& fit) {
  DrawPredictor draws = ite_draw_predictor(fit);
  return [draws](const Eigen::MatrixXd& X) -> Eigen::VectorXd { return draws(X).colwise().mean().transpose(); };
}

BatchPredictor ite_predictor(const BcfFitResult& fit) {
  DrawPredictor draws = ite_draw_predictor(fit);
  return [draws](const Eigen::MatrixXd& X) -> Eigen::VectorXd { return draws(X).colwise().mean().transpose(); };
}

CurveSet ice_ite_curves(const FitResult& fit, const Eigen::MatrixXd& X, int var,
                        const std::optional<Eigen::VectorXd>& grid) {
  return ice_curves(ite_predictor(fit), X, var, grid);
}

CurveSet ice_ite_curves(const BcfFitResult& fit, const Eigen::MatrixXd& X, int var,
                        const std::optional<Eigen::VectorXd>& grid) {
  return ice_curves(ite_predictor(fit), X, var, grid);
}

Eigen::VectorXd pdp_cate_curve(const FitResult& fit, const Eigen::MatrixXd& X, int var,
                               const std::optional<Eigen::VectorXd>& grid) {
  return ice_ite_curves(fit, X, var, grid).pdp;
}

Eigen::VectorXd pdp_cate_curve(const BcfFitResult& fit, const Eigen::MatrixXd& X, int var,
                               const std::optional<Eigen::VectorXd>& grid) {
  return ice_ite_curves(fit, X, var, grid).pdp;
}

void add_pdp_bands(CurveSet& curves, const DrawPredictor& predict, const Eigen::MatrixXd& X, double level) {
  check_var(X, curves.var);
  Eigen::VectorXd lo(curves.grid.size());
  Eigen::VectorXd hi(curves.grid.size());
  Eigen::MatrixXd shifted = X;
  for (Eigen::Index g = 0; g < curves.grid.size(); ++g) {
    shifted.col(curves.var).setConstant(curves.grid(g));
    const Eigen::VectorXd per_draw = predict(shifted).rowwise().mean();
    const auto [l, h] = credible_interval(per_draw, level);
    lo(g) = l;
    hi(g) = h;
  }
  curves.pdp_lo = lo;
  curves.pdp_hi = hi;
}

Eigen::VectorXd thin_grid(const Eigen::VectorXd& grid, int max_grid) {
  if (max_grid < 1) throw std::invalid_argument("max_grid must be at least 1");
  const std::vector<Eigen::Index> idx = spread_indices(grid.size(), max_grid);
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out(static_cast<Eigen::Index>(k)) = grid(idx[k]);
  return out;
}

CurveSet subsample_grid(const CurveSet& curves, int max_grid, int max_individuals, Rng& rng) {
  if (max_grid < 1 || max_individuals < 1) throw std::invalid_argument("subsample limits must be at least 1");
  const std::vector<Eigen::Index> grid_idx = spread_indices(curves.grid.size(), max_grid);

  const Eigen::Index n_ind = curves.ice.rows();
  std::vector<Eigen::Index> ind(static_cast<std::size_t>(n_ind));
  std::iota(ind.begin(), ind.end(), Eigen::Index{0});
  if (max_individuals < n_ind) {
    std::shuffle(ind.begin(), ind.end(), rng.engine());
    ind.resize(static_cast<std::size_t>(max_individuals));
    std::sort(ind.begin(), ind.end());
  }

  CurveSet out;
  out.var = curves.var;
  out.grid.resize(static_cast<Eigen::Index>(grid_idx.size()));
  out.pdp.resize(out.grid.size());
  out.ice.resize(static_cast<Eigen::Index>(ind.size()), out.grid.size());
  if (curves.pdp_lo) out.pdp_lo = Eigen::VectorXd(out.grid.size());
  if (curves.pdp_hi) out.pdp_hi = Eigen::VectorXd(out.grid.size());
  for (std::size_t k = 0; k < grid_idx.size(); ++k) {
    const auto g = grid_idx[k];
    const auto kk = static_cast<Eigen::Index>(k);
    out.grid(kk) = curves.grid(g);
    out.pdp(kk) = curves.pdp(g);
    if (out.pdp_lo) (*out.pdp_lo)(kk) = (*curves.pdp_lo)(g);
    if (out.pdp_hi) (*out.pdp_hi)(kk) = (*curves.pdp_hi)(g);
    for (std::size_t r = 0; r < ind.size(); ++r) out.ice(static_cast<Eigen::Index>(r), kk) = curves.ice(ind[r], g);
  }
  for (Eigen::Index r : ind) out.rows.push_back(curves.rows[static_cast<std::size_t>(r)]);
  return out;
}

}  // namespace treefx
