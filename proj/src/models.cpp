#include "treefx/models.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace treefx {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

void check_design(const Design& design, Eigen::Index n) {
  if (design.X.cols() == 0) throw DataError("design has no covariates (p = 0)");
  if (design.X.rows() != n) throw DataError("design and response have different row counts");
  if (static_cast<Eigen::Index>(design.names.size()) != design.X.cols()) {
    throw DataError("design column names do not match its columns");
  }
  if (!design.X.allFinite()) throw DataError("design contains non-finite values");
}

void check_arms(const Eigen::VectorXi& z) {
  bool treated = false;
  bool control = false;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (z(i) == 1) {
      treated = true;
    } else if (z(i) == 0) {
      control = true;
    } else {
      throw DataError("treatment must be binary (0/1)");
    }
  }
  if (!treated || !control) throw DataError("treatment must contain both treated and control rows");
}

Eigen::VectorXi usage_row(const Forest& forest, int num_vars) {
  const std::vector<bool> used = variable_usage(forest, num_vars);
  Eigen::VectorXi row(num_vars);
  for (int v = 0; v < num_vars; ++v) row(v) = used[static_cast<std::size_t>(v)] ? 1 : 0;
  return row;
}

// Shared driver of the regression and probit chains.
FitResult run_chain(const Design& design, const Eigen::VectorXd& y_scaled, const Eigen::VectorXi* labels,
                    const BartOptions& options, ResponseScaler scaler) {
  options.sampler.validate();
  const SamplerConfig& cfg = options.sampler;
  const Eigen::Index n = design.X.rows();
  const int P = design.cols();
  const bool probit = labels != nullptr;

  FitResult result;
  result.kind = probit ? ModelKind::Probit : ModelKind::Regression;
  result.split_prior = options.split_prior;
  result.options = options;
  result.scaler = scaler;
  result.names = design.names;
  result.propensity_col = design.propensity_col;
  result.treatment_col = design.treatment_col;

  ForestPrior prior;
  prior.tree = options.tree;
  prior.moves = cfg.moves;
  prior.sigma_mu = probit ? 3.0 / (options.k * std::sqrt(static_cast<double>(cfg.num_trees)))
                          : compute_sigma_mu(options.k, cfg.num_trees);

  SigmaPriorParams sigma_prior = options.sigma;
  double sigma = 1.0;
  if (!probit) {
    sigma_prior.sigma_hat = ols_sigma_hat(y_scaled, design.X);
    sigma_prior.lambda = calibrate_lambda(sigma_prior.sigma_hat, sigma_prior.nu, sigma_prior.q);
    sigma = sigma_prior.sigma_hat;
  }
  result.options.sigma = sigma_prior;

  ChainState state{
      ForestSampler(design.X, build_split_candidates(design.X, cfg.max_cuts), cfg.num_trees, prior),
      sigma,
      options.split_prior == SplitPriorKind::Dirichlet
          ? SplitVarPrior::dirichlet(P, options.dart_a, options.dart_b)
          : SplitVarPrior::uniform(P),
      false,
      options.split_prior == SplitPriorKind::Dirichlet ? theta_lambda_grid(options.theta_grid)
                                                       : std::vector<double>{},
      std::nullopt,
      {},
      0.0,
      Rng(cfg.seed)};

  if (probit) {
    const double rate = labels->cast<double>().mean();
    state.offset = boost::math::quantile(boost::math::normal_distribution<double>(), rate);
    state.latent = std::vector<double>(static_cast<std::size_t>(n), 0.0);
    state.labels.assign(labels->data(), labels->data() + n);
    result.offset = state.offset;
  }

  const int kept = cfg.kept_draws();
  result.forests.reserve(static_cast<std::size_t>(kept));
  result.usage.resize(kept, P);
  result.train_fit.resize(kept, n);
  const double range = scaler.range();
  const int dart_start = cfg.burn_in / 2;
  const std::span<const double> y_span(y_scaled.data(), static_cast<std::size_t>(n));

  int d = 0;
  const int total = cfg.burn_in + cfg.num_draws;
  for (int t = 0; t < total; ++t) {
    state.dart_active = options.split_prior == SplitPriorKind::Dirichlet && t >= dart_start;
    backfitting_sweep(state, sigma_prior, y_span);
    const int post = t - cfg.burn_in + 1;
    if (post <= 0 || post % cfg.thinning != 0 || d >= kept) continue;

    result.forests.push_back(state.forest.forest());
    result.sigma.push_back(probit ? 1.0 : state.sigma * range);
    result.s.push_back(state.split_prior.s);
    result.theta.push_back(state.split_prior.theta);
    result.usage.row(d) = usage_row(state.forest.forest(), P).transpose();
    const auto fit = state.forest.fit();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double f = fit[static_cast<std::size_t>(i)];
      result.train_fit(d, i) = probit ? f + state.offset : scaler.inverse(f);
    }
    ++d;
  }
  result.moves = state.forest.move_counts();
  return result;
}

}  // namespace

Design make_design(const Dataset& data, const std::optional<Eigen::VectorXd>& pihat, bool include_treatment) {
  const Eigen::Index n = data.rows();
  const Eigen::Index p = data.cols();
  if (include_treatment && !data.z) throw DataError("dataset has no treatment column");
  if (pihat && pihat->size() != n) throw DataError("propensity vector length does not match rows");

  Design design;
  const Eigen::Index extra = (pihat ? 1 : 0) + (include_treatment ? 1 : 0);
  design.X.resize(n, p + extra);
  design.X.leftCols(p) = data.X;
  design.names = data.column_names;
  if (design.names.size() != static_cast<std::size_t>(p)) {
    design.names.clear();
    for (Eigen::Index j = 0; j < p; ++j) design.names.push_back("x" + std::to_string(j + 1));
  }
  Eigen::Index col = p;
  if (pihat) {
    design.X.col(col) = *pihat;
    design.names.push_back("pihat");
    design.propensity_col = static_cast<int>(col++);
  }
  if (include_treatment) {
    design.X.col(col) = data.z->cast<double>();
    design.names.push_back("z");
    design.treatment_col = static_cast<int>(col);
  }
  return design;
}

Eigen::MatrixXd with_treatment(const Design& design, const Eigen::MatrixXd& X, double value) {
  if (design.treatment_col < 0) throw DataError("model was not fit with a treatment column");
  if (X.cols() != design.X.cols()) throw DataError("covariate matrix has the wrong number of columns");
  Eigen::MatrixXd out = X;
  out.col(design.treatment_col).setConstant(value);
  return out;
}

Eigen::MatrixXd FitResult::predict_draws(const Eigen::MatrixXd& X) const {
  if (X.cols() != num_vars()) throw DataError("covariate matrix has the wrong number of columns");
  Eigen::MatrixXd out(num_draws(), X.rows());
  for (int d = 0; d < num_draws(); ++d) {
    const Eigen::VectorXd f = forests[static_cast<std::size_t>(d)].predict(X);
    if (kind == ModelKind::Probit) {
      out.row(d) = (f.array() + offset).matrix().transpose();
    } else {
      out.row(d) = scaler.inverse(f).transpose();
    }
  }
  return out;
}

Eigen::VectorXd FitResult::predict_mean(const Eigen::MatrixXd& X) const {
  return predict_draws(X).colwise().mean().transpose();
}

Eigen::VectorXd FitResult::predict_probability(const Eigen::MatrixXd& X) const {
  if (kind != ModelKind::Probit) throw std::logic_error("predict_probability needs a probit fit");
  const Eigen::MatrixXd f = predict_draws(X);
  return f.unaryExpr([](double v) { return normal_cdf(v); }).colwise().mean().transpose();
}

FitResult fit_bart(const Design& design, const Eigen::VectorXd& y, const BartOptions& options) {
  check_design(design, y.size());
  if (!y.allFinite()) throw DataError("response contains non-finite values");
  auto [y_scaled, scaler] = standardize_response(y);
  return run_chain(design, y_scaled, nullptr, options, scaler);
}

ProbitFit fit_probit(const Design& design, const Eigen::VectorXi& z, const BartOptions& options) {
  check_design(design, z.size());
  check_arms(z);
  ProbitFit out;
  out.fit = run_chain(design, Eigen::VectorXd::Zero(z.size()), &z, options, ResponseScaler());
  const Eigen::MatrixXd prob = out.fit.train_fit.unaryExpr([](double v) { return normal_cdf(v); });
  out.pihat = prob.colwise().mean().transpose();
  return out;
}

GlmResult fit_glm_propensity(const Eigen::MatrixXd& X, const Eigen::VectorXi& z, int max_iter) {
  if (X.rows() != z.size()) throw DataError("covariates and treatment have different row counts");
  check_arms(z);
  const Eigen::Index n = X.rows();
  const Eigen::Index q = X.cols() + 1;
  Eigen::MatrixXd A(n, q);
  A.col(0).setOnes();
  A.rightCols(X.cols()) = X;
  const Eigen::VectorXd zd = z.cast<double>();
  const double rate = zd.mean();

  auto run = [&](double ridge, GlmResult& out) -> bool {
    out = GlmResult{};
    out.ridge = ridge;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
    beta(0) = std::log(rate / (1.0 - rate));
    Eigen::VectorXd penalty = Eigen::VectorXd::Constant(q, ridge);
    penalty(0) = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
      const Eigen::VectorXd eta = A * beta;
      const Eigen::VectorXd p =
          eta.unaryExpr([](double e) { return std::clamp(1.0 / (1.0 + std::exp(-e)), 1e-12, 1.0 - 1e-12); });
      const Eigen::VectorXd w = p.array() * (1.0 - p.array());
      Eigen::MatrixXd H = A.transpose() * w.asDiagonal() * A;
      H.diagonal() += penalty;
      const Eigen::VectorXd grad = A.transpose() * (zd - p) - penalty.cwiseProduct(beta);
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-13) return false;
      const Eigen::VectorXd step = ldlt.solve(grad);
      beta += step;
      out.iterations = it;
      if (!beta.allFinite() || beta.cwiseAbs().maxCoeff() > 1e4) return false;
      if (step.cwiseAbs().maxCoeff() < 1e-9) {
        out.converged = true;
        break;
      }
    }
    // fitted probabilities numerically 0 or 1 mean (quasi-)separation
    if (ridge == 0.0 && (A * beta).cwiseAbs().maxCoeff() > 30.0) return false;
    out.coefficients = beta;
    out.probability = (A * beta).unaryExpr([](double e) { return 1.0 / (1.0 + std::exp(-e)); });
    if (!out.converged) {
      out.warning = "IRLS did not converge after " + std::to_string(max_iter) + " iterations";
    }
    return true;
  };

  GlmResult out;
  if (run(0.0, out)) return out;
  if (run(1.0, out)) {
    const std::string note = "unpenalized fit singular or divergent; used ridge penalty 1";
    out.warning = out.warning.empty() ? note : note + "; " + out.warning;
    return out;
  }
  throw std::runtime_error("logistic regression failed even with a ridge penalty");
}

Eigen::MatrixXd BcfFitResult::effect_draws(const Eigen::MatrixXd& X) const {
  if (X.cols() != static_cast<Eigen::Index>(names.size())) {
    throw DataError("covariate matrix has the wrong number of columns");
  }
  Eigen::MatrixXd out(num_draws(), X.rows());
  for (int d = 0; d < num_draws(); ++d) {
    out.row(d) = (alpha_forests[static_cast<std::size_t>(d)].predict(X) * scaler.range()).transpose();
  }
  return out;
}

Eigen::MatrixXd BcfFitResult::prognostic_draws(const Eigen::MatrixXd& X) const {
  if (X.cols() != static_cast<Eigen::Index>(names.size())) {
    throw DataError("covariate matrix has the wrong number of columns");
  }
  Eigen::MatrixXd out(num_draws(), X.rows());
  for (int d = 0; d < num_draws(); ++d) {
    out.row(d) = scaler.inverse(m_forests[static_cast<std::size_t>(d)].predict(X)).transpose();
  }
  return out;
}

BcfFitResult fit_bcf(const Design& design, const Eigen::VectorXd& y, const Eigen::VectorXi& z,
                     const BcfOptions& options) {
  check_design(design, y.size());
  if (design.treatment_col >= 0) throw DataError("BCF design must not include the treatment column");
  if (z.size() != y.size()) throw DataError("treatment and response have different lengths");
  check_arms(z);
  if (!y.allFinite()) throw DataError("response contains non-finite values");
  if (design.propensity_col >= 0) {
    const auto pi = design.X.col(design.propensity_col);
    if ((pi.array() <= 0.0).any() || (pi.array() >= 1.0).any()) {
      throw DataError("propensity values must lie strictly inside (0, 1)");
    }
  }
  options.sampler.validate();
  const SamplerConfig& cfg = options.sampler;
  const BcfPriorParams& ap = options.alpha;
  if (ap.num_trees < 1) throw std::invalid_argument("effect forest needs at least one tree");
  if (!(ap.nu0 > 0.0)) throw std::invalid_argument("nu0 must be positive");

  const Eigen::Index n = y.size();
  const int P = design.cols();
  auto [ys, scaler] = standardize_response(y);

  BcfFitResult result;
  result.options = options;
  result.scaler = scaler;
  result.names = design.names;
  result.propensity_col = design.propensity_col;

  Eigen::MatrixXd with_z(n, P + 1);
  with_z.leftCols(P) = design.X;
  with_z.col(P) = z.cast<double>();
  SigmaPriorParams sigma_prior = options.sigma;
  sigma_prior.sigma_hat = ols_sigma_hat(ys, with_z);
  sigma_prior.lambda = calibrate_lambda(sigma_prior.sigma_hat, sigma_prior.nu, sigma_prior.q);
  result.options.sigma = sigma_prior;

  const SplitCandidates candidates = build_split_candidates(design.X, cfg.max_cuts);
  ForestPrior m_prior;
  m_prior.tree = options.tree;
  m_prior.moves = cfg.moves;
  m_prior.sigma_mu = compute_sigma_mu(options.k, cfg.num_trees);

  const double L = ap.num_trees;
  double nu2 = ap.nu0 * ap.nu0;
  double xi = ap.nu0 * ap.nu0;
  ForestPrior a_prior;
  a_prior.tree = {ap.eta > 0.0 ? ap.eta : bcf_eta_from_alpha0(ap.alpha0, ap.num_trees), ap.beta};
  a_prior.moves = cfg.moves;
  a_prior.sigma_mu = std::sqrt(nu2 / L);

  std::vector<std::uint8_t> treated(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) treated[static_cast<std::size_t>(i)] = z(i) == 1 ? 1 : 0;

  ForestSampler m_forest(design.X, candidates, cfg.num_trees, m_prior);
  ForestSampler a_forest(design.X, candidates, ap.num_trees, a_prior, treated);
  const SplitVarPrior split = SplitVarPrior::uniform(P);
  Rng rng(cfg.seed);
  double sigma = sigma_prior.sigma_hat;

  const int kept = cfg.kept_draws();
  result.m_fit.resize(kept, n);
  result.alpha_fit.resize(kept, n);
  result.total_fit.resize(kept, n);
  result.usage.resize(kept, P);
  const double range = scaler.range();

  std::vector<double> target(static_cast<std::size_t>(n));
  std::vector<double> resid(static_cast<std::size_t>(n));
  int d = 0;
  const int total = cfg.burn_in + cfg.num_draws;
  for (int t = 0; t < total; ++t) {
    const auto a_fit = a_forest.fit();
    for (std::size_t i = 0; i < target.size(); ++i) target[i] = ys(static_cast<Eigen::Index>(i)) - a_fit[i] * treated[i];
    m_forest.sweep(target, sigma, split.s, rng);

    const auto m_fit = m_forest.fit();
    for (std::size_t i = 0; i < target.size(); ++i) target[i] = ys(static_cast<Eigen::Index>(i)) - m_fit[i];
    a_forest.sweep(target, sigma, split.s, rng);

    const auto a_new = a_forest.fit();
    for (std::size_t i = 0; i < resid.size(); ++i) resid[i] = target[i] - a_new[i] * treated[i];
    sigma = draw_sigma(resid, sigma_prior.nu, sigma_prior.lambda, rng);

    // half-Cauchy scale through its inverse-gamma mixture
    const std::vector<double> leaves = a_forest.leaf_values();
    double ss = 0.0;
    for (double mu : leaves) ss += mu * mu;
    nu2 = (L * ss / 2.0 + 1.0 / xi) / rng.gamma((static_cast<double>(leaves.size()) + 1.0) / 2.0);
    xi = (1.0 / nu2 + 1.0 / (ap.nu0 * ap.nu0)) / rng.gamma(1.0);
    a_forest.set_sigma_mu(std::sqrt(nu2 / L));

    const int post = t - cfg.burn_in + 1;
    if (post <= 0 || post % cfg.thinning != 0 || d >= kept) continue;
    result.m_forests.push_back(m_forest.forest());
    result.alpha_forests.push_back(a_forest.forest());
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const double m = scaler.inverse(m_forest.fit()[k]);
      const double a = a_new[k] * range;
      result.m_fit(d, i) = m;
      result.alpha_fit(d, i) = a;
      result.total_fit(d, i) = m + a * z(i);
    }
    const Eigen::VectorXi mu = usage_row(m_forest.forest(), P);
    const Eigen::VectorXi au = usage_row(a_forest.forest(), P);
    result.usage.row(d) = mu.cwiseMax(au).transpose();
    result.sigma.push_back(sigma * range);
    result.nu_alpha.push_back(std::sqrt(nu2) * range);
    ++d;
  }
  return result;
}

}  // namespace treefx
