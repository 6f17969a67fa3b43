#pragma once

#include "treefx/data.hpp"
#include "treefx/priors.hpp"
#include "treefx/sampler.hpp"
#include "treefx/tree.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace treefx {

/// Covariate matrix handed to a model. Columns are ordered
/// [covariates, propensity, treatment]; the last two are optional.
struct Design {
  Eigen::MatrixXd X;
  std::vector<std::string> names;
  int propensity_col = -1;
  int treatment_col = -1;

  int cols() const { return static_cast<int>(X.cols()); }
};

/// Builds a design from a dataset, appending `pihat` and/or z as requested.
Design make_design(const Dataset& data, const std::optional<Eigen::VectorXd>& pihat,
                   bool include_treatment);

/// Copy of `design` with the treatment column set to `value` in every row.
Eigen::MatrixXd with_treatment(const Design& design, const Eigen::MatrixXd& X, double value);

struct BartOptions {
  SamplerConfig sampler;
  SplitPriorKind split_prior = SplitPriorKind::Uniform;
  TreePriorParams tree;
  double k = 2.0;
  SigmaPriorParams sigma;  // lambda and sigma_hat are calibrated from the data
  double dart_a = 0.5;
  double dart_b = 1.0;
  int theta_grid = 1000;
};

enum class ModelKind { Regression, Probit };

/// Posterior draws of a single-forest model. Forests are stored in scaled
/// units: prediction = scaler.inverse(forest) for regression and
/// offset + forest (a latent probit index) for classification.
struct FitResult {
  ModelKind kind = ModelKind::Regression;
  SplitPriorKind split_prior = SplitPriorKind::Uniform;
  BartOptions options;
  ResponseScaler scaler;
  double offset = 0.0;
  std::vector<std::string> names;
  int propensity_col = -1;
  int treatment_col = -1;

  std::vector<Forest> forests;
  std::vector<double> sigma;             // unscaled; 1 for probit
  std::vector<std::vector<double>> s;    // split probabilities per draw
  std::vector<double> theta;
  Eigen::MatrixXi usage;                 // draws x P, 1 if the variable is split on
  Eigen::MatrixXd train_fit;             // draws x n, original scale (latent index for probit)
  MoveCounts moves;

  int num_draws() const { return static_cast<int>(forests.size()); }
  int num_vars() const { return static_cast<int>(names.size()); }

  /// Per-draw predictions on the original scale (latent index for probit).
  Eigen::MatrixXd predict_draws(const Eigen::MatrixXd& X) const;
  Eigen::VectorXd predict_mean(const Eigen::MatrixXd& X) const;
  /// Posterior mean of Phi(f); probit fits only.
  Eigen::VectorXd predict_probability(const Eigen::MatrixXd& X) const;
};

/// Runs one chain. Throws DataError for p = 0 or a degenerate response.
FitResult fit_bart(const Design& design, const Eigen::VectorXd& y, const BartOptions& options);

struct ProbitFit {
  FitResult fit;
  Eigen::VectorXd pihat;  // posterior mean of Phi(f) at the training rows
};

/// Probit classifier of z on the design. Leaf scale 3 / (k sqrt(m)) and a
/// constant offset Phi^-1(mean z).
ProbitFit fit_probit(const Design& design, const Eigen::VectorXi& z, const BartOptions& options);

struct GlmResult {
  Eigen::VectorXd coefficients;  // intercept first
  Eigen::VectorXd probability;
  int iterations = 0;
  bool converged = false;
  double ridge = 0.0;
  std::string warning;
};

/// Logistic regression of z on [1, X] by iteratively reweighted least
/// squares. Falls back to a ridge penalty on the slopes when the unpenalized
/// fit is singular or diverges.
GlmResult fit_glm_propensity(const Eigen::MatrixXd& X, const Eigen::VectorXi& z, int max_iter = 100);

struct BcfOptions {
  SamplerConfig sampler;  // num_trees is the size of the prognostic forest
  TreePriorParams tree;   // prognostic forest tree prior
  double k = 2.0;
  SigmaPriorParams sigma;
  BcfPriorParams alpha = BcfPriorParams::with_defaults();
};

/// Draws of y = m(x) + alpha(x) z + e. Forests are in scaled units; the fit
/// matrices are on the original scale.
struct BcfFitResult {
  BcfOptions options;
  ResponseScaler scaler;
  std::vector<std::string> names;
  int propensity_col = -1;

  std::vector<Forest> m_forests;
  std::vector<Forest> alpha_forests;
  Eigen::MatrixXd m_fit;      // draws x n
  Eigen::MatrixXd alpha_fit;  // draws x n
  Eigen::MatrixXd total_fit;  // draws x n
  std::vector<double> sigma;
  std::vector<double> nu_alpha;  // original scale
  Eigen::MatrixXi usage;         // either forest splits on the variable

  int num_draws() const { return static_cast<int>(m_forests.size()); }
  /// Treatment effects alpha(x) per draw on the original scale.
  Eigen::MatrixXd effect_draws(const Eigen::MatrixXd& X) const;
  Eigen::MatrixXd prognostic_draws(const Eigen::MatrixXd& X) const;
};

/// `design` must not contain the treatment column; z enters as the
/// regressor of the effect forest.
BcfFitResult fit_bcf(const Design& design, const Eigen::VectorXd& y, const Eigen::VectorXi& z,
                     const BcfOptions& options);

}  // namespace treefx
