#pragma once

#include "treefx/data.hpp"
#include "treefx/tree.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace treefx {

/// Split probability eta * (1 + depth)^-beta.
struct TreePriorParams {
  double eta = 0.95;
  double beta = 2.0;
};

struct LeafPriorParams {
  double k = 2.0;
  double sigma_mu = 0.5 / (2.0 * 14.142135623730951);  // 0.5 / (k sqrt(200))
  double prior_mean = 0.0;
};

/// sigma^2 ~ nu * lambda / chi^2_nu, lambda chosen so P(sigma < sigma_hat) = q.
struct SigmaPriorParams {
  double nu = 3.0;
  double q = 0.90;
  double lambda = 1.0;
  double sigma_hat = 1.0;
};

enum class SplitPriorKind { Uniform, Dirichlet };

/// Probabilities of choosing each variable for a split. Under the Dirichlet
/// kind, s ~ Dir(theta/P, ..., theta/P) with theta/(theta + rho) ~ Beta(a, b).
struct SplitVarPrior {
  SplitPriorKind kind = SplitPriorKind::Uniform;
  std::vector<double> s;
  std::vector<double> log_s;
  double theta = 1.0;
  double a = 0.5;
  double b = 1.0;
  double rho = 1.0;

  static SplitVarPrior uniform(int num_vars);
  /// Dirichlet prior started at uniform s, with rho = P and theta = P.
  static SplitVarPrior dirichlet(int num_vars, double a = 0.5, double b = 1.0);
  int num_vars() const { return static_cast<int>(s.size()); }
  void set_log_s(std::vector<double> values);
};

/// Modifications applied to the treatment-effect forest of BCF.
struct BcfPriorParams {
  double alpha0 = 0.5;   // prior probability that every alpha tree is a root
  int num_trees = 50;    // L_alpha
  double eta = 0.0;      // solved from alpha0 = (1 - eta)^L_alpha
  double beta = 3.0;
  double nu0 = 0.25;     // half-Cauchy scale of the effect function, scaled units

  static BcfPriorParams with_defaults(double alpha0 = 0.5, int num_trees = 50, double nu0 = 0.25);
};

double split_probability(int depth, const TreePriorParams& params);
double compute_sigma_mu(double k, int num_trees);
double calibrate_lambda(double sigma_hat, double nu, double q);
double bcf_eta_from_alpha0(double alpha0, int num_trees);

/// log p(T): split and no-split probabilities at every node, times the
/// probability of each split's variable (s renormalized over the variables
/// that still have cutpoints available at the node) and a uniform choice among
/// the cutpoints available there. Cutpoints available at a node are those of
/// the variable's candidate list that lie strictly inside the interval carved
/// out by the node's ancestors. A node with no available cutpoint cannot split
/// and contributes log 1.
///
/// Returns -inf when a split uses a cutpoint outside its available range;
/// throws when a split uses a variable with an empty candidate list.
double log_tree_prior(const Tree& tree, const TreePriorParams& params,
                      const SplitCandidates& candidates, std::span<const double> s);

/// Cutpoint index range [lo, hi] available to each variable at a node.
struct CutRange {
  int lo = 0;
  int hi = -1;
  bool empty() const { return hi < lo; }
  int size() const { return hi - lo + 1; }
};

/// Available ranges at node `id`, obtained by walking its ancestors. `out` is
/// resized to the number of variables.
void available_ranges(const Tree& tree, int id, const SplitCandidates& candidates,
                      std::vector<CutRange>& out);

/// Prior contribution of the subtree rooted at `id`, given the ranges
/// available at `id` (restored on return). Moves that only touch this subtree
/// change log p(T) by exactly the difference of this quantity.
double log_subtree_prior(const Tree& tree, int id, const TreePriorParams& params,
                         std::span<const double> s, std::vector<CutRange>& ranges);

/// sigma_hat from the residual standard deviation of least squares of y on
/// [1, X]; falls back to sd(y) when p + 1 >= n or the fit is degenerate.
double ols_sigma_hat(const Eigen::VectorXd& y, const Eigen::MatrixXd& X);

}  // namespace treefx
