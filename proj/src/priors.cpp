#include "treefx/priors.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace treefx {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Walks a subtree carrying the available cutpoint ranges. The s-mass of the
// open variables is summed afresh at every node: subtracting closed entries
// loses everything when s spans many orders of magnitude.
struct PriorWalker {
  const Tree& tree;
  const TreePriorParams& params;
  std::span<const double> s;
  std::vector<CutRange>& ranges;

  double open_mass() const {
    double mass = 0.0;
    for (std::size_t v = 0; v < ranges.size(); ++v) {
      if (!ranges[v].empty()) mass += s[v];
    }
    return mass;
  }

  double visit(int id) const {
    const Node& n = tree.node(id);
    const double p_split = split_probability(n.depth, params);
    const double mass = open_mass();
    if (n.is_leaf()) return mass > 0.0 ? std::log1p(-p_split) : 0.0;

    const auto var = static_cast<std::size_t>(n.var);
    const CutRange range = ranges[var];
    if (!(mass > 0.0) || n.cut < range.lo || n.cut > range.hi) return kNegInf;
    double total = std::log(p_split) + std::log(s[var] / mass) -
                   std::log(static_cast<double>(range.size()));

    ranges[var] = {range.lo, n.cut - 1};
    total += visit(n.left);
    if (total != kNegInf) {
      ranges[var] = {n.cut + 1, range.hi};
      total += visit(n.right);
    }
    ranges[var] = range;
    return total;
  }
};

}  // namespace

SplitVarPrior SplitVarPrior::uniform(int num_vars) {
  SplitVarPrior prior;
  prior.kind = SplitPriorKind::Uniform;
  prior.s.assign(static_cast<std::size_t>(num_vars), 1.0 / num_vars);
  prior.log_s.assign(static_cast<std::size_t>(num_vars), -std::log(static_cast<double>(num_vars)));
  prior.rho = num_vars;
  prior.theta = num_vars;
  return prior;
}

SplitVarPrior SplitVarPrior::dirichlet(int num_vars, double a, double b) {
  SplitVarPrior prior = uniform(num_vars);
  prior.kind = SplitPriorKind::Dirichlet;
  prior.a = a;
  prior.b = b;
  return prior;
}

void SplitVarPrior::set_log_s(std::vector<double> values) {
  log_s = std::move(values);
  s.resize(log_s.size());
  for (std::size_t v = 0; v < log_s.size(); ++v) s[v] = std::exp(log_s[v]);
}

BcfPriorParams BcfPriorParams::with_defaults(double alpha0, int num_trees, double nu0) {
  BcfPriorParams params;
  params.alpha0 = alpha0;
  params.num_trees = num_trees;
  params.eta = bcf_eta_from_alpha0(alpha0, num_trees);
  params.beta = 3.0;
  params.nu0 = nu0;
  return params;
}

double split_probability(int depth, const TreePriorParams& params) {
  if (depth < 0) throw std::invalid_argument("split_probability: negative depth");
  return params.eta * std::pow(1.0 + depth, -params.beta);
}

double compute_sigma_mu(double k, int num_trees) {
  if (!(k > 0.0) || num_trees < 1) throw std::invalid_argument("compute_sigma_mu: need k > 0, m >= 1");
  return 0.5 / (k * std::sqrt(static_cast<double>(num_trees)));
}

double calibrate_lambda(double sigma_hat, double nu, double q) {
  if (!(sigma_hat > 0.0) || !(nu > 0.0) || !(q > 0.0 && q < 1.0)) {
    throw std::invalid_argument("calibrate_lambda: need sigma_hat > 0, nu > 0, 0 < q < 1");
  }
  const boost::math::chi_squared_distribution<double> chi2(nu);
  return sigma_hat * sigma_hat * boost::math::quantile(chi2, 1.0 - q) / nu;
}

double bcf_eta_from_alpha0(double alpha0, int num_trees) {
  if (!(alpha0 > 0.0 && alpha0 < 1.0) || num_trees < 1) {
    throw std::invalid_argument("bcf_eta_from_alpha0: need 0 < alpha0 < 1, L >= 1");
  }
  return -std::expm1(std::log(alpha0) / num_trees);
}

double log_tree_prior(const Tree& tree, const TreePriorParams& params,
                      const SplitCandidates& candidates, std::span<const double> s) {
  if (static_cast<int>(s.size()) != candidates.num_vars()) {
    throw std::invalid_argument("log_tree_prior: s length does not match variable count");
  }
  for (int id : tree.internal_nodes()) {
    if (candidates.count(tree.node(id).var) == 0) {
      throw std::invalid_argument("log_tree_prior: split on a variable with no candidates");
    }
  }
  std::vector<CutRange> ranges(s.size());
  for (int v = 0; v < candidates.num_vars(); ++v) {
    ranges[static_cast<std::size_t>(v)] = {0, candidates.count(v) - 1};
  }
  return log_subtree_prior(tree, 0, params, s, ranges);
}

double log_subtree_prior(const Tree& tree, int id, const TreePriorParams& params,
                         std::span<const double> s, std::vector<CutRange>& ranges) {
  return PriorWalker{tree, params, s, ranges}.visit(id);
}

void available_ranges(const Tree& tree, int id, const SplitCandidates& candidates,
                      std::vector<CutRange>& out) {
  out.resize(static_cast<std::size_t>(candidates.num_vars()));
  for (int v = 0; v < candidates.num_vars(); ++v) out[static_cast<std::size_t>(v)] = {0, candidates.count(v) - 1};
  int child = id;
  int parent = tree.node(id).parent;
  while (parent >= 0) {
    const Node& p = tree.node(parent);
    CutRange& r = out[static_cast<std::size_t>(p.var)];
    if (p.left == child) {
      r.hi = std::min(r.hi, p.cut - 1);
    } else {
      r.lo = std::max(r.lo, p.cut + 1);
    }
    child = parent;
    parent = p.parent;
  }
}

double ols_sigma_hat(const Eigen::VectorXd& y, const Eigen::MatrixXd& X) {
  const Eigen::Index n = y.size();
  const double sd = std::sqrt((y.array() - y.mean()).square().sum() / std::max<Eigen::Index>(n - 1, 1));
  if (X.cols() + 1 >= n) return sd;
  Eigen::MatrixXd design(n, X.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(X.cols()) = X;
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  const Eigen::VectorXd coef = qr.solve(y);
  const double rss = (y - design * coef).squaredNorm();
  const auto dof = static_cast<double>(n - qr.rank());
  const double sigma = std::sqrt(rss / dof);
  if (!std::isfinite(sigma) || sigma <= 1e-12) return sd;
  return sigma;
}

}  // namespace treefx
