#pragma once

#include "treefx/data.hpp"
#include "treefx/priors.hpp"
#include "treefx/random.hpp"
#include "treefx/tree.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace treefx {

struct MoveProbabilities {
  double grow = 0.5;
  double prune = 0.3;
  double change = 0.2;
};

enum class MoveKind { Grow, Prune, Change };

/// Chain length and proposal settings shared by every model.
struct SamplerConfig {
  int num_trees = 200;
  int burn_in = 1000;
  int num_draws = 2000;  // post-burn-in sweeps; every `thinning`-th one is kept
  int thinning = 1;
  MoveProbabilities moves;
  std::uint64_t seed = 1;
  int max_cuts = kDefaultMaxCuts;

  int kept_draws() const { return num_draws / thinning; }
  void validate() const;

  /// 5000 burn-in sweeps, 1000 kept draws at thinning 50.
  static SamplerConfig sparse_preset();
};

/// A proposed tree and log q(T*, T) - log q(T, T*). `valid` is false when the
/// sampled move has no legal realization; the chain then keeps its tree.
struct Proposal {
  MoveKind kind = MoveKind::Grow;
  Tree tree;
  int node = -1;
  double log_transition_ratio = 0.0;
  bool valid = false;
};

/// Move-kind probabilities for `tree`: a root-only tree can only GROW.
MoveProbabilities feasible_moves(const Tree& tree, const MoveProbabilities& base);

/// GROW picks a uniform leaf, a variable ~ s among those with cutpoints still
/// available at that leaf, and a uniform available cutpoint. PRUNE picks a
/// uniform node whose children are both leaves. CHANGE picks a uniform
/// internal node and redraws its rule the way GROW would.
Proposal propose_move(const Tree& tree, const SplitCandidates& candidates, std::span<const double> s,
                      const MoveProbabilities& moves, Rng& rng);

/// Log marginal likelihood of one leaf's data with its mean integrated out
/// against N(prior_mean, sigma_mu^2). Throws for an empty leaf.
double leaf_log_likelihood(const LeafStats& leaf, double sigma, double sigma_mu, double prior_mean);
double integrated_log_likelihood(std::span<const LeafStats> leaves, double sigma, double sigma_mu,
                                 double prior_mean);

bool mh_accept(double log_ratio, Rng& rng);

/// Conjugate draw of one leaf mean.
double draw_leaf_value(const LeafStats& leaf, double sigma, double sigma_mu, double prior_mean, Rng& rng);

/// sigma^2 ~ (nu lambda + sum e^2) / chi^2_{nu + n}; returns sigma.
double draw_sigma(std::span<const double> residuals, double nu, double lambda, Rng& rng);

/// log s for s ~ Dirichlet(theta/P + count_1, ..., theta/P + count_P).
std::vector<double> update_split_probabilities(std::span<const int> counts, double theta, Rng& rng);

/// Points lambda_g = g / (G + 1), g = 1..G, of the theta / (theta + rho) grid.
std::vector<double> theta_lambda_grid(int size);
/// theta drawn from its gridded full conditional given log s.
double update_theta(std::span<const double> log_s, double a, double b, double rho,
                    std::span<const double> lambda_grid, Rng& rng);

/// latent_i ~ N(f_i, 1) truncated to the positive half-line when z_i = 1 and
/// to the negative half-line when z_i = 0.
void probit_latent_draw(std::span<const double> fit, std::span<const int> z, std::span<double> latent,
                        Rng& rng);

struct ForestPrior {
  TreePriorParams tree;
  double sigma_mu = 0.5 / (2.0 * 14.142135623730951);
  double leaf_mean = 0.0;
  MoveProbabilities moves;
};

/// Acceptance bookkeeping for diagnostics.
struct MoveCounts {
  long proposed[3] = {0, 0, 0};
  long accepted[3] = {0, 0, 0};
};

/// Bayesian backfitting over one sum-of-trees. Keeps the trees, the per-row
/// leaf memberships and the per-row total fit in step.
///
/// Rows with `active` == 0 are routed through the trees but carry no data:
/// they do not enter leaf statistics and do not count toward the
/// nonempty-leaf requirement. This is how the treatment-effect forest of BCF
/// sees only treated rows.
class ForestSampler {
 public:
  ForestSampler(const Eigen::MatrixXd& X, SplitCandidates candidates, int num_trees,
                ForestPrior prior, std::vector<std::uint8_t> active = {});

  /// One pass over every tree: MH tree move against the partial residual of
  /// `target`, then a conjugate draw of the tree's leaves.
  void sweep(std::span<const double> target, double sigma, std::span<const double> s, Rng& rng);

  /// Single tree update against an explicit partial residual. With
  /// `use_likelihood` false the move is accepted on the prior alone and empty
  /// leaves are allowed (prior-only chains).
  void update_tree(int j, std::span<const double> residual, double sigma, std::span<const double> s,
                   Rng& rng, bool use_likelihood = true, bool draw_leaves = true);

  const Forest& forest() const { return forest_; }
  const PartitionCache& cache() const { return cache_; }
  const SplitCandidates& candidates() const { return candidates_; }
  std::span<const double> fit() const { return fit_; }
  std::span<const std::uint8_t> active() const { return active_; }
  int num_vars() const { return candidates_.num_vars(); }
  Eigen::Index rows() const { return X_->rows(); }
  const ForestPrior& prior() const { return prior_; }
  const MoveCounts& move_counts() const { return counts_; }

  void set_sigma_mu(double sigma_mu) { prior_.sigma_mu = sigma_mu; }
  /// Leaf means of every tree, in tree order.
  std::vector<double> leaf_values() const;
  /// Recomputes the total fit from the cached memberships.
  void refresh_fit();
  /// Max |cached fit - brute-force forest evaluation| and whether the cached
  /// memberships match fresh routing.
  double fit_discrepancy() const;
  bool cache_consistent() const { return cache_.consistent_with(forest_, *X_); }
  /// Partial residual of tree j from the incremental bookkeeping.
  std::vector<double> partial_residual(int j, std::span<const double> target) const;

  /// Replaces tree j, recomputing its memberships and the fit.
  void set_tree(int j, Tree tree);

 private:
  const Eigen::MatrixXd* X_;
  SplitCandidates candidates_;
  ForestPrior prior_;
  std::vector<std::uint8_t> active_;
  Forest forest_;
  PartitionCache cache_;
  std::vector<double> fit_;
  MoveCounts counts_;
  long sweeps_ = 0;

  // scratch
  std::vector<double> residual_;
  std::vector<double> previous_;
  std::vector<LeafStats> stats_;
  std::vector<LeafStats> new_stats_;
  std::vector<int> affected_rows_;
  std::vector<int> new_leaf_;
  std::vector<char> in_subtree_;
  std::vector<CutRange> ranges_;
};

/// Full state of a single-forest chain.
struct ChainState {
  ForestSampler forest;
  double sigma = 1.0;
  SplitVarPrior split_prior;
  bool dart_active = false;  // update s and theta after each sweep
  std::vector<double> lambda_grid;
  // probit mode: latent utilities and the binary labels they are tied to
  std::optional<std::vector<double>> latent;
  std::vector<int> labels;
  double offset = 0.0;
  Rng rng;

  bool probit() const { return latent.has_value(); }
};

/// One Gibbs sweep: (probit) latent draw, tree-by-tree backfitting, sigma
/// draw (skipped in probit mode where sigma = 1), then s and theta when the
/// Dirichlet prior is active.
void backfitting_sweep(ChainState& state, const SigmaPriorParams& sigma_prior,
                       std::span<const double> y_scaled);

}  // namespace treefx
