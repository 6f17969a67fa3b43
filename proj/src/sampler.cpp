#include "treefx/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace treefx {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kRefreshEvery = 100;

int kind_index(MoveKind kind) { return static_cast<int>(kind); }

// Variable weights s_v restricted to variables with an open range; returns the mass.
double open_weights(std::span<const double> s, const std::vector<CutRange>& ranges,
                    std::vector<double>& weights) {
  weights.resize(ranges.size());
  double mass = 0.0;
  for (std::size_t v = 0; v < ranges.size(); ++v) {
    weights[v] = ranges[v].empty() ? 0.0 : s[v];
    mass += weights[v];
  }
  return mass;
}

double rule_log_probability(int var, const std::vector<CutRange>& ranges, std::span<const double> s,
                            double mass) {
  const auto v = static_cast<std::size_t>(var);
  return std::log(s[v] / mass) - std::log(static_cast<double>(ranges[v].size()));
}

}  // namespace

void SamplerConfig::validate() const {
  if (num_trees < 1) throw std::invalid_argument("num_trees must be at least 1");
  if (burn_in < 0) throw std::invalid_argument("burn_in must be nonnegative");
  if (num_draws < 1) throw std::invalid_argument("num_draws must be at least 1");
  if (thinning < 1) throw std::invalid_argument("thinning must be at least 1");
  if (kept_draws() < 1) throw std::invalid_argument("num_draws / thinning must be at least 1");
  if (max_cuts < 1) throw std::invalid_argument("max_cuts must be at least 1");
  const double total = moves.grow + moves.prune + moves.change;
  if (moves.grow <= 0.0 || moves.prune < 0.0 || moves.change < 0.0 || std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("move probabilities must be nonnegative, grow > 0, and sum to 1");
  }
}

SamplerConfig SamplerConfig::sparse_preset() {
  SamplerConfig config;
  config.burn_in = 5000;
  config.num_draws = 50000;
  config.thinning = 50;
  return config;
}

MoveProbabilities feasible_moves(const Tree& tree, const MoveProbabilities& base) {
  if (tree.is_root_only()) return {1.0, 0.0, 0.0};
  const double total = base.grow + base.prune + base.change;
  return {base.grow / total, base.prune / total, base.change / total};
}

Proposal propose_move(const Tree& tree, const SplitCandidates& candidates, std::span<const double> s,
                      const MoveProbabilities& moves, Rng& rng) {
  const MoveProbabilities probs = feasible_moves(tree, moves);
  Proposal proposal;
  proposal.tree = tree;

  const double u = rng.uniform();
  if (u < probs.grow) {
    proposal.kind = MoveKind::Grow;
  } else if (u < probs.grow + probs.prune) {
    proposal.kind = MoveKind::Prune;
  } else {
    proposal.kind = MoveKind::Change;
  }

  std::vector<CutRange> ranges;
  std::vector<double> weights;
  switch (proposal.kind) {
    case MoveKind::Grow: {
      const std::vector<int> leaves = tree.leaves();
      const int leaf = leaves[rng.index(leaves.size())];
      available_ranges(tree, leaf, candidates, ranges);
      const double mass = open_weights(s, ranges, weights);
      if (!(mass > 0.0)) return proposal;
      const int var = static_cast<int>(rng.categorical(weights));
      const CutRange range = ranges[static_cast<std::size_t>(var)];
      const int cut = range.lo + static_cast<int>(rng.index(static_cast<std::size_t>(range.size())));
      proposal.tree.grow(leaf, var, cut, candidates.cut(var, cut));
      proposal.node = leaf;

      const MoveProbabilities reverse = feasible_moves(proposal.tree, moves);
      const double forward = std::log(probs.grow) - std::log(static_cast<double>(leaves.size())) +
                             rule_log_probability(var, ranges, s, mass);
      const double backward =
          std::log(reverse.prune) - std::log(static_cast<double>(proposal.tree.num_prunable()));
      proposal.log_transition_ratio = backward - forward;
      proposal.valid = true;
      break;
    }
    case MoveKind::Prune: {
      const std::vector<int> prunable = tree.prunable_nodes();
      const int node = prunable[rng.index(prunable.size())];
      available_ranges(tree, node, candidates, ranges);
      const double mass = open_weights(s, ranges, weights);
      const double rule = rule_log_probability(tree.node(node).var, ranges, s, mass);
      proposal.tree.prune(node);
      proposal.node = node;

      const MoveProbabilities reverse = feasible_moves(proposal.tree, moves);
      const double forward = std::log(probs.prune) - std::log(static_cast<double>(prunable.size()));
      const double backward = std::log(reverse.grow) -
                              std::log(static_cast<double>(proposal.tree.num_leaves())) + rule;
      proposal.log_transition_ratio = backward - forward;
      proposal.valid = true;
      break;
    }
    case MoveKind::Change: {
      const std::vector<int> internal = tree.internal_nodes();
      const int node = internal[rng.index(internal.size())];
      available_ranges(tree, node, candidates, ranges);
      const double mass = open_weights(s, ranges, weights);
      const int var = static_cast<int>(rng.categorical(weights));
      const CutRange range = ranges[static_cast<std::size_t>(var)];
      const int cut = range.lo + static_cast<int>(rng.index(static_cast<std::size_t>(range.size())));
      const double old_rule = rule_log_probability(tree.node(node).var, ranges, s, mass);
      const double new_rule = rule_log_probability(var, ranges, s, mass);
      proposal.tree.set_rule(node, var, cut, candidates.cut(var, cut));
      proposal.node = node;
      proposal.log_transition_ratio = old_rule - new_rule;
      proposal.valid = true;
      break;
    }
  }
  return proposal;
}

double leaf_log_likelihood(const LeafStats& leaf, double sigma, double sigma_mu, double prior_mean) {
  if (leaf.n <= 0.0) throw std::invalid_argument("leaf_log_likelihood: empty leaf");
  const double s2 = sigma * sigma;
  const double t2 = sigma_mu * sigma_mu;
  const double denom = leaf.n * t2 + s2;
  const double mean = leaf.mean();
  const double dev = mean - prior_mean;
  return -0.5 * leaf.n * std::log(2.0 * std::numbers::pi * s2) + 0.5 * std::log(s2 / denom) -
         leaf.centered_ss() / (2.0 * s2) - leaf.n * dev * dev / (2.0 * denom);
}

double integrated_log_likelihood(std::span<const LeafStats> leaves, double sigma, double sigma_mu,
                                 double prior_mean) {
  double total = 0.0;
  for (const LeafStats& leaf : leaves) total += leaf_log_likelihood(leaf, sigma, sigma_mu, prior_mean);
  return total;
}

bool mh_accept(double log_ratio, Rng& rng) {
  if (std::isnan(log_ratio)) return false;
  if (log_ratio >= 0.0) return true;
  if (log_ratio == kNegInf) return false;
  return std::log(rng.uniform()) < log_ratio;
}

double draw_leaf_value(const LeafStats& leaf, double sigma, double sigma_mu, double prior_mean, Rng& rng) {
  const double s2 = sigma * sigma;
  const double t2 = sigma_mu * sigma_mu;
  const double denom = leaf.n * t2 + s2;
  const double mean = (t2 * leaf.sum + s2 * prior_mean) / denom;
  const double var = s2 * t2 / denom;
  return rng.normal(mean, std::sqrt(var));
}

double draw_sigma(std::span<const double> residuals, double nu, double lambda, Rng& rng) {
  double ss = 0.0;
  for (double e : residuals) ss += e * e;
  const double dof = nu + static_cast<double>(residuals.size());
  return std::sqrt((nu * lambda + ss) / rng.chi_squared(dof));
}

std::vector<double> update_split_probabilities(std::span<const int> counts, double theta, Rng& rng) {
  const auto P = static_cast<double>(counts.size());
  std::vector<double> log_s(counts.size());
  double top = kNegInf;
  for (std::size_t v = 0; v < counts.size(); ++v) {
    log_s[v] = rng.log_gamma_variate(theta / P + counts[v]);
    top = std::max(top, log_s[v]);
  }
  double total = 0.0;
  for (double x : log_s) total += std::exp(x - top);
  const double log_norm = top + std::log(total);
  for (double& x : log_s) x -= log_norm;
  return log_s;
}

std::vector<double> theta_lambda_grid(int size) {
  if (size < 1) throw std::invalid_argument("theta grid needs at least one point");
  std::vector<double> grid(static_cast<std::size_t>(size));
  for (int g = 0; g < size; ++g) grid[static_cast<std::size_t>(g)] = (g + 1.0) / (size + 1.0);
  return grid;
}

double update_theta(std::span<const double> log_s, double a, double b, double rho,
                    std::span<const double> lambda_grid, Rng& rng) {
  if (lambda_grid.empty()) throw std::invalid_argument("update_theta: empty grid");
  const auto P = static_cast<double>(log_s.size());
  double sum_log_s = 0.0;
  for (double x : log_s) sum_log_s += x;
  std::vector<double> log_weights(lambda_grid.size());
  for (std::size_t g = 0; g < lambda_grid.size(); ++g) {
    const double lambda = lambda_grid[g];
    const double theta = rho * lambda / (1.0 - lambda);
    log_weights[g] = std::lgamma(theta) - P * std::lgamma(theta / P) + (theta / P) * sum_log_s +
                     (a - 1.0) * std::log(lambda) + (b - 1.0) * std::log1p(-lambda);
  }
  const double lambda = lambda_grid[rng.categorical_log(log_weights)];
  return rho * lambda / (1.0 - lambda);
}

void probit_latent_draw(std::span<const double> fit, std::span<const int> z, std::span<double> latent,
                        Rng& rng) {
  for (std::size_t i = 0; i < fit.size(); ++i) latent[i] = rng.truncated_normal(fit[i], z[i] == 1);
}

ForestSampler::ForestSampler(const Eigen::MatrixXd& X, SplitCandidates candidates, int num_trees,
                             ForestPrior prior, std::vector<std::uint8_t> active)
    : X_(&X),
      candidates_(std::move(candidates)),
      prior_(prior),
      active_(std::move(active)) {
  if (num_trees < 1) throw std::invalid_argument("ForestSampler: need at least one tree");
  if (candidates_.num_vars() != X.cols()) {
    throw std::invalid_argument("ForestSampler: candidates do not match covariate columns");
  }
  if (!active_.empty() && static_cast<Eigen::Index>(active_.size()) != X.rows()) {
    throw std::invalid_argument("ForestSampler: active mask length does not match rows");
  }
  forest_.trees.assign(static_cast<std::size_t>(num_trees), Tree(0.0));
  cache_ = PartitionCache(forest_, X);
  fit_.assign(static_cast<std::size_t>(X.rows()), 0.0);
  residual_.resize(fit_.size());
  previous_.resize(fit_.size());
}

void ForestSampler::sweep(std::span<const double> target, double sigma, std::span<const double> s,
                          Rng& rng) {
  const std::size_t n = fit_.size();
  for (int j = 0; j < static_cast<int>(forest_.trees.size()); ++j) {
    const Tree& tree = forest_.trees[static_cast<std::size_t>(j)];
    const auto leaf_of = cache_.leaf_of(j);
    for (std::size_t i = 0; i < n; ++i) {
      previous_[i] = tree.node(leaf_of[i]).mu;
      residual_[i] = target[i] - fit_[i] + previous_[i];
    }
    update_tree(j, residual_, sigma, s, rng);
    const Tree& updated = forest_.trees[static_cast<std::size_t>(j)];
    const auto new_leaf_of = cache_.leaf_of(j);
    for (std::size_t i = 0; i < n; ++i) fit_[i] += updated.node(new_leaf_of[i]).mu - previous_[i];
  }
  if (++sweeps_ % kRefreshEvery == 0) refresh_fit();
}

void ForestSampler::update_tree(int j, std::span<const double> residual, double sigma,
                                std::span<const double> s, Rng& rng, bool use_likelihood,
                                bool draw_leaves) {
  Tree& tree = forest_.trees[static_cast<std::size_t>(j)];
  std::vector<int>& leaf_of = cache_.mutable_leaf_of(j);
  const std::size_t n = leaf_of.size();
  const bool masked = !active_.empty();

  stats_.assign(static_cast<std::size_t>(tree.capacity()), LeafStats{});
  for (std::size_t i = 0; i < n; ++i) {
    if (masked && !active_[i]) continue;
    stats_[static_cast<std::size_t>(leaf_of[i])].add(residual[i]);
  }

  Proposal proposal = propose_move(tree, candidates_, s, prior_.moves, rng);
  ++counts_.proposed[kind_index(proposal.kind)];
  if (proposal.valid) {
    const Tree& star = proposal.tree;
    const int anchor = proposal.node;

    in_subtree_.assign(static_cast<std::size_t>(tree.capacity()), 0);
    for (int id = 0; id < tree.capacity(); ++id) {
      if (tree.node(id).in_use) in_subtree_[static_cast<std::size_t>(id)] = tree.in_subtree(id, anchor) ? 1 : 0;
    }
    affected_rows_.clear();
    new_leaf_.clear();
    new_stats_.assign(static_cast<std::size_t>(star.capacity()), LeafStats{});
    const Eigen::MatrixXd& X = *X_;
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_subtree_[static_cast<std::size_t>(leaf_of[i])]) continue;
      const auto row = static_cast<Eigen::Index>(i);
      const int leaf = star.find_leaf_from(anchor, [&X, row](int v) { return X(row, v); });
      affected_rows_.push_back(static_cast<int>(i));
      new_leaf_.push_back(leaf);
      if (!masked || active_[i]) new_stats_[static_cast<std::size_t>(leaf)].add(residual[i]);
    }

    available_ranges(tree, anchor, candidates_, ranges_);
    double log_alpha = proposal.log_transition_ratio;
    const double prior_new = log_subtree_prior(star, anchor, prior_.tree, s, ranges_);
    const double prior_old = log_subtree_prior(tree, anchor, prior_.tree, s, ranges_);
    log_alpha += prior_new - prior_old;
    bool feasible = prior_new != kNegInf;

    if (use_likelihood && feasible) {
      double ll_new = 0.0;
      for (int id : star.leaves()) {
        if (!star.in_subtree(id, anchor)) continue;
        const LeafStats& st = new_stats_[static_cast<std::size_t>(id)];
        if (st.n <= 0.0) {
          feasible = false;
          break;
        }
        ll_new += leaf_log_likelihood(st, sigma, prior_.sigma_mu, prior_.leaf_mean);
      }
      if (feasible) {
        double ll_old = 0.0;
        for (int id : tree.leaves()) {
          if (!in_subtree_[static_cast<std::size_t>(id)]) continue;
          ll_old += leaf_log_likelihood(stats_[static_cast<std::size_t>(id)], sigma, prior_.sigma_mu,
                                        prior_.leaf_mean);
        }
        log_alpha += ll_new - ll_old;
      }
    }

    if (feasible && mh_accept(log_alpha, rng)) {
      tree = std::move(proposal.tree);
      for (std::size_t k = 0; k < affected_rows_.size(); ++k) {
        leaf_of[static_cast<std::size_t>(affected_rows_[k])] = new_leaf_[k];
      }
      stats_.resize(static_cast<std::size_t>(tree.capacity()));
      for (int id : tree.leaves()) {
        if (tree.in_subtree(id, anchor)) stats_[static_cast<std::size_t>(id)] = new_stats_[static_cast<std::size_t>(id)];
      }
      ++counts_.accepted[kind_index(proposal.kind)];
    }
  }

  if (draw_leaves) {
    for (int id : tree.leaves()) {
      tree.node(id).mu =
          draw_leaf_value(stats_[static_cast<std::size_t>(id)], sigma, prior_.sigma_mu, prior_.leaf_mean, rng);
    }
  }
}

std::vector<double> ForestSampler::leaf_values() const {
  std::vector<double> values;
  for (const Tree& t : forest_.trees) {
    for (int id : t.leaves()) values.push_back(t.node(id).mu);
  }
  return values;
}

void ForestSampler::refresh_fit() {
  std::fill(fit_.begin(), fit_.end(), 0.0);
  for (int j = 0; j < static_cast<int>(forest_.trees.size()); ++j) {
    const Tree& tree = forest_.trees[static_cast<std::size_t>(j)];
    const auto leaf_of = cache_.leaf_of(j);
    for (std::size_t i = 0; i < fit_.size(); ++i) fit_[i] += tree.node(leaf_of[i]).mu;
  }
}

double ForestSampler::fit_discrepancy() const {
  const Eigen::VectorXd direct = forest_.predict(*X_);
  double worst = 0.0;
  for (std::size_t i = 0; i < fit_.size(); ++i) {
    worst = std::max(worst, std::abs(direct(static_cast<Eigen::Index>(i)) - fit_[i]));
  }
  return worst;
}

std::vector<double> ForestSampler::partial_residual(int j, std::span<const double> target) const {
  const Tree& tree = forest_.trees[static_cast<std::size_t>(j)];
  const auto leaf_of = cache_.leaf_of(j);
  std::vector<double> r(fit_.size());
  for (std::size_t i = 0; i < fit_.size(); ++i) r[i] = target[i] - fit_[i] + tree.node(leaf_of[i]).mu;
  return r;
}

void ForestSampler::set_tree(int j, Tree tree) {
  forest_.trees[static_cast<std::size_t>(j)] = std::move(tree);
  const Tree& t = forest_.trees[static_cast<std::size_t>(j)];
  auto& leaf_of = cache_.mutable_leaf_of(j);
  const Eigen::MatrixXd& X = *X_;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    leaf_of[static_cast<std::size_t>(i)] = t.find_leaf([&X, i](int v) { return X(i, v); });
  }
  refresh_fit();
}

void backfitting_sweep(ChainState& state, const SigmaPriorParams& sigma_prior,
                       std::span<const double> y_scaled) {
  ForestSampler& forest = state.forest;
  const std::size_t n = static_cast<std::size_t>(forest.rows());
  std::vector<double> target(n);
  if (state.probit()) {
    std::vector<double> f(forest.fit().begin(), forest.fit().end());
    for (double& v : f) v += state.offset;
    probit_latent_draw(f, state.labels, *state.latent, state.rng);
    for (std::size_t i = 0; i < n; ++i) target[i] = (*state.latent)[i] - state.offset;
  } else {
    std::copy(y_scaled.begin(), y_scaled.end(), target.begin());
  }

  forest.sweep(target, state.sigma, state.split_prior.s, state.rng);

  if (!state.probit()) {
    std::vector<double> residual(n);
    const auto fit = forest.fit();
    for (std::size_t i = 0; i < n; ++i) residual[i] = target[i] - fit[i];
    state.sigma = draw_sigma(residual, sigma_prior.nu, sigma_prior.lambda, state.rng);
  }

  if (state.dart_active) {
    SplitVarPrior& prior = state.split_prior;
    const std::vector<int> counts = split_counts(forest.forest(), forest.num_vars());
    prior.set_log_s(update_split_probabilities(counts, prior.theta, state.rng));
    prior.theta = update_theta(prior.log_s, prior.a, prior.b, prior.rho, state.lambda_grid, state.rng);
  }
}

}  // namespace treefx
