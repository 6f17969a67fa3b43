#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace treefx {

/// One slot of a tree's node array. A leaf has var == kLeaf.
struct Node {
  static constexpr int kLeaf = -1;

  int var = kLeaf;
  int cut = -1;          // index into the variable's split candidates
  double threshold = 0;  // x_var <= threshold routes left
  int left = -1;
  int right = -1;
  int parent = -1;
  int depth = 0;
  double mu = 0.0;
  bool in_use = true;

  bool is_leaf() const { return var == kLeaf; }
};

/// Binary regression tree stored as an index-based node array; node 0 is the
/// root. Pruned slots are recycled through a free list so node ids of live
/// nodes stay stable across moves.
class Tree {
 public:
  explicit Tree(double mu = 0.0);

  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  int capacity() const { return static_cast<int>(nodes_.size()); }

  /// Turns leaf `id` into a split; returns the new left child id (the right
  /// child is node(id).right). Children start with the parent's mu.
  int grow(int id, int var, int cut, double threshold);
  /// Collapses internal node `id`, whose children must both be leaves.
  void prune(int id);
  void set_rule(int id, int var, int cut, double threshold);

  bool is_root_only() const { return nodes_[0].is_leaf(); }
  std::vector<int> leaves() const;
  std::vector<int> internal_nodes() const;
  /// Internal nodes whose two children are leaves.
  std::vector<int> prunable_nodes() const;
  int num_leaves() const;
  int num_prunable() const;
  /// True when `id` lies in the subtree rooted at `ancestor` (inclusive).
  bool in_subtree(int id, int ancestor) const;

  /// Leaf reached by x, where `feature(var)` returns the covariate value.
  template <class Feature>
  int find_leaf(Feature&& feature) const {
    int id = 0;
    while (!nodes_[static_cast<std::size_t>(id)].is_leaf()) {
      const Node& n = nodes_[static_cast<std::size_t>(id)];
      id = feature(n.var) <= n.threshold ? n.left : n.right;
    }
    return id;
  }
  /// Same as find_leaf but starting from node `start`.
  template <class Feature>
  int find_leaf_from(int start, Feature&& feature) const {
    int id = start;
    while (!nodes_[static_cast<std::size_t>(id)].is_leaf()) {
      const Node& n = nodes_[static_cast<std::size_t>(id)];
      id = feature(n.var) <= n.threshold ? n.left : n.right;
    }
    return id;
  }

  double evaluate(std::span<const double> x) const;
  /// Evaluates row `row` of a column-major matrix.
  double evaluate_row(const Eigen::MatrixXd& X, Eigen::Index row) const;

 private:
  int allocate();

  std::vector<Node> nodes_;
  std::vector<int> free_;
};

/// Sum of trees.
struct Forest {
  std::vector<Tree> trees;

  double evaluate(std::span<const double> x) const;
  double evaluate_row(const Eigen::MatrixXd& X, Eigen::Index row) const;
  /// Predictions for every row of X.
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

inline double evaluate_tree(const Tree& tree, std::span<const double> x) { return tree.evaluate(x); }
inline double evaluate_forest(const Forest& forest, std::span<const double> x) {
  return forest.evaluate(x);
}

/// Entry l is true iff variable l appears in some split of some tree.
std::vector<bool> variable_usage(const Forest& forest, int num_vars);
/// Number of internal nodes splitting on each variable.
std::vector<int> split_counts(const Forest& forest, int num_vars);

/// R_j = y - sum_{h != j} g(x; T_h), computed directly from the trees.
Eigen::VectorXd partial_residual(const Eigen::VectorXd& y, const Forest& forest, int j,
                                 const Eigen::MatrixXd& X);

/// Sufficient statistics of a vector restricted to one leaf.
struct LeafStats {
  double n = 0.0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double r) {
    n += 1.0;
    sum += r;
    sum_sq += r * r;
  }
  double mean() const { return sum / n; }
  /// sum of squared deviations from the leaf mean
  double centered_ss() const;
};

/// Leaf membership of every training row for every tree of a forest, plus
/// per-leaf statistics on demand. `active` rows (all rows when empty) are the
/// only ones that count toward statistics.
class PartitionCache {
 public:
  PartitionCache() = default;
  PartitionCache(const Forest& forest, const Eigen::MatrixXd& X);

  int num_trees() const { return static_cast<int>(leaf_of_.size()); }
  Eigen::Index rows() const { return rows_; }
  std::span<const int> leaf_of(int tree) const { return leaf_of_[static_cast<std::size_t>(tree)]; }
  std::vector<int>& mutable_leaf_of(int tree) { return leaf_of_[static_cast<std::size_t>(tree)]; }

  /// Per-node statistics of `values`, indexed by node id (non-leaves empty).
  std::vector<LeafStats> leaf_stats(int tree, int capacity, std::span<const double> values,
                                    std::span<const std::uint8_t> active = {}) const;
  /// Row counts per node id.
  std::vector<int> leaf_counts(int tree, int capacity) const;

  /// True when the cached memberships equal fresh routing of X through forest.
  bool consistent_with(const Forest& forest, const Eigen::MatrixXd& X) const;

 private:
  Eigen::Index rows_ = 0;
  std::vector<std::vector<int>> leaf_of_;
};

}  // namespace treefx
