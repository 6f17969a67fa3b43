#include "treefx/tree.hpp"

#include <algorithm>
#include <stdexcept>

namespace treefx {

Tree::Tree(double mu) {
  nodes_.emplace_back();
  nodes_[0].mu = mu;
}

int Tree::allocate() {
  if (!free_.empty()) {
    const int id = free_.back();
    free_.pop_back();
    nodes_[static_cast<std::size_t>(id)] = Node{};
    return id;
  }
  nodes_.emplace_back();
  return static_cast<int>(nodes_.size()) - 1;
}

int Tree::grow(int id, int var, int cut, double threshold) {
  if (!node(id).is_leaf()) throw std::logic_error("grow: node is not a leaf");
  const int left = allocate();
  const int right = allocate();
  Node& parent = node(id);
  parent.var = var;
  parent.cut = cut;
  parent.threshold = threshold;
  parent.left = left;
  parent.right = right;
  for (int child : {left, right}) {
    Node& c = node(child);
    c.parent = id;
    c.depth = parent.depth + 1;
    c.mu = parent.mu;
  }
  return left;
}

void Tree::prune(int id) {
  Node& n = node(id);
  if (n.is_leaf() || !node(n.left).is_leaf() || !node(n.right).is_leaf()) {
    throw std::logic_error("prune: node does not have two leaf children");
  }
  for (int child : {n.left, n.right}) {
    node(child).in_use = false;
    free_.push_back(child);
  }
  n.var = Node::kLeaf;
  n.cut = -1;
  n.left = n.right = -1;
}

void Tree::set_rule(int id, int var, int cut, double threshold) {
  Node& n = node(id);
  if (n.is_leaf()) throw std::logic_error("set_rule: node is a leaf");
  n.var = var;
  n.cut = cut;
  n.threshold = threshold;
}

std::vector<int> Tree::leaves() const {
  std::vector<int> out;
  for (int i = 0; i < capacity(); ++i) {
    if (nodes_[static_cast<std::size_t>(i)].in_use && nodes_[static_cast<std::size_t>(i)].is_leaf()) {
      out.push_back(i);
    }
  }
  return out;
}

std::vector<int> Tree::internal_nodes() const {
  std::vector<int> out;
  for (int i = 0; i < capacity(); ++i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.in_use && !n.is_leaf()) out.push_back(i);
  }
  return out;
}

std::vector<int> Tree::prunable_nodes() const {
  std::vector<int> out;
  for (int i = 0; i < capacity(); ++i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.in_use && !n.is_leaf() && node(n.left).is_leaf() && node(n.right).is_leaf()) {
      out.push_back(i);
    }
  }
  return out;
}

int Tree::num_leaves() const {
  int count = 0;
  for (const Node& n : nodes_) count += (n.in_use && n.is_leaf()) ? 1 : 0;
  return count;
}

int Tree::num_prunable() const {
  int count = 0;
  for (const Node& n : nodes_) {
    if (n.in_use && !n.is_leaf() && node(n.left).is_leaf() && node(n.right).is_leaf()) ++count;
  }
  return count;
}

bool Tree::in_subtree(int id, int ancestor) const {
  while (id >= 0) {
    if (id == ancestor) return true;
    id = node(id).parent;
  }
  return false;
}

double Tree::evaluate(std::span<const double> x) const {
  return node(find_leaf([&x](int v) { return x[static_cast<std::size_t>(v)]; })).mu;
}

double Tree::evaluate_row(const Eigen::MatrixXd& X, Eigen::Index row) const {
  return node(find_leaf([&X, row](int v) { return X(row, v); })).mu;
}

double Forest::evaluate(std::span<const double> x) const {
  double total = 0.0;
  for (const Tree& t : trees) total += t.evaluate(x);
  return total;
}

double Forest::evaluate_row(const Eigen::MatrixXd& X, Eigen::Index row) const {
  double total = 0.0;
  for (const Tree& t : trees) total += t.evaluate_row(X, row);
  return total;
}

Eigen::VectorXd Forest::predict(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
  for (const Tree& t : trees) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) += t.evaluate_row(X, i);
  }
  return out;
}

std::vector<bool> variable_usage(const Forest& forest, int num_vars) {
  std::vector<bool> used(static_cast<std::size_t>(num_vars), false);
  for (const Tree& t : forest.trees) {
    for (int id : t.internal_nodes()) used[static_cast<std::size_t>(t.node(id).var)] = true;
  }
  return used;
}

std::vector<int> split_counts(const Forest& forest, int num_vars) {
  std::vector<int> counts(static_cast<std::size_t>(num_vars), 0);
  for (const Tree& t : forest.trees) {
    for (int id : t.internal_nodes()) ++counts[static_cast<std::size_t>(t.node(id).var)];
  }
  return counts;
}

Eigen::VectorXd partial_residual(const Eigen::VectorXd& y, const Forest& forest, int j,
                                 const Eigen::MatrixXd& X) {
  Eigen::VectorXd r = y;
  for (std::size_t h = 0; h < forest.trees.size(); ++h) {
    if (static_cast<int>(h) == j) continue;
    for (Eigen::Index i = 0; i < X.rows(); ++i) r(i) -= forest.trees[h].evaluate_row(X, i);
  }
  return r;
}

double LeafStats::centered_ss() const {
  if (n <= 0.0) return 0.0;
  return std::max(0.0, sum_sq - sum * sum / n);
}

PartitionCache::PartitionCache(const Forest& forest, const Eigen::MatrixXd& X) : rows_(X.rows()) {
  leaf_of_.resize(forest.trees.size());
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    auto& membership = leaf_of_[t];
    membership.resize(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      membership[static_cast<std::size_t>(i)] =
          forest.trees[t].find_leaf([&X, i](int v) { return X(i, v); });
    }
  }
}

std::vector<LeafStats> PartitionCache::leaf_stats(int tree, int capacity,
                                                  std::span<const double> values,
                                                  std::span<const std::uint8_t> active) const {
  std::vector<LeafStats> stats(static_cast<std::size_t>(capacity));
  const auto& membership = leaf_of_[static_cast<std::size_t>(tree)];
  for (std::size_t i = 0; i < membership.size(); ++i) {
    if (!active.empty() && !active[i]) continue;
    stats[static_cast<std::size_t>(membership[i])].add(values[i]);
  }
  return stats;
}

std::vector<int> PartitionCache::leaf_counts(int tree, int capacity) const {
  std::vector<int> counts(static_cast<std::size_t>(capacity), 0);
  for (int leaf : leaf_of_[static_cast<std::size_t>(tree)]) ++counts[static_cast<std::size_t>(leaf)];
  return counts;
}

bool PartitionCache::consistent_with(const Forest& forest, const Eigen::MatrixXd& X) const {
  if (forest.trees.size() != leaf_of_.size() || X.rows() != rows_) return false;
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const int leaf = forest.trees[t].find_leaf([&X, i](int v) { return X(i, v); });
      if (leaf != leaf_of_[t][static_cast<std::size_t>(i)]) return false;
    }
  }
  return true;
}

}  // namespace treefx
