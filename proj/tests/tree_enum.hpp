#pragma once

// Exhaustive enumeration of trees over a small cutpoint grid, with the tree
// prior written out independently of the library's recursion.

#include "treefx/priors.hpp"
#include "treefx/tree.hpp"

#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace treefx::testing {

struct ShapeNode {
  int var = -1;
  int cut = -1;
  std::shared_ptr<const ShapeNode> left;
  std::shared_ptr<const ShapeNode> right;
};

struct Shape {
  std::shared_ptr<const ShapeNode> root;
  double prior = 0.0;
};

inline std::vector<Shape> enumerate_subtrees(std::vector<std::pair<int, int>>& ranges, int depth,
                                             const std::vector<double>& s, const TreePriorParams& params) {
  double open = 0.0;
  for (std::size_t v = 0; v < ranges.size(); ++v) {
    if (ranges[v].first <= ranges[v].second) open += s[v];
  }
  const double p_split = params.eta / std::pow(1.0 + depth, params.beta);
  std::vector<Shape> out;
  out.push_back({std::make_shared<ShapeNode>(), open > 0.0 ? 1.0 - p_split : 1.0});
  if (open <= 0.0) return out;
  for (std::size_t v = 0; v < ranges.size(); ++v) {
    const auto [lo, hi] = ranges[v];
    if (lo > hi) continue;
    const double rule = p_split * (s[v] / open) / static_cast<double>(hi - lo + 1);
    for (int c = lo; c <= hi; ++c) {
      ranges[v] = {lo, c - 1};
      const std::vector<Shape> lefts = enumerate_subtrees(ranges, depth + 1, s, params);
      ranges[v] = {c + 1, hi};
      const std::vector<Shape> rights = enumerate_subtrees(ranges, depth + 1, s, params);
      ranges[v] = {lo, hi};
      for (const Shape& l : lefts) {
        for (const Shape& r : rights) {
          auto node = std::make_shared<ShapeNode>();
          node->var = static_cast<int>(v);
          node->cut = c;
          node->left = l.root;
          node->right = r.root;
          out.push_back({node, rule * l.prior * r.prior});
        }
      }
    }
  }
  return out;
}

/// Every tree over the given cutpoint counts, with its prior probability.
inline std::vector<Shape> enumerate_trees(const std::vector<int>& cut_counts, const std::vector<double>& s,
                                          const TreePriorParams& params) {
  std::vector<std::pair<int, int>> ranges;
  for (int c : cut_counts) ranges.emplace_back(0, c - 1);
  return enumerate_subtrees(ranges, 0, s, params);
}

inline std::string shape_key(const ShapeNode& n) {
  if (n.var < 0) return ".";
  return "(" + std::to_string(n.var) + ":" + std::to_string(n.cut) + " " + shape_key(*n.left) + " " +
         shape_key(*n.right) + ")";
}

inline std::string tree_key(const Tree& t, int id = 0) {
  const Node& n = t.node(id);
  if (n.is_leaf()) return ".";
  return "(" + std::to_string(n.var) + ":" + std::to_string(n.cut) + " " + tree_key(t, n.left) + " " +
         tree_key(t, n.right) + ")";
}

inline void build_into(const ShapeNode& shape, Tree& tree, int id, const SplitCandidates& cands) {
  if (shape.var < 0) return;
  const int left = tree.grow(id, shape.var, shape.cut, cands.cut(shape.var, shape.cut));
  const int right = tree.node(id).right;
  build_into(*shape.left, tree, left, cands);
  build_into(*shape.right, tree, right, cands);
}

inline Tree build_tree(const Shape& shape, const SplitCandidates& cands) {
  Tree t;
  build_into(*shape.root, t, 0, cands);
  return t;
}

}  // namespace treefx::testing
