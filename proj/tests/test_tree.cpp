#include "treefx/random.hpp"
#include "treefx/tree.hpp"

#include <doctest.h>

#include <algorithm>

using namespace treefx;

namespace {

// x0 <= 0.5 ? (x1 <= 1 ? 1 : 2) : 3
Tree sample_tree() {
  Tree t(0.0);
  const int left = t.grow(0, 0, 0, 0.5);
  const int right = t.node(0).right;
  t.node(right).mu = 3.0;
  const int ll = t.grow(left, 1, 2, 1.0);
  t.node(ll).mu = 1.0;
  t.node(t.node(left).right).mu = 2.0;
  return t;
}

}  // namespace

TEST_CASE("routing sends ties to the left") {
  const Tree t = sample_tree();
  const double a[] = {0.5, 1.0};
  const double b[] = {0.5, 1.01};
  const double c[] = {0.51, -4.0};
  CHECK(t.evaluate(a) == 1.0);
  CHECK(t.evaluate(b) == 2.0);
  CHECK(t.evaluate(c) == 3.0);
}

TEST_CASE("grow and prune keep node bookkeeping in step") {
  Tree t = sample_tree();
  CHECK(t.num_leaves() == 3);
  CHECK(t.internal_nodes().size() == 2);
  CHECK(t.prunable_nodes() == std::vector<int>{t.node(0).left});
  CHECK(t.node(t.node(t.node(0).left).left).depth == 2);

  const int left = t.node(0).left;
  t.prune(left);
  CHECK(t.num_leaves() == 2);
  CHECK(t.num_prunable() == 1);
  CHECK_THROWS_AS(t.prune(left), std::logic_error);

  // freed slots are reused
  const int cap = t.capacity();
  t.grow(left, 1, 0, 0.0);
  CHECK(t.capacity() == cap);
  CHECK(t.in_subtree(t.node(left).right, 0));
  CHECK_FALSE(t.in_subtree(t.node(0).right, left));
}

TEST_CASE("variable usage and split counts") {
  Forest f;
  f.trees = {sample_tree(), Tree(1.0), sample_tree()};
  const auto used = variable_usage(f, 3);
  CHECK(used == std::vector<bool>{true, true, false});
  CHECK(split_counts(f, 3) == std::vector<int>{2, 2, 0});
  const double x[] = {0.0, 0.0, 0.0};
  CHECK(f.evaluate(x) == 3.0);
}

TEST_CASE("partition cache matches brute-force routing") {
  Rng rng(3);
  Eigen::MatrixXd X(50, 2);
  for (int i = 0; i < 50; ++i) {
    X(i, 0) = rng.uniform();
    X(i, 1) = 2.0 * rng.uniform();
  }
  Forest f;
  f.trees = {sample_tree(), Tree(0.25)};
  PartitionCache cache(f, X);
  CHECK(cache.consistent_with(f, X));
  const auto counts = cache.leaf_counts(0, f.trees[0].capacity());
  int total = 0;
  for (int c : counts) total += c;
  CHECK(total == 50);

  Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(50, -1, 1);
  const Eigen::VectorXd r = partial_residual(y, f, 0, X);
  for (int i = 0; i < 50; ++i) CHECK(r(i) == doctest::Approx(y(i) - 0.25));

  std::vector<double> values(y.data(), y.data() + 50);
  const auto stats = cache.leaf_stats(0, f.trees[0].capacity(), values, {});
  double n = 0;
  double sum = 0;
  for (const auto& s : stats) {
    n += s.n;
    sum += s.sum;
  }
  CHECK(n == 50);
  CHECK(sum == doctest::Approx(y.sum()).epsilon(1e-12));

  f.trees[1].grow(0, 0, 0, 0.3);
  CHECK_FALSE(cache.consistent_with(f, X));
}

TEST_CASE("leaf statistics") {
  LeafStats s;
  for (double v : {1.0, 2.0, 4.0}) s.add(v);
  CHECK(s.mean() == doctest::Approx(7.0 / 3.0));
  CHECK(s.centered_ss() == doctest::Approx(1.0 + 4.0 + 16.0 - 49.0 / 3.0));
  CHECK(LeafStats{}.centered_ss() == 0.0);
}
