#include <algorithm>
#include <cmath>
#include <vector>

#include "bartm/rng.hpp"
#include "bartm/tree.hpp"

#include "doctest.h"
#include "support/builders.hpp"
#include "support/naive_tree.hpp"

using namespace bartm;
using testsupport::make_dataset;
using testsupport::random_dataset;

namespace {

// Random structurally-valid tree over p columns (no training-set constraint;
// routing is total regardless).
Tree random_tree(int p, int max_depth, Rng& rng) {
  Tree tree;
  struct Item {
    int id;
    int depth;
  };
  std::vector<Item> frontier = {{tree.root(), 0}};
  while (!frontier.empty()) {
    const Item item = frontier.back();
    frontier.pop_back();
    if (item.depth >= max_depth || rng.bernoulli(0.4)) {
      tree.set_leaf_value(item.id, rng.normal());
      continue;
    }
    SplitRule rule{rng.uniform_int(p), rng.uniform(-1.0, 1.0), rng.bernoulli(0.5)};
    tree.grow(item.id, rule);
    frontier.push_back({tree.node(item.id).left, item.depth + 1});
    frontier.push_back({tree.node(item.id).right, item.depth + 1});
  }
  return tree;
}

}  // namespace

TEST_CASE("route: a stump returns its own value for any row") {
  Tree tree;
  tree.set_leaf_value(tree.root(), 3.25);
  std::vector<double> values = {1.0, 2.0};
  std::vector<std::uint8_t> missing = {0, 1};
  CHECK(tree.predict({values, missing}) == 3.25);
}

TEST_CASE("route: missing attribute follows the rule's direction bit") {
  Tree tree;
  tree.grow(tree.root(), SplitRule{0, 0.5, true});
  tree.set_leaf_value(tree.node(tree.root()).left, -1.0);
  tree.set_leaf_value(tree.node(tree.root()).right, +1.0);

  std::vector<double> values = {9.0};  // would go right if present
  std::vector<std::uint8_t> missing = {1};
  CHECK(tree.predict({values, missing}) == -1.0);

  tree.change(tree.root(), SplitRule{0, 0.5, false});
  CHECK(tree.predict({values, missing}) == +1.0);

  missing[0] = 0;
  CHECK(tree.predict({values, missing}) == +1.0);
  values[0] = 0.5;  // boundary: <= goes left
  CHECK(tree.predict({values, missing}) == -1.0);
}

TEST_CASE("route: column-count mismatch is an error") {
  Tree tree;
  tree.grow(tree.root(), SplitRule{3, 0.0, true});
  std::vector<double> values = {1.0, 2.0};
  std::vector<std::uint8_t> missing = {0, 0};
  CHECK_THROWS_AS(tree.route({values, missing}), Error);
}

TEST_CASE("route agrees with the naive recursive interpreter") {
  Rng rng(42);
  const int p = 5;
  int checked = 0;
  for (int t = 0; t < 100; ++t) {
    const Tree tree = random_tree(p, 3, rng);
    const auto naive = testsupport::naive_from_tree(tree, tree.root());
    for (int r = 0; r < 100; ++r) {
      std::vector<double> values(p);
      std::vector<bool> missing_b(p);
      std::vector<std::uint8_t> missing(p);
      for (int j = 0; j < p; ++j) {
        values[j] = rng.uniform(-1.5, 1.5);
        missing_b[j] = rng.bernoulli(0.3);
        missing[j] = missing_b[j] ? 1 : 0;
      }
      const double got = tree.predict({values, missing});
      const double expected = testsupport::naive_route(*naive, values, missing_b);
      REQUIRE(got == expected);
      ++checked;
    }
  }
  CHECK(checked == 100 * 100);
}

TEST_CASE("partition property: every row reaches exactly one leaf") {
  Rng rng(7);
  const Dataset d = random_dataset(50, 4, 0.2, 99);
  const AugmentedDataset aug = augment(d);
  for (int t = 0; t < 20; ++t) {
    const Tree tree = random_tree(aug.n_cols(), 4, rng);
    std::vector<int> counts;
    const std::vector<int> leaves = tree.leaf_ids();
    counts.assign(leaves.size(), 0);
    for (int i = 0; i < aug.n_rows(); ++i) {
      const int leaf = tree.route({aug.row_values(i), aug.row_missing(i)});
      const auto it = std::find(leaves.begin(), leaves.end(), leaf);
      REQUIRE(it != leaves.end());
      ++counts[it - leaves.begin()];
    }
    int total = 0;
    for (int c : counts) total += c;
    CHECK(total == aug.n_rows());
  }
}

TEST_CASE("collect_candidate_rules: constant missing-free column is unusable") {
  const Dataset d = make_dataset({{1.0}, {1.0}, {1.0}}, {{0}, {0}, {0}}, {1, 2, 3});
  const AugmentedDataset aug = augment(d);
  const std::vector<int> rows = {0, 1, 2};
  CHECK(collect_candidate_rules(aug, rows).empty());
}

TEST_CASE("collect_candidate_rules: max value excluded from thresholds") {
  const Dataset d = make_dataset({{1.0}, {2.0}, {3.0}}, {{0}, {0}, {0}}, {1, 2, 3});
  const AugmentedDataset aug = augment(d);
  const std::vector<int> rows = {0, 1, 2};
  const CandidateSet set = collect_candidate_rules(aug, rows);
  REQUIRE(set.n_attrs() == 1);
  CHECK(set.attrs[0].thresholds == std::vector<double>{1.0, 2.0});

  // Oracle: enumerate all (value, direction) splits and keep those with two
  // non-empty children; usable thresholds must match.
  std::vector<double> usable;
  for (double c : {1.0, 2.0, 3.0}) {
    int left = 0, right = 0;
    for (int i = 0; i < 3; ++i)
      (d.covariates(i, 0) <= c ? left : right)++;
    if (left > 0 && right > 0) usable.push_back(c);
  }
  CHECK(set.attrs[0].thresholds == usable);
}

TEST_CASE("collect_candidate_rules: missingness split via dummy column") {
  const Dataset d = make_dataset({{1.0}, {2.0}, {-1}, {-1}, {-1}},
                                 {{0}, {0}, {1}, {1}, {1}}, {1, 2, 3, 4, 5});
  const AugmentedDataset aug = augment(d);
  REQUIRE(aug.n_dummies() == 1);
  const std::vector<int> rows = {0, 1, 2, 3, 4};
  const CandidateSet set = collect_candidate_rules(aug, rows);
  // attribute 0: observed {1,2} plus missing rows; attribute 1: dummy {0,1}.
  REQUIRE(set.n_attrs() == 2);
  CHECK(set.attrs[0].attribute == 0);
  CHECK(set.attrs[0].thresholds == std::vector<double>{1.0});
  CHECK(set.attrs[1].attribute == 1);
  CHECK(set.attrs[1].thresholds == std::vector<double>{0.0});

  // A dummy-column split at 0 separates exactly the missing rows.
  Tree tree;
  tree.grow(tree.root(), SplitRule{1, 0.0, true});
  int left = 0, right = 0;
  for (int i = 0; i < 5; ++i) {
    const int leaf = tree.route({aug.row_values(i), aug.row_missing(i)});
    (leaf == tree.node(tree.root()).left ? left : right)++;
  }
  CHECK(left == 2);
  CHECK(right == 3);
}

TEST_CASE("collect_candidate_rules: single observed value plus missing rows") {
  const Dataset d =
      make_dataset({{4.0}, {-1}, {-1}}, {{0}, {1}, {1}}, {1, 2, 3});
  const AugmentedDataset aug = augment(d);
  const std::vector<int> rows = {0, 1, 2};
  const CandidateSet set = collect_candidate_rules(aug, rows);
  const auto* attr0 = set.find(0);
  REQUIRE(attr0 != nullptr);
  CHECK(attr0->thresholds == std::vector<double>{4.0});
}

TEST_CASE("log_rule_prob: uniform attribute x threshold x direction") {
  const Dataset d = make_dataset({{1, 10}, {2, 20}, {3, 30}},
                                 {{0, 0}, {0, 0}, {0, 0}}, {1, 2, 3});
  const AugmentedDataset aug = augment(d);
  const std::vector<int> rows = {0, 1, 2};
  const CandidateSet set = collect_candidate_rules(aug, rows);
  REQUIRE(set.n_attrs() == 2);
  const double expected = -std::log(2.0) - std::log(2.0) - std::log(2.0);
  CHECK(set.log_rule_prob({0, 1.0, true}) == doctest::Approx(expected));
  CHECK(set.log_rule_prob({1, 20.0, false}) == doctest::Approx(expected));
  CHECK(set.log_rule_prob({0, 3.0, true}) ==
        -std::numeric_limits<double>::infinity());
  CHECK(set.log_rule_prob({5, 1.0, true}) ==
        -std::numeric_limits<double>::infinity());
}

TEST_CASE("grow then prune restores the original tree") {
  Rng rng(3);
  Tree tree;
  tree.grow(tree.root(), SplitRule{0, 0.0, true});
  tree.set_leaf_value(tree.node(tree.root()).left, 1.0);
  tree.set_leaf_value(tree.node(tree.root()).right, 2.0);
  const Tree before = tree;

  const int target = tree.node(tree.root()).left;
  tree.grow(target, SplitRule{1, 0.5, false});
  CHECK_FALSE(tree.structurally_equal(before));
  tree.prune(target);
  tree.set_leaf_value(target, 1.0);  // prune resets the merged leaf's value
  CHECK(tree.structurally_equal(before));
}

TEST_CASE("change to the identical rule keeps the partition") {
  const Dataset d = random_dataset(30, 3, 0.15, 5);
  const AugmentedDataset aug = augment(d);
  Tree tree;
  tree.grow(tree.root(), SplitRule{0, 0.0, true});
  std::vector<int> before(aug.n_rows());
  for (int i = 0; i < aug.n_rows(); ++i)
    before[i] = tree.route({aug.row_values(i), aug.row_missing(i)});
  tree.change(tree.root(), SplitRule{0, 0.0, true});
  for (int i = 0; i < aug.n_rows(); ++i)
    CHECK(tree.route({aug.row_values(i), aug.row_missing(i)}) == before[i]);
}

TEST_CASE("random grow/prune sequences keep the partition exhaustive") {
  Rng rng(17);
  const Dataset d = random_dataset(50, 3, 0.1, 23);
  const AugmentedDataset aug = augment(d);

  for (int round = 0; round < 20; ++round) {
    Tree tree;
    for (int step = 0; step < 12; ++step) {
      const std::vector<int> leaves = tree.leaf_ids();
      if (rng.bernoulli(0.65)) {
        // grow a random leaf with a rule drawn from its candidate set
        const int leaf = leaves[rng.uniform_int(static_cast<int>(leaves.size()))];
        std::vector<int> rows;
        for (int i = 0; i < aug.n_rows(); ++i)
          if (tree.route({aug.row_values(i), aug.row_missing(i)}) == leaf)
            rows.push_back(i);
        const CandidateSet set = collect_candidate_rules(aug, rows);
        if (set.empty()) continue;
        const auto& attr = set.attrs[rng.uniform_int(set.n_attrs())];
        const double threshold =
            attr.thresholds[rng.uniform_int(static_cast<int>(attr.thresholds.size()))];
        const SplitRule rule{attr.attribute, threshold, rng.bernoulli(0.5)};
        // only apply edits that leave both children non-empty
        int n_left = 0, n_right = 0;
        for (int i : rows) {
          const bool left = aug.is_missing(i, rule.attribute)
                                ? rule.send_missing_left
                                : aug.value(i, rule.attribute) <= rule.threshold;
          (left ? n_left : n_right)++;
        }
        if (n_left == 0 || n_right == 0) continue;
        tree.grow(leaf, rule);
      } else {
        const std::vector<int> prunable = tree.prunable_ids();
        if (prunable.empty()) continue;
        tree.prune(prunable[rng.uniform_int(static_cast<int>(prunable.size()))]);
      }

      // audit: leaf counts sum to n, no leaf empty
      const std::vector<int> leaf_ids = tree.leaf_ids();
      std::vector<int> counts(leaf_ids.size(), 0);
      for (int i = 0; i < aug.n_rows(); ++i) {
        const int leaf = tree.route({aug.row_values(i), aug.row_missing(i)});
        const auto it = std::find(leaf_ids.begin(), leaf_ids.end(), leaf);
        REQUIRE(it != leaf_ids.end());
        ++counts[it - leaf_ids.begin()];
      }
      int total = 0;
      for (int c : counts) {
        CHECK(c >= 1);
        total += c;
      }
      CHECK(total == aug.n_rows());
    }
  }
}

TEST_CASE("tree JSON round trip preserves structure and routing") {
  Rng rng(29);
  for (int t = 0; t < 10; ++t) {
    const Tree tree = random_tree(4, 3, rng);
    const Tree back = Tree::from_json(tree.to_json());
    CHECK(back.structurally_equal(tree));
    for (int r = 0; r < 20; ++r) {
      std::vector<double> values(4);
      std::vector<std::uint8_t> missing(4);
      for (int j = 0; j < 4; ++j) {
        values[j] = rng.uniform(-2, 2);
        missing[j] = rng.bernoulli(0.3) ? 1 : 0;
      }
      CHECK(tree.predict({values, missing}) == back.predict({values, missing}));
    }
  }
}
